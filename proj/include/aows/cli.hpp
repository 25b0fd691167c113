#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aows::cli {

enum ExitCode : int {
    ok = 0,
    unexpected = 1,
    invalid_input = 2,
    computation_failed = 3,
};

/// Runs one subcommand; `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Writes to `path` via a temporary file in the same directory and a rename.
void write_atomically(const std::string& path, const std::string& contents);

}  // namespace aows::cli
