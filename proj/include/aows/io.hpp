#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "aows/greedy.hpp"
#include "aows/latmodel.hpp"
#include "aows/ows.hpp"
#include "aows/searchspace.hpp"
#include "aows/simproxy.hpp"
#include "aows/smoothdp.hpp"

// JSON documents for every file the toolkit reads or writes. Parse failures
// raise ValidationError naming the offending field (or line, for JSONL).

namespace aows::io {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path);

json to_json(const SearchSpace& space);
SearchSpace space_from_json(const json& doc);
SearchSpace load_space(const std::filesystem::path& path);

/// Accepts full (n+1) or interior-only (n-1) channel lists.
ChannelConfig config_from_json(const json& value, const SearchSpace& space);
/// "8,16,48" -> interior channels expanded with the space boundaries.
ChannelConfig parse_interior_config(const std::string& text, const SearchSpace& space);

/// Line-delimited {"config": [...], "latency_ms": x} records.
std::vector<BenchmarkSample> read_samples(std::istream& in, const SearchSpace& space);
std::vector<BenchmarkSample> load_samples(const std::filesystem::path& path, const SearchSpace& space);
std::string samples_to_jsonl(const std::vector<BenchmarkSample>& samples);

json to_json(const LatencyTable& table);
LatencyTable table_from_json(const json& doc, const SearchSpace& space);

json to_json(const CountTable& counts);
CountTable counts_from_json(const json& doc, const SearchSpace& space);

json to_json(const ErrorStats& stats);
ErrorStats stats_from_json(const json& doc, const SearchSpace& space);

json to_json(const SearchResult& result);
json to_json(const GreedyResult& result);
json to_json(const AowsResult& result);
json to_json(const SimulationReport& report);
json to_json(const FitReport& report);

AnnealSchedule schedule_from_json(const json& doc);
json to_json(const AnnealSchedule& schedule);

/// Scenario for the synthetic pipeline; unspecified fields keep their defaults.
Scenario scenario_from_json(const json& doc);

std::string marginals_csv(const MarginalSet& marginals, const SearchSpace& space);
std::string dual_trace_csv(const SearchResult& result);

}  // namespace aows::io
