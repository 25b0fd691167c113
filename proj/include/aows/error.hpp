#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace aows {

namespace detail {
inline std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}
}  // namespace detail

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, invalid configurations, unknown flags.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A well-formed request that the numerics could not satisfy.
class ComputationError : public Error {
public:
    using Error::Error;
};

class EnumerationLimitError : public ValidationError {
public:
    EnumerationLimitError(double size, std::uint64_t cap)
        : ValidationError("enumeration refused: " + std::to_string(size) +
                          " configurations exceeds cap " + std::to_string(cap)),
          size_(size) {}
    double size() const noexcept { return size_; }

private:
    double size_;
};

class CoverageError : public ComputationError {
public:
    CoverageError(std::size_t untouched)
        : ComputationError(std::to_string(untouched) +
                           " latency-table entries are not covered by any sample"),
          untouched_(untouched) {}
    std::size_t untouched() const noexcept { return untouched_; }

private:
    std::size_t untouched_;
};

class NonConvergenceError : public ComputationError {
public:
    NonConvergenceError(std::size_t iters, double residual)
        : ComputationError("fit did not converge within " + std::to_string(iters) +
                           " iterations (last residual " + detail::short_number(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class TargetUnreachableError : public ComputationError {
public:
    TargetUnreachableError(double target_ms, double min_latency_ms)
        : ComputationError("target unreachable: target " + detail::short_number(target_ms) +
                           " ms, minimum achievable modeled latency " +
                           detail::short_number(min_latency_ms) + " ms"),
          min_latency_ms_(min_latency_ms) {}
    double min_latency_ms() const noexcept { return min_latency_ms_; }

private:
    double min_latency_ms_;
};

class UndefinedUnaryError : public ComputationError {
public:
    UndefinedUnaryError(std::size_t boundary, int channels)
        : ComputationError("per-channel error undefined at boundary " + std::to_string(boundary) +
                           ", channels " + std::to_string(channels)),
          boundary_(boundary), channels_(channels) {}
    std::size_t boundary() const noexcept { return boundary_; }
    int channels() const noexcept { return channels_; }

private:
    std::size_t boundary_;
    int channels_;
};

}  // namespace aows
