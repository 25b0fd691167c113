#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "aows/latmodel.hpp"
#include "aows/searchspace.hpp"

namespace aows {

/// Validation-error estimate of a configuration; must be deterministic.
using ProxyEvaluator = std::function<double(const ChannelConfig&)>;

struct TrimStep {
    ChannelConfig config;
    /// Boundary lowered to reach this config; empty for the starting MaxConfig.
    std::optional<std::size_t> trimmed_boundary;
    std::optional<double> proxy_error;
    double predicted_latency_ms = 0.0;
    /// Proxy evaluations spent choosing this step.
    std::size_t evaluations = 0;
};

struct GreedyResult {
    ChannelConfig config;
    std::vector<TrimStep> trajectory;
    std::size_t proxy_calls = 0;
};

/// Iterative trimming from the maximum configuration: each round lowers the one
/// boundary whose next-smaller choice gives the lowest proxy error (ties to the
/// lowest boundary), stopping at the first config with predicted latency <= target.
GreedyResult greedy_trim(const ProxyEvaluator& proxy, const LatencyTable& table, double target_ms,
                         const SearchSpace& space);

}  // namespace aows
