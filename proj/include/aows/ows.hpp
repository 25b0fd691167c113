#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "aows/latmodel.hpp"
#include "aows/searchspace.hpp"

namespace aows {

/// Running per-choice loss-gap statistics. Gaps accumulate into the current
/// epoch; finalize_epoch() publishes the epoch means as the served deltas.
/// Not internally synchronized: concurrent writers must serialize record().
class ErrorStats {
public:
    struct Entry {
        double sum = 0.0;
        std::int64_t count = 0;
    };

    ErrorStats() = default;
    explicit ErrorStats(const SearchSpace& space);

    void record(const ChannelConfig& config, double loss, double max_loss);
    /// Adds `gap` to every interior boundary's chosen entry.
    void record_gap(const ChoicePath& path, double gap);
    void finalize_epoch();

    std::size_t num_boundaries() const noexcept { return choices_.size(); }
    const std::vector<int>& choices(std::size_t boundary) const { return choices_.at(boundary); }

    /// Mean gap of the current (open) epoch; nullopt if unvisited.
    std::optional<double> current_mean(std::size_t boundary, std::size_t choice) const;
    const Entry& current(std::size_t boundary, std::size_t choice) const {
        return current_.at(boundary).at(choice);
    }
    /// Served delta from the last finalized epoch (with fallback to older epochs).
    std::optional<double> delta(std::size_t boundary, std::size_t choice) const;
    /// Statistics of the epoch that produced the served delta.
    const Entry& served(std::size_t boundary, std::size_t choice) const {
        return served_.at(boundary).at(choice);
    }
    std::size_t epochs_finalized() const noexcept { return epochs_; }

    /// Served deltas per boundary; NaN marks undefined entries. Boundaries 0 and n
    /// carry no unary term and are all zero.
    std::vector<std::vector<double>> unaries() const;

    /// Restores a served snapshot (used when loading a stats file).
    void set_served(std::size_t boundary, std::size_t choice, Entry stats,
                    std::optional<double> delta);

private:
    bool interior(std::size_t b) const { return b > 0 && b + 1 < choices_.size(); }

    std::vector<std::vector<int>> choices_;
    std::vector<std::vector<Entry>> current_;
    std::vector<std::vector<Entry>> served_;
    std::vector<std::vector<std::optional<double>>> delta_;
    std::size_t epochs_ = 0;
};

/// sum_b unary_b(c_b) + gamma * sum_i pairwise_i(c_i, c_{i+1}).
/// Unary NaN means "undefined"; decoding such a chain throws UndefinedUnaryError
/// naming the boundary and channel label.
struct ChainEnergy {
    std::vector<std::vector<double>> unaries;
    PairTable<double> pairwise;
    double gamma = 1.0;

    ChainEnergy() = default;
    ChainEnergy(std::vector<std::vector<double>> unaries, PairTable<double> pairwise, double gamma);

    static ChainEnergy from_stats(const ErrorStats& stats, const LatencyTable& table, double gamma);
    /// Unaries zero everywhere, gamma 1.
    static ChainEnergy pairwise_only(const PairTable<double>& table);

    std::size_t num_boundaries() const noexcept { return unaries.size(); }
    std::size_t num_choices(std::size_t boundary) const { return unaries.at(boundary).size(); }
    int label(std::size_t boundary, std::size_t choice) const {
        return pairwise.boundary_choices().at(boundary).at(choice);
    }

    /// Throws UndefinedUnaryError if any unary is NaN.
    void require_defined() const;

    double unary_sum(const ChoicePath& path) const;
    double pairwise_sum(const ChoicePath& path) const;
    double evaluate(const ChoicePath& path) const;
};

struct Decoded {
    ChoicePath path;
    double energy = 0.0;
};

/// Exact min-sum (Viterbi) decoding in O(sum_i |C_i||C_{i+1}|). Among
/// minimizers returns the lexicographically smallest path.
Decoded decode(const ChainEnergy& energy);

struct DualPoint {
    double gamma = 0.0;
    double latency_ms = 0.0;
    double unary_sum = 0.0;
};

struct SearchResult {
    ChannelConfig config;
    double gamma = 0.0;
    double modeled_latency_ms = 0.0;
    /// Unary sum plus gamma times modeled latency (without the -gamma*L_T constant).
    double energy = 0.0;
    double unary_sum = 0.0;
    double target_ms = 0.0;
    std::vector<DualPoint> dual_trace;
};

struct SearchOptions {
    double target_ms = 0.0;
    /// Upper end of the multiplier bracket; defaults to
    /// 1e6 * (max delta - min delta) / (min positive pairwise latency).
    std::optional<double> gamma_max;
    double tol = 1e-6;
};

double default_gamma_max(const std::vector<std::vector<double>>& unaries,
                         const PairTable<double>& table);

/// Binary search over the Lagrange multiplier; returns the feasible decode with
/// the smallest unary sum seen. Throws TargetUnreachableError when even
/// gamma_max decodes above the target.
SearchResult lagrangian_search(const std::vector<std::vector<double>>& unaries,
                               const LatencyTable& table, const SearchOptions& opts);
SearchResult lagrangian_search(const ErrorStats& stats, const LatencyTable& table,
                               const SearchOptions& opts);

/// g(gamma) = min_c [U(c) + gamma (L(c) - L_T)] at one trace point.
double dual_value(const DualPoint& point, double target_ms);
/// max over the trace of the dual function: a lower bound on the constrained optimum.
double best_dual_bound(const SearchResult& result);

}  // namespace aows
