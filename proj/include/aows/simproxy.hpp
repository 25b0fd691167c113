#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aows/greedy.hpp"
#include "aows/latmodel.hpp"
#include "aows/ows.hpp"
#include "aows/rng.hpp"
#include "aows/smoothdp.hpp"

namespace aows {

/// Hidden ground-truth latency table measured with multiplicative gaussian noise.
class SyntheticDevice {
public:
    SyntheticDevice(LatencyTable truth, double noise, std::uint64_t seed);

    /// Monotone truth: each layer is the 2-D prefix sum of positive random
    /// increments, scaled so that the max config totals about `total_ms`.
    static LatencyTable random_monotone_table(const SearchSpace& space, std::uint64_t seed,
                                              double total_ms = 10.0);

    const LatencyTable& truth() const noexcept { return truth_; }
    double noise() const noexcept { return noise_; }

    /// latency = truth * (1 + noise * z), clamped at zero.
    BenchmarkSample measure(const ChannelConfig& config);

private:
    LatencyTable truth_;
    double noise_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct RandomLossOptions {
    /// Typical range of each boundary's quality curve.
    double quality_scale = 1.0;
    /// Pairwise coupling strength relative to quality_scale (0 = coupling-free).
    double coupling = 0.0;
    double noise = 0.05;
};

/// Synthetic slimmable-network loss: for a config c the gap to the max-config
/// loss has expectation sum_b g_b(c_b) + sum_i h_i(c_i, c_{i+1}).
class SyntheticLoss {
public:
    SyntheticLoss(const SearchSpace& space, std::vector<std::vector<double>> quality,
                  PairTable<double> coupling, double noise, std::uint64_t seed,
                  double base_loss = 2.0, double latent_spread = 0.5);

    static SyntheticLoss random(const SearchSpace& space, const RandomLossOptions& opts,
                                std::uint64_t seed);

    const std::vector<std::vector<double>>& quality() const noexcept { return quality_; }
    const PairTable<double>& coupling() const noexcept { return coupling_; }
    double noise() const noexcept { return noise_; }

    double expected_gap(const ChoicePath& path) const;
    double expected_gap(const ChannelConfig& config) const;

    /// (loss, max_loss) for one example drawn from the oracle's stream.
    std::pair<double, double> observe(const ChannelConfig& config);

private:
    SearchSpace space_;
    std::vector<std::vector<double>> quality_;
    PairTable<double> coupling_;
    double noise_;
    double base_loss_;
    double latent_spread_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

enum class GammaPolicy { per_epoch, fixed };

struct AowsRunConfig {
    std::size_t warmup_epochs = 5;
    std::size_t total_epochs = 20;
    std::size_t samples_per_epoch = 1024;
    std::size_t batch_size = 64;
    AnnealSchedule schedule = AnnealSchedule::standard();
    GammaPolicy gamma_policy = GammaPolicy::per_epoch;
    double fixed_gamma = 0.0;
    double target_ms = 0.0;
    std::optional<double> gamma_max;
    double gamma_tol = 1e-6;
    std::uint64_t seed = 0;
    bool joint_sampling = false;
    /// Recompute marginals once per epoch instead of every iteration.
    bool marginals_per_epoch = false;
};

struct AowsEpoch {
    std::size_t epoch = 0;
    bool warmup = true;
    double temperature = 0.0;  // at the last sampling iteration; 0 during warmup
    double gamma = 0.0;        // multiplier in force after this epoch
    std::vector<double> entropy;  // per boundary, of the last sampling distribution
};

struct AowsResult {
    SearchResult result;
    std::vector<AowsEpoch> epochs;
    ErrorStats stats;
    MarginalSet marginals;
};

/// Uniform warmup, then marginal-biased sampling with annealed temperature.
/// The schedule is shifted so that its first knot falls at the end of warmup.
AowsResult run_aows(const AowsRunConfig& run, SyntheticLoss& oracle, const LatencyTable& table,
                    const SearchSpace& space);

/// Exhaustive argmin of an objective subject to predict(table) <= target.
std::optional<ChannelConfig> constrained_optimum(const SearchSpace& space,
                                                 const LatencyTable& table, double target_ms,
                                                 const std::function<double(const ChoicePath&)>& objective,
                                                 std::uint64_t cap);

/// Synthetic end-to-end experiment: benchmark planning, fit, then OWS, AOWS and
/// greedy against the same latency model and loss oracle.
struct Scenario {
    std::uint64_t seed = 0;
    double device_noise = 0.01;
    double device_total_ms = 10.0;
    RandomLossOptions loss;
    /// Explicit quality curves (per boundary); random when empty.
    std::vector<std::vector<double>> quality;
    /// Keep planning benchmarks until every table entry has this many samples.
    std::int64_t benchmark_min_count = 5;
    std::size_t validation_samples = 200;
    /// Multiples of the mean measured latency.
    std::vector<double> lambda_grid = {0.0, 1e-3, 1e-2, 1e-1, 1.0};
    FitOptions fit;
    /// Absolute target, or a fraction between the fastest and max config's modeled latency.
    std::optional<double> target_ms;
    double target_fraction = 0.5;
    AowsRunConfig aows;
    std::uint64_t oracle_cap = 2'000'000;
};

struct MethodReport {
    std::string method;
    ChannelConfig config;
    double true_objective = 0.0;
    double modeled_latency_ms = 0.0;
    double true_latency_ms = 0.0;
};

struct SimulationReport {
    std::size_t benchmark_samples = 0;
    double lambda = 0.0;
    double validation_rmse = 0.0;
    double hinge_mass = 0.0;
    double target_ms = 0.0;
    std::vector<MethodReport> methods;
};

SimulationReport run_simulation(const SearchSpace& space, const Scenario& scenario);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace aows
