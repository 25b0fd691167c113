#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "aows/searchspace.hpp"

namespace aows {

/// Per-layer dense tables over C_i × C_{i+1}, stored contiguously so the whole
/// table doubles as the variable vector of the latency linear system.
template <class T>
class PairTable {
public:
    PairTable() = default;
    explicit PairTable(const SearchSpace& space) : PairTable(space.all_choices()) {}
    explicit PairTable(std::vector<std::vector<int>> boundary_choices)
        : choices_(std::move(boundary_choices)) {
        offsets_.push_back(0);
        for (std::size_t i = 0; i + 1 < choices_.size(); ++i)
            offsets_.push_back(offsets_.back() + choices_[i].size() * choices_[i + 1].size());
        values_.assign(offsets_.back(), T{});
    }

    std::size_t num_layers() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t rows(std::size_t layer) const { return choices_.at(layer).size(); }
    std::size_t cols(std::size_t layer) const { return choices_.at(layer + 1).size(); }
    const std::vector<int>& inputs(std::size_t layer) const { return choices_.at(layer); }
    const std::vector<int>& outputs(std::size_t layer) const { return choices_.at(layer + 1); }
    const std::vector<std::vector<int>>& boundary_choices() const noexcept { return choices_; }

    std::size_t flat_index(std::size_t layer, std::size_t r, std::size_t c) const {
        return offsets_[layer] + r * cols(layer) + c;
    }
    std::size_t layer_offset(std::size_t layer) const { return offsets_.at(layer); }

    T& at(std::size_t layer, std::size_t r, std::size_t c) { return values_[flat_index(layer, r, c)]; }
    const T& at(std::size_t layer, std::size_t r, std::size_t c) const {
        return values_[flat_index(layer, r, c)];
    }

    std::vector<T>& values() noexcept { return values_; }
    const std::vector<T>& values() const noexcept { return values_; }

    bool operator==(const PairTable&) const = default;

private:
    std::vector<std::vector<int>> choices_;
    std::vector<std::size_t> offsets_;
    std::vector<T> values_;
};

/// Per-layer latency contributions L_i(c_in, c_out) in milliseconds.
/// `fitted(k)` is false for entries zero-filled by a partial fit.
class LatencyTable : public PairTable<double> {
public:
    LatencyTable() = default;
    explicit LatencyTable(const SearchSpace& space) : LatencyTable(space.all_choices()) {}
    explicit LatencyTable(std::vector<std::vector<int>> boundary_choices)
        : PairTable<double>(std::move(boundary_choices)), fitted_(size(), 1) {}

    bool fitted(std::size_t flat) const { return fitted_.at(flat) != 0; }
    void set_fitted(std::size_t flat, bool v) { fitted_.at(flat) = v ? 1 : 0; }
    std::size_t num_unfitted() const;

private:
    std::vector<unsigned char> fitted_;
};

using CountTable = PairTable<std::int64_t>;

struct BenchmarkSample {
    ChannelConfig config;
    double latency_ms = 0.0;
};

/// A x ≈ l with soft constraints V x <= 0. A is 0/1 with exactly n ones per row,
/// stored as column indices; each V row is (+1 at `lower`, -1 at `upper`).
struct LinearSystem {
    struct MonotonePair {
        std::size_t lower;
        std::size_t upper;
    };

    std::vector<std::vector<int>> boundary_choices;
    std::size_t num_columns = 0;
    std::vector<std::vector<std::size_t>> rows;
    std::vector<double> observations;
    std::vector<MonotonePair> monotone;
};

struct FitOptions {
    double lambda = 0.0;
    double tol = 1e-8;
    std::size_t max_iters = 200000;
    bool allow_partial = false;
    /// Keep the objective value of every outer iteration in FitReport.
    bool record_trace = false;
};

struct FitReport {
    std::size_t iterations = 0;
    double objective = 0.0;
    double residual_norm = 0.0;
    double hinge_mass = 0.0;
    double optimality = 0.0;
    std::size_t untouched_columns = 0;
    std::vector<double> objective_trace;
};

struct FitResult {
    LatencyTable table;
    FitReport report;
};

LinearSystem assemble(const std::vector<BenchmarkSample>& samples, const SearchSpace& space);

/// min_x ||A x - l||^2 + lambda * ||max(V x, 0)||_1
FitResult fit_detailed(const LinearSystem& system, const FitOptions& opts);
LatencyTable fit(const LinearSystem& system, const FitOptions& opts);

double hinge_mass(const LinearSystem& system, const std::vector<double>& x);
double objective(const LinearSystem& system, const std::vector<double>& x, double lambda);

double predict(const LatencyTable& table, const ChoicePath& path);
double predict(const LatencyTable& table, const ChannelConfig& config);

/// FLOPs as a latency table; predict() on it equals flops() exactly.
LatencyTable flops_table(const SearchSpace& space);

/// Next configuration to benchmark: maximizes the number of least-sampled
/// table entries on the path (ties to the lexicographically smallest config).
ChannelConfig plan_next(const CountTable& counts, const SearchSpace& space);
void add_counts(CountTable& counts, const ChoicePath& path);
std::int64_t min_count(const CountTable& counts);

}  // namespace aows

namespace aows {

/// sqrt(mean(((predict - latency) / latency)^2)) over the samples.
double relative_rmse(const LatencyTable& table, const std::vector<BenchmarkSample>& samples);

struct LambdaSelection {
    double lambda = 0.0;
    FitResult fit;
    std::vector<double> grid;
    std::vector<double> validation_rmse;
};

/// Fits once per grid value and keeps the lowest validation relative RMSE;
/// exact ties go to the larger lambda.
LambdaSelection tune_lambda(const LinearSystem& system,
                            const std::vector<BenchmarkSample>& validation,
                            const std::vector<double>& grid, const FitOptions& base);

}  // namespace aows
