#include "aows/latmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aows/error.hpp"
#include "aows/ows.hpp"
#include "aows/rng.hpp"

namespace aows {

std::size_t LatencyTable::num_unfitted() const {
    return static_cast<std::size_t>(std::count(fitted_.begin(), fitted_.end(), 0));
}

LinearSystem assemble(const std::vector<BenchmarkSample>& samples, const SearchSpace& space) {
    if (samples.empty()) throw ValidationError("assemble: no benchmark samples");
    const PairTable<double> shape(space);

    LinearSystem sys;
    sys.boundary_choices = space.all_choices();
    sys.num_columns = shape.size();
    sys.rows.reserve(samples.size());
    sys.observations.reserve(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
        const auto& s = samples[j];
        ChoicePath path;
        try {
            path = space.path_of(s.config);
        } catch (const ValidationError& e) {
            throw ValidationError("sample " + std::to_string(j) + ": " + e.what());
        }
        if (!(s.latency_ms >= 0.0))
            throw ValidationError("sample " + std::to_string(j) + ": latency must be >= 0");
        std::vector<std::size_t> row;
        row.reserve(space.num_layers());
        for (std::size_t i = 0; i < space.num_layers(); ++i)
            row.push_back(shape.flat_index(i, path[i], path[i + 1]));
        sys.rows.push_back(std::move(row));
        sys.observations.push_back(s.latency_ms);
    }

    for (std::size_t i = 0; i < shape.num_layers(); ++i) {
        const std::size_t nr = shape.rows(i);
        const std::size_t nc = shape.cols(i);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nc; ++c) {
                if (r + 1 < nr)
                    sys.monotone.push_back({shape.flat_index(i, r, c), shape.flat_index(i, r + 1, c)});
                if (c + 1 < nc)
                    sys.monotone.push_back({shape.flat_index(i, r, c), shape.flat_index(i, r, c + 1)});
            }
    }
    return sys;
}

double hinge_mass(const LinearSystem& system, const std::vector<double>& x) {
    double h = 0.0;
    for (const auto& m : system.monotone) h += std::max(x[m.lower] - x[m.upper], 0.0);
    return h;
}

double objective(const LinearSystem& system, const std::vector<double>& x, double lambda) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < system.rows.size(); ++j) {
        double ax = 0.0;
        for (std::size_t k : system.rows[j]) ax += x[k];
        const double r = ax - system.observations[j];
        r2 += r * r;
    }
    return lambda > 0.0 ? r2 + lambda * hinge_mass(system, x) : r2;
}

LatencyTable fit(const LinearSystem& system, const FitOptions& opts) {
    return fit_detailed(system, opts).table;
}

double predict(const LatencyTable& table, const ChoicePath& path) {
    if (path.size() != table.num_layers() + 1)
        throw ValidationError("predict: path length does not match the table");
    double total = 0.0;
    for (std::size_t i = 0; i < table.num_layers(); ++i) total += table.at(i, path[i], path[i + 1]);
    return total;
}

double predict(const LatencyTable& table, const ChannelConfig& config) {
    const auto& choices = table.boundary_choices();
    if (config.channels.size() != choices.size())
        throw ValidationError("predict: config length does not match the table");
    ChoicePath path(choices.size());
    for (std::size_t b = 0; b < choices.size(); ++b) {
        const auto& set = choices[b];
        auto it = std::lower_bound(set.begin(), set.end(), config.channels[b]);
        if (it == set.end() || *it != config.channels[b])
            throw ValidationError("predict: channel " + std::to_string(config.channels[b]) +
                                  " not in the table at boundary " + std::to_string(b));
        path[b] = static_cast<std::size_t>(it - set.begin());
    }
    return predict(table, path);
}

LatencyTable flops_table(const SearchSpace& space) {
    LatencyTable t(space);
    for (std::size_t i = 0; i < space.num_layers(); ++i)
        for (std::size_t r = 0; r < t.rows(i); ++r)
            for (std::size_t c = 0; c < t.cols(i); ++c)
                t.at(i, r, c) = layer_flops(space.layer(i), t.inputs(i)[r], t.outputs(i)[c]);
    return t;
}

std::int64_t min_count(const CountTable& counts) {
    const auto& v = counts.values();
    if (v.empty()) return 0;
    return *std::min_element(v.begin(), v.end());
}

void add_counts(CountTable& counts, const ChoicePath& path) {
    for (std::size_t i = 0; i < counts.num_layers(); ++i) counts.at(i, path[i], path[i + 1]) += 1;
}

ChannelConfig plan_next(const CountTable& counts, const SearchSpace& space) {
    if (counts.boundary_choices() != space.all_choices())
        throw ValidationError("plan_next: count table does not match the search space");
    const std::int64_t m = min_count(counts);
    // Secondary term: among paths with the most minimum-count entries, prefer
    // the least sampled overall. It sums to less than 1 so it never outweighs
    // one minimum-count entry.
    double bound = 1.0;
    for (std::size_t i = 0; i < counts.num_layers(); ++i) {
        std::int64_t top = 0;
        for (std::size_t r = 0; r < counts.rows(i); ++r)
            for (std::size_t c = 0; c < counts.cols(i); ++c) top = std::max(top, counts.at(i, r, c));
        bound += static_cast<double>(top);
    }
    // Tertiary jitter, reseeded from the sample count: remaining ties change
    // from call to call so repeated rounds do not replay the same paths. Its
    // path sum stays below one step of the secondary term.
    std::int64_t taken = 0;
    for (std::size_t r = 0; r < counts.rows(0); ++r)
        for (std::size_t c = 0; c < counts.cols(0); ++c) taken += counts.at(0, r, c);
    Rng rng(derive_seed(static_cast<std::uint64_t>(taken), "plan_next"));
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    const double jitter_scale = 1.0 / (bound * static_cast<double>(counts.num_layers() + 1));
    PairTable<double> pairwise(space);
    for (std::size_t k = 0; k < pairwise.size(); ++k) {
        const std::int64_t n = counts.values()[k];
        pairwise.values()[k] =
            (n == m ? -1.0 : 0.0) + static_cast<double>(n) / bound + jitter_scale * jitter(rng);
    }
    const Decoded d = decode(ChainEnergy::pairwise_only(pairwise));
    return space.config_of(d.path);
}

}  // namespace aows

namespace aows {

double relative_rmse(const LatencyTable& table, const std::vector<BenchmarkSample>& samples) {
    if (samples.empty()) throw ValidationError("relative_rmse: no samples");
    double s = 0.0;
    for (const auto& smp : samples) {
        if (!(smp.latency_ms > 0.0))
            throw ValidationError("relative_rmse: latencies must be positive");
        const double r = (predict(table, smp.config) - smp.latency_ms) / smp.latency_ms;
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(samples.size()));
}

LambdaSelection tune_lambda(const LinearSystem& system,
                            const std::vector<BenchmarkSample>& validation,
                            const std::vector<double>& grid, const FitOptions& base) {
    if (grid.empty()) throw ValidationError("tune_lambda: empty lambda grid");
    LambdaSelection sel;
    sel.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        FitOptions opts = base;
        opts.lambda = lambda;
        FitResult r = fit_detailed(system, opts);
        const double rmse = relative_rmse(r.table, validation);
        sel.validation_rmse.push_back(rmse);
        if (rmse < best || (rmse == best && lambda > sel.lambda)) {
            best = rmse;
            sel.lambda = lambda;
            sel.fit = std::move(r);
        }
    }
    return sel;
}

}  // namespace aows
