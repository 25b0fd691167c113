#include "aows/simproxy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aows/error.hpp"

namespace aows {

SyntheticDevice::SyntheticDevice(LatencyTable truth, double noise, std::uint64_t seed)
    : truth_(std::move(truth)), noise_(noise), rng_(seed) {
    if (!(noise_ >= 0.0)) throw ValidationError("device noise must be >= 0");
}

LatencyTable SyntheticDevice::random_monotone_table(const SearchSpace& space, std::uint64_t seed,
                                                    double total_ms) {
    Rng rng(seed);
    std::uniform_real_distribution<double> inc(0.1, 1.0);
    std::uniform_real_distribution<double> weight(0.5, 1.5);
    LatencyTable t(space);
    for (std::size_t i = 0; i < t.num_layers(); ++i) {
        const std::size_t nr = t.rows(i), nc = t.cols(i);
        const double w = weight(rng);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nc; ++c) {
                double v = inc(rng);
                if (r > 0) v += t.at(i, r - 1, c);
                if (c > 0) v += t.at(i, r, c - 1);
                if (r > 0 && c > 0) v -= t.at(i, r - 1, c - 1);
                t.at(i, r, c) = v;
            }
        const double top = t.at(i, nr - 1, nc - 1);
        for (std::size_t r = 0; r < nr; ++r)
            for (std::size_t c = 0; c < nc; ++c) t.at(i, r, c) *= w / top;
    }
    const double max_total = predict(t, space.path_of(space.max_config()));
    for (double& v : t.values()) v *= total_ms / max_total;
    return t;
}

BenchmarkSample SyntheticDevice::measure(const ChannelConfig& config) {
    const double truth = predict(truth_, config);
    const double z = normal_(rng_);
    return {config, std::max(0.0, truth * (1.0 + noise_ * z))};
}

SyntheticLoss::SyntheticLoss(const SearchSpace& space, std::vector<std::vector<double>> quality,
                             PairTable<double> coupling, double noise, std::uint64_t seed,
                             double base_loss, double latent_spread)
    : space_(space),
      quality_(std::move(quality)),
      coupling_(std::move(coupling)),
      noise_(noise),
      base_loss_(base_loss),
      latent_spread_(latent_spread),
      rng_(seed) {
    if (quality_.size() != space_.num_boundaries())
        throw ValidationError("quality curves: expected one per boundary");
    for (std::size_t b = 0; b < quality_.size(); ++b) {
        if (quality_[b].size() != space_.choices(b).size())
            throw ValidationError("quality curve " + std::to_string(b) + " has wrong length");
        if (quality_[b].back() != 0.0)
            throw ValidationError("quality curve " + std::to_string(b) +
                                  " must be 0 at the max choice");
    }
    if (coupling_.size() == 0) coupling_ = PairTable<double>(space_);
    if (coupling_.boundary_choices() != space_.all_choices())
        throw ValidationError("coupling table does not match the search space");
    for (std::size_t i = 0; i < coupling_.num_layers(); ++i)
        if (coupling_.at(i, coupling_.rows(i) - 1, coupling_.cols(i) - 1) != 0.0)
            throw ValidationError("coupling must vanish at the max config");
    if (!(noise_ >= 0.0) || !(latent_spread_ >= 0.0))
        throw ValidationError("loss noise levels must be >= 0");
}

SyntheticLoss SyntheticLoss::random(const SearchSpace& space, const RandomLossOptions& opts,
                                    std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> quality;
    for (std::size_t b = 0; b < space.num_boundaries(); ++b) {
        const std::size_t k = space.choices(b).size();
        std::vector<double> g(k, 0.0);
        if (b > 0 && b + 1 < space.num_boundaries() && k > 1) {
            // decreasing towards the max choice, random convex-ish steps
            const double range = opts.quality_scale * (0.2 + 0.8 * unit(rng));
            std::vector<double> steps(k - 1);
            for (auto& s : steps) s = 0.1 + unit(rng);
            const double total = std::accumulate(steps.begin(), steps.end(), 0.0);
            for (std::size_t c = k - 1; c-- > 0;) g[c] = g[c + 1] + range * steps[c] / total;
        }
        quality.push_back(std::move(g));
    }
    PairTable<double> coupling(space);
    if (opts.coupling != 0.0) {
        // Shrinking both ends of a layer costs more than the sum of the parts.
        for (std::size_t i = 0; i < coupling.num_layers(); ++i) {
            const double w = opts.coupling * opts.quality_scale * unit(rng);
            const std::size_t nr = coupling.rows(i), nc = coupling.cols(i);
            for (std::size_t r = 0; r < nr; ++r)
                for (std::size_t c = 0; c < nc; ++c) {
                    const double a = nr > 1 ? 1.0 - static_cast<double>(r) / (nr - 1) : 0.0;
                    const double d = nc > 1 ? 1.0 - static_cast<double>(c) / (nc - 1) : 0.0;
                    coupling.at(i, r, c) = w * a * d;
                }
        }
    }
    return SyntheticLoss(space, std::move(quality), std::move(coupling), opts.noise,
                         derive_seed(seed, "loss.observe"));
}

double SyntheticLoss::expected_gap(const ChoicePath& path) const {
    double g = 0.0;
    for (std::size_t b = 0; b < quality_.size(); ++b) g += quality_[b][path.at(b)];
    for (std::size_t i = 0; i < coupling_.num_layers(); ++i) g += coupling_.at(i, path[i], path[i + 1]);
    return g;
}

double SyntheticLoss::expected_gap(const ChannelConfig& config) const {
    return expected_gap(space_.path_of(config));
}

std::pair<double, double> SyntheticLoss::observe(const ChannelConfig& config) {
    const double gap = expected_gap(config);
    const double max_loss = base_loss_ + latent_spread_ * normal_(rng_);
    const double loss = max_loss + gap + noise_ * normal_(rng_);
    return {loss, max_loss};
}

namespace {

std::vector<double> uniform_log_probs(std::size_t k) {
    return std::vector<double>(k, -std::log(static_cast<double>(k)));
}

}  // namespace

AowsResult run_aows(const AowsRunConfig& run, SyntheticLoss& oracle, const LatencyTable& table,
                    const SearchSpace& space) {
    if (run.warmup_epochs == 0) throw ValidationError("aows: need at least one warmup epoch");
    if (run.warmup_epochs > run.total_epochs)
        throw ValidationError("aows: warmup_epochs exceeds total_epochs");
    if (run.samples_per_epoch == 0 || run.batch_size == 0)
        throw ValidationError("aows: samples_per_epoch and batch_size must be positive");
    if (table.boundary_choices() != space.all_choices())
        throw ValidationError("aows: latency table does not match the search space");

    const AnnealSchedule schedule =
        run.schedule.shifted(static_cast<double>(run.warmup_epochs) - run.schedule.start());
    SearchOptions search_opts{run.target_ms, run.gamma_max, run.gamma_tol};

    AowsResult out{{}, {}, ErrorStats(space), {}};
    ErrorStats& stats = out.stats;
    Rng rng(derive_seed(run.seed, "aows.sample"));
    const std::size_t nb = space.num_boundaries();
    const std::size_t iters =
        (run.samples_per_epoch + run.batch_size - 1) / run.batch_size;

    double gamma = run.gamma_policy == GammaPolicy::fixed ? run.fixed_gamma : 0.0;
    MarginalSet uniform;
    for (std::size_t b = 0; b < nb; ++b) uniform.log_probs.push_back(uniform_log_probs(space.choices(b).size()));

    for (std::size_t epoch = 0; epoch < run.total_epochs; ++epoch) {
        const bool warmup = epoch < run.warmup_epochs;
        AowsEpoch rec;
        rec.epoch = epoch;
        rec.warmup = warmup;
        std::size_t drawn = 0;
        MarginalSet current = uniform;
        std::optional<ChainEnergy> energy;
        SmoothedChain chain;
        if (!warmup) energy = ChainEnergy::from_stats(stats, table, gamma);

        for (std::size_t it = 0; it < iters; ++it) {
            double temperature = 0.0;
            if (!warmup) {
                const double pos = static_cast<double>(epoch) +
                                   (run.marginals_per_epoch ? 0.0 : static_cast<double>(it) / iters);
                temperature = temperature_at(schedule, pos);
                if (it == 0 || !run.marginals_per_epoch) {
                    chain = smooth_chain(*energy, temperature);
                    current = chain.marginals;
                }
                rec.temperature = temperature;
            }
            const std::size_t batch = std::min(run.batch_size, run.samples_per_epoch - drawn);
            for (std::size_t k = 0; k < batch; ++k) {
                const ChoicePath path = (!warmup && run.joint_sampling)
                                            ? sample_joint(*energy, chain, temperature, rng)
                                            : sample(current, rng);
                const ChannelConfig config = space.config_of(path);
                const auto [loss, max_loss] = oracle.observe(config);
                stats.record(config, loss, max_loss);
            }
            drawn += batch;
        }
        for (std::size_t b = 0; b < nb; ++b) rec.entropy.push_back(current.entropy(b));

        stats.finalize_epoch();
        if (run.gamma_policy == GammaPolicy::per_epoch && epoch + 1 < run.total_epochs &&
            epoch + 1 >= run.warmup_epochs)
            gamma = lagrangian_search(stats, table, search_opts).gamma;
        rec.gamma = gamma;
        out.epochs.push_back(std::move(rec));
        out.marginals = current;
    }

    out.result = lagrangian_search(stats, table, search_opts);
    return out;
}

std::optional<ChannelConfig> constrained_optimum(
    const SearchSpace& space, const LatencyTable& table, double target_ms,
    const std::function<double(const ChoicePath&)>& objective, std::uint64_t cap) {
    std::optional<ChoicePath> best;
    double best_value = std::numeric_limits<double>::infinity();
    for_each_config(space, cap, [&](const ChoicePath& p) {
        if (predict(table, p) > target_ms) return;
        const double v = objective(p);
        if (v < best_value) {
            best_value = v;
            best = p;
        }
    });
    if (!best) return std::nullopt;
    return space.config_of(*best);
}

SimulationReport run_simulation(const SearchSpace& space, const Scenario& sc) {
    SimulationReport rep;
    SyntheticDevice device(
        SyntheticDevice::random_monotone_table(space, derive_seed(sc.seed, "device.truth"),
                                               sc.device_total_ms),
        sc.device_noise, derive_seed(sc.seed, "device.measure"));

    // benchmark planning until the requested coverage
    CountTable counts(space);
    std::vector<BenchmarkSample> samples;
    while (min_count(counts) < sc.benchmark_min_count) {
        const ChannelConfig c = plan_next(counts, space);
        add_counts(counts, space.path_of(c));
        samples.push_back(device.measure(c));
    }
    rep.benchmark_samples = samples.size();

    std::vector<BenchmarkSample> validation;
    {
        Rng rng(derive_seed(sc.seed, "validation.configs"));
        for (std::size_t k = 0; k < sc.validation_samples; ++k) {
            ChoicePath p(space.num_boundaries());
            for (std::size_t b = 0; b < p.size(); ++b)
                p[b] = std::uniform_int_distribution<std::size_t>(0, space.choices(b).size() - 1)(rng);
            validation.push_back(device.measure(space.config_of(p)));
        }
    }
    double mean_latency = 0.0;
    for (const auto& s : samples) mean_latency += s.latency_ms;
    mean_latency /= static_cast<double>(samples.size());
    std::vector<double> grid;
    for (double g : sc.lambda_grid) grid.push_back(g * mean_latency);

    const LinearSystem system = assemble(samples, space);
    LambdaSelection sel = tune_lambda(system, validation, grid, sc.fit);
    const LatencyTable& table = sel.fit.table;
    rep.lambda = sel.lambda;
    rep.hinge_mass = sel.fit.report.hinge_mass;
    rep.validation_rmse =
        *std::min_element(sel.validation_rmse.begin(), sel.validation_rmse.end());

    const double fastest = predict(table, decode(ChainEnergy::pairwise_only(table)).path);
    const double slowest = predict(table, space.max_config());
    rep.target_ms = sc.target_ms.value_or(fastest + sc.target_fraction * (slowest - fastest));

    SyntheticLoss loss =
        sc.quality.empty()
            ? SyntheticLoss::random(space, sc.loss, derive_seed(sc.seed, "loss"))
            : SyntheticLoss(space, sc.quality, PairTable<double>(space), sc.loss.noise,
                            derive_seed(sc.seed, "loss.observe"));
    auto report = [&](std::string name, const ChannelConfig& c) {
        rep.methods.push_back({std::move(name), c, loss.expected_gap(c), predict(table, c),
                               predict(device.truth(), c)});
    };

    AowsRunConfig aows = sc.aows;
    aows.target_ms = rep.target_ms;
    aows.seed = derive_seed(sc.seed, "aows");
    AowsRunConfig ows = aows;
    ows.warmup_epochs = ows.total_epochs;

    // each method sees a fresh oracle stream with the same seed
    SyntheticLoss ows_loss = loss;
    report("ows", run_aows(ows, ows_loss, table, space).result.config);
    SyntheticLoss aows_loss = loss;
    report("aows", run_aows(aows, aows_loss, table, space).result.config);
    const GreedyResult greedy = greedy_trim(
        [&](const ChannelConfig& c) { return loss.expected_gap(c); }, table, rep.target_ms, space);
    report("greedy", greedy.config);

    if (space.size() <= static_cast<double>(sc.oracle_cap)) {
        auto opt = constrained_optimum(
            space, table, rep.target_ms, [&](const ChoicePath& p) { return loss.expected_gap(p); },
            sc.oracle_cap);
        if (opt) report("optimum", *opt);
    }
    return rep;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ValidationError("spearman: need two equal-length series of size >= 2");
    auto ranks = [](const std::vector<double>& v) {
        std::vector<std::size_t> idx(v.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < idx.size();) {
            std::size_t j = i;
            while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace aows
