// One line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "aows/io.hpp"
#include "aows/simproxy.hpp"
#include "fixtures.hpp"

using namespace aows;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s [%d] %s : %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ChoicePath uniform_path(const SearchSpace& s, Rng& rng) {
    ChoicePath p(s.num_boundaries());
    for (std::size_t b = 0; b < p.size(); ++b)
        p[b] = std::uniform_int_distribution<std::size_t>(0, s.choices(b).size() - 1)(rng);
    return p;
}

SearchSpace random_chain(Rng& rng, std::size_t max_layers, std::size_t max_choices) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_layers)(rng);
    return fixtures::random_space(rng, n, max_choices);
}

Outcome viterbi_exactness() {
    Rng rng(1001);
    const auto t0 = std::chrono::steady_clock::now();
    int energy_bad = 0, path_bad = 0, unique = 0;
    for (int t = 0; t < 1000; ++t) {
        const SearchSpace s = random_chain(rng, 6, 5);
        const ChainEnergy e(fixtures::random_unaries(s, rng), fixtures::random_table(s, rng),
                            std::uniform_real_distribution<double>(0.0, 3.0)(rng));
        const auto brute = fixtures::brute_decode(e, s, 1e-9);
        const Decoded d = decode(e);
        energy_bad += std::abs(d.energy - brute.energy) > 1e-9;
        if (brute.minimizers == 1) {
            ++unique;
            path_bad += d.path != brute.path;
        }
    }
    const double secs = elapsed_since(t0);
    return {energy_bad == 0 && path_bad == 0 && secs < 10.0,
            "1000 chains, energy mismatches " + std::to_string(energy_bad) + ", path mismatches " +
                std::to_string(path_bad) + "/" + std::to_string(unique) + " unique, " + fmt("%.2fs", secs)};
}

Outcome dual_behavior() {
    Rng rng(1002);
    int concave_bad = 0, monotone_bad = 0;
    for (int t = 0; t < 100; ++t) {
        const SearchSpace s = random_chain(rng, 6, 5);
        ChainEnergy e(fixtures::random_unaries(s, rng), fixtures::random_table(s, rng), 0.0);
        const double lo = decode(ChainEnergy::pairwise_only(e.pairwise)).energy;
        const double free_lat = [&] {
            e.gamma = 0.0;
            return e.pairwise_sum(decode(e).path);
        }();
        const double target = 0.5 * (lo + free_lat);
        // grid wide enough to reach the fastest decode
        const double top = 2.0 * default_gamma_max(e.unaries, e.pairwise) / 1e6 + 1e-3;
        std::vector<double> g, lat;
        for (int k = 0; k < 50; ++k) {
            e.gamma = top * k / 49.0;
            const Decoded d = decode(e);
            lat.push_back(e.pairwise_sum(d.path));
            g.push_back(e.unary_sum(d.path) + e.gamma * (lat.back() - target));
        }
        for (std::size_t k = 1; k < lat.size(); ++k) monotone_bad += lat[k] > lat[k - 1] + 1e-12;
        for (std::size_t a = 0; a < g.size(); ++a)
            for (std::size_t b = a + 2; b < g.size(); b += 2)
                concave_bad += g[(a + b) / 2] < 0.5 * (g[a] + g[b]) - 1e-9;
    }
    return {concave_bad == 0 && monotone_bad == 0,
            "100 instances x 50-point grid, concavity violations " + std::to_string(concave_bad) +
                ", latency increases " + std::to_string(monotone_bad)};
}

Outcome constrained_optimality() {
    Rng rng(1003);
    const auto t0 = std::chrono::steady_clock::now();
    int infeasible = 0, zero_gap = 0, mismatched = 0;
    for (int t = 0; t < 200; ++t) {
        const SearchSpace s = fixtures::random_space(rng, 5, 4);
        const auto un = fixtures::random_unaries(s, rng);
        const LatencyTable tab = fixtures::random_table(s, rng);
        ChainEnergy e(un, tab, 0.0);
        const double lo = decode(ChainEnergy::pairwise_only(tab)).energy;
        const double hi = e.pairwise_sum(decode(e).path);
        double target;
        if (t % 2 == 0) {
            e.gamma = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
            target = e.pairwise_sum(decode(e).path) + 1e-12;
        } else {
            target = lo + std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (hi - lo) + 1e-12;
        }
        const SearchResult r = lagrangian_search(un, tab, {target, std::nullopt, 1e-9});
        infeasible += predict(tab, r.config) > target;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : fixtures::all_paths(s))
            if (e.pairwise_sum(p) <= target) best = std::min(best, e.unary_sum(p));
        if (r.unary_sum - best_dual_bound(r) <= 1e-9) {
            ++zero_gap;
            mismatched += std::abs(r.unary_sum - best) > 1e-9;
        }
    }
    const double secs = elapsed_since(t0);
    return {infeasible == 0 && mismatched == 0 && secs < 30.0,
            "200 instances, infeasible " + std::to_string(infeasible) + ", zero-gap " +
                std::to_string(zero_gap) + " with " + std::to_string(mismatched) + " mismatches, " +
                fmt("%.2fs", secs)};
}

struct RecoveryCase {
    SearchSpace space;
    LatencyTable truth;
    std::vector<BenchmarkSample> train, validation, test;
};

/// Planned benchmarks over a monotone truth, a noisy validation split for
/// lambda and a noise-free held-out test set.
RecoveryCase recovery_case(double noise, std::uint64_t seed, std::int64_t min_visits) {
    Rng rng(seed);
    SearchSpace s = fixtures::chain_space({{8, 16, 24, 32}, {16, 32, 48, 64, 80}, {32, 64, 96, 128},
                                           {64, 128, 192, 256, 320}, {128, 256}});
    LatencyTable truth = SyntheticDevice::random_monotone_table(s, seed + 1);
    SyntheticDevice dev(truth, noise, seed + 2);
    RecoveryCase rc{s, truth, {}, {}, {}};
    CountTable counts(s);
    while (min_count(counts) < min_visits) {
        const ChannelConfig c = plan_next(counts, s);
        add_counts(counts, s.path_of(c));
        rc.train.push_back(dev.measure(c));
    }
    for (int k = 0; k < 200; ++k) rc.validation.push_back(dev.measure(s.config_of(uniform_path(s, rng))));
    for (int k = 0; k < 500; ++k) {
        const ChannelConfig c = s.config_of(uniform_path(s, rng));
        rc.test.push_back({c, predict(truth, c)});
    }
    return rc;
}

std::vector<double> lambda_grid(const std::vector<BenchmarkSample>& samples) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.latency_ms;
    mean /= static_cast<double>(samples.size());
    std::vector<double> g;
    for (double f : {0.0, 1e-3, 1e-2, 1e-1, 1.0}) g.push_back(f * mean);
    return g;
}

double max_relative_error(const LatencyTable& t, const std::vector<BenchmarkSample>& ref) {
    double m = 0.0;
    for (const auto& r : ref) m = std::max(m, std::abs(predict(t, r.config) - r.latency_ms) / r.latency_ms);
    return m;
}

constexpr std::int64_t kMinVisits = 5;

Outcome latency_recovery() {
    const RecoveryCase clean = recovery_case(0.0, 2001, kMinVisits);
    FitOptions tight;
    tight.tol = 1e-10;
    const LatencyTable exact = fit(assemble(clean.train, clean.space), tight);
    const double exact_err = max_relative_error(exact, clean.test);

    const RecoveryCase noisy = recovery_case(0.01, 2002, kMinVisits);
    const LinearSystem sys = assemble(noisy.train, noisy.space);
    const LambdaSelection sel = tune_lambda(sys, noisy.validation, lambda_grid(noisy.train), FitOptions{});
    const double rmse = relative_rmse(sel.fit.table, noisy.test);
    return {exact_err <= 1e-6 && rmse <= 0.03,
            std::to_string(noisy.train.size()) + " planned samples (min count " + std::to_string(kMinVisits) +
                "), noiseless max rel err " + fmt("%.2e", exact_err) + ", 1% noise held-out rel RMSE " +
                fmt("%.4f", rmse) + " at lambda " + fmt("%.3g", sel.lambda)};
}

Outcome monotonicity_prior() {
    const RecoveryCase noisy = recovery_case(0.01, 2002, kMinVisits);
    const LinearSystem sys = assemble(noisy.train, noisy.space);
    const LambdaSelection sel = tune_lambda(sys, noisy.validation, lambda_grid(noisy.train), FitOptions{});
    double l1 = 0.0;
    for (double v : sel.fit.table.values()) l1 += std::abs(v);
    const double hinge = sel.fit.report.hinge_mass;
    return {hinge <= 1e-6 * l1, "selected lambda " + fmt("%.3g", sel.lambda) + ", hinge mass " +
                                    fmt("%.3e", hinge) + " vs bound " + fmt("%.3e", 1e-6 * l1)};
}

Outcome smoothed_exactness() {
    Rng rng(1006);
    double worst = 0.0;
    int chains = 0;
    for (int t = 0; t < 300; ++t) {
        const SearchSpace s = fixtures::random_space(rng, 5, 5);
        double interior = 1.0;
        for (std::size_t b = 1; b + 1 < s.num_boundaries(); ++b) interior *= s.choices(b).size();
        if (interior > 200) continue;
        ++chains;
        const ChainEnergy e(fixtures::random_unaries(s, rng, 2.0), fixtures::random_table(s, rng, 0.0, 2.0),
                            std::uniform_real_distribution<double>(0.2, 2.0)(rng));
        const auto ref = fixtures::gibbs_marginals(e, s);
        const MarginalSet m = forward_backward(e, 1.0);
        for (std::size_t b = 0; b < s.num_boundaries(); ++b) {
            const auto p = m.probabilities(b);
            for (std::size_t k = 0; k < p.size(); ++k) worst = std::max(worst, std::abs(p[k] - ref[b][k]));
        }
    }
    int instances = 0, argmax_bad = 0, mass_bad = 0;
    while (instances < 1000) {
        const SearchSpace s = random_chain(rng, 6, 5);
        const ChainEnergy e(fixtures::random_unaries(s, rng), fixtures::random_table(s, rng),
                            std::uniform_real_distribution<double>(0.0, 3.0)(rng));
        if (fixtures::brute_decode(e, s, 1e-4).minimizers != 1) continue;
        ++instances;
        const Decoded d = decode(e);
        const MarginalSet m = forward_backward(e, 1e-6);
        for (std::size_t b = 0; b < s.num_boundaries(); ++b) {
            const auto p = m.probabilities(b);
            argmax_bad += static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) != d.path[b];
            mass_bad += m.max_probability(b) < 1.0 - 1e-6;
        }
    }
    return {worst <= 1e-9 && argmax_bad == 0 && mass_bad == 0,
            std::to_string(chains) + " chains at T=1, max |p - p_enum| " + fmt("%.2e", worst) +
                "; 1000 unique-optimum chains at T=1e-6, argmax mismatches " + std::to_string(argmax_bad)};
}

Outcome annealing() {
    const AnnealSchedule s = AnnealSchedule::standard();
    const bool knots = temperature_at(s, 5) == 1.0 && temperature_at(s, 6) == 1e-2 &&
                       temperature_at(s, 10) == 1e-3 && temperature_at(s, 20) == 5e-4;
    const double t8 = temperature_at(s, 8);
    return {knots && std::abs(t8 - 3.1623e-3) <= 1e-7,
            std::string("knots ") + (knots ? "exact" : "wrong") + ", T(8) = " + fmt("%.7e", t8)};
}

struct RankCheck {
    double worst = 1.0;
    int layers = 0;
    int below = 0;
};

RankCheck delta_ranks(std::int64_t min_visits) {
    RankCheck rc;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(3000 + seed);
        const SearchSpace s = fixtures::random_space(rng, 6, 5);
        SyntheticLoss loss = SyntheticLoss::random(s, {1.0, 0.0, 0.05}, 3100 + seed);
        ErrorStats st(s);
        auto visits_ok = [&] {
            for (std::size_t b = 1; b + 1 < s.num_boundaries(); ++b)
                for (std::size_t c = 0; c < s.choices(b).size(); ++c)
                    if (st.current(b, c).count < min_visits) return false;
            return true;
        };
        while (!visits_ok()) {
            const ChannelConfig c = s.config_of(uniform_path(s, rng));
            const auto [l, m] = loss.observe(c);
            st.record(c, l, m);
        }
        st.finalize_epoch();
        for (std::size_t b = 1; b + 1 < s.num_boundaries(); ++b) {
            if (s.choices(b).size() < 2) continue;
            std::vector<double> d;
            for (std::size_t c = 0; c < s.choices(b).size(); ++c) d.push_back(*st.delta(b, c));
            const double r = spearman(d, loss.quality()[b]);
            rc.worst = std::min(rc.worst, r);
            rc.below += r < 0.9;
            ++rc.layers;
        }
    }
    return rc;
}

Outcome delta_estimation() {
    const RankCheck at50 = delta_ranks(50);
    const RankCheck at1000 = delta_ranks(1000);
    return {at50.below == 0,
            "20 seeds, " + std::to_string(at50.layers) + " layers at 50 visits: min Spearman " +
                fmt("%.4f", at50.worst) + ", " + std::to_string(at50.below) + " below 0.9; at 1000 visits: min " +
                fmt("%.4f", at1000.worst) + ", " + std::to_string(at1000.below) + " below"};
}

AowsRunConfig aows_run(double target, std::uint64_t seed) {
    AowsRunConfig r;
    r.warmup_epochs = 5;
    r.total_epochs = 20;
    r.samples_per_epoch = 512;
    r.batch_size = 64;
    r.target_ms = target;
    r.seed = seed;
    return r;
}

Outcome ows_beats_greedy() {
    const auto trap = fixtures::trap_fixture();
    int trap_wins = 0;
    const int trap_seeds = 20;
    for (int seed = 0; seed < trap_seeds; ++seed) {
        SyntheticLoss loss(trap.space, trap.quality, PairTable<double>(trap.space), 0.05, 4000 + seed);
        const AowsResult r = run_aows(aows_run(trap.target_ms, seed), loss, trap.table, trap.space);
        const GreedyResult g = greedy_trim([&](const ChannelConfig& c) { return loss.expected_gap(c); },
                                           trap.table, trap.target_ms, trap.space);
        trap_wins += loss.expected_gap(r.result.config) < loss.expected_gap(g.config);
    }
    int random_wins = 0;
    const int random_instances = 50;
    for (int seed = 0; seed < random_instances; ++seed) {
        Rng rng(5000 + seed);
        const SearchSpace s = fixtures::random_space(rng, 6, 5);
        const LatencyTable t = SyntheticDevice::random_monotone_table(s, 5100 + seed);
        SyntheticLoss loss = SyntheticLoss::random(s, {1.0, 0.5, 0.05}, 5200 + seed);
        const double lo = predict(t, s.min_config());
        const double hi = predict(t, s.max_config());
        const double target = lo + std::uniform_real_distribution<double>(0.2, 0.8)(rng) * (hi - lo);
        const AowsResult r = run_aows(aows_run(target, seed), loss, t, s);
        const GreedyResult g = greedy_trim([&](const ChannelConfig& c) { return loss.expected_gap(c); }, t,
                                           target, s);
        random_wins += loss.expected_gap(r.result.config) <= loss.expected_gap(g.config) + 1e-12;
    }
    return {trap_wins == trap_seeds && random_wins >= 0.8 * random_instances,
            "trap strictly better " + std::to_string(trap_wins) + "/" + std::to_string(trap_seeds) +
                ", random coupled <= greedy " + std::to_string(random_wins) + "/" +
                std::to_string(random_instances)};
}

Outcome flops_anchor() {
    const SearchSpace s = io::load_space(AOWS_DATA_DIR "/mobilenetv1.json");
    const std::vector<int> original = {32, 64, 128, 128, 256, 256, 512, 512, 512, 512, 512, 512, 1024, 1024};
    const double mf = flops(s.from_interior(original), s) / 1e6;
    const LatencyTable t = flops_table(s);
    Rng rng(1010);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
        const ChannelConfig c = s.config_of(uniform_path(s, rng));
        mismatches += predict(t, c) != flops(c, s);
    }
    return {std::abs(mf / 572.0 - 1.0) <= 0.02 && mismatches == 0,
            fmt("original config %.2f MFLOPs", mf) + fmt(" (%+.2f%% vs 572)", 100.0 * (mf / 572.0 - 1.0)) +
                ", table mismatches " + std::to_string(mismatches) + "/1000"};
}

Outcome benchmark_planner() {
    const SearchSpace s = io::load_space(AOWS_DATA_DIR "/mobilenetv1.json");
    CountTable counts(s);
    std::size_t largest = 0;
    for (std::size_t i = 0; i < counts.num_layers(); ++i) largest = std::max(largest, counts.rows(i) * counts.cols(i));
    const std::size_t budget = 20 * largest;
    std::size_t calls = 0;
    bool monotone = true;
    std::int64_t prev = min_count(counts);
    while (min_count(counts) < 1 && calls < budget) {
        add_counts(counts, s.path_of(plan_next(counts, s)));
        ++calls;
        monotone = monotone && min_count(counts) >= prev;
        prev = min_count(counts);
    }
    return {min_count(counts) >= 1 && monotone,
            "full coverage of " + std::to_string(counts.size()) + " entries after " + std::to_string(calls) +
                " calls (budget " + std::to_string(budget) + ")"};
}

}  // namespace

int main() {
    report(1, "Viterbi exactness", viterbi_exactness);
    report(2, "Dual concavity and latency monotonicity", dual_behavior);
    report(3, "Constrained optimality of the Lagrangian search", constrained_optimality);
    report(4, "Latency-model recovery", latency_recovery);
    report(5, "Monotonicity prior at the selected lambda", monotonicity_prior);
    report(6, "Smoothed-DP exactness", smoothed_exactness);
    report(7, "Annealing schedule", annealing);
    report(8, "Delta estimation ranks quality curves", delta_estimation);
    report(9, "OWS/AOWS beats greedy on traps", ows_beats_greedy);
    report(10, "FLOPs anchor and pairwise decomposition", flops_anchor);
    report(11, "Benchmark planner coverage", benchmark_planner);
    std::printf("%d/11 criteria passed\n", 11 - failures);
    return failures == 0 ? 0 : 1;
}
