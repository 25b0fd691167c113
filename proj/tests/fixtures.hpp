#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "aows/latmodel.hpp"
#include "aows/ows.hpp"
#include "aows/rng.hpp"
#include "aows/searchspace.hpp"

namespace fixtures {

using namespace aows;

/// Chain with the given interior choice sets; every layer a 1x1 full conv.
inline SearchSpace chain_space(std::vector<std::vector<int>> interior, int in = 3, int out = 10) {
    std::vector<LayerParams> layers(interior.size() + 1);
    return SearchSpace(in, out, layers, std::move(interior));
}

/// n layers, each interior set of 1..max_choices strictly increasing counts.
inline SearchSpace random_space(Rng& rng, std::size_t layers, std::size_t max_choices) {
    std::uniform_int_distribution<std::size_t> size(1, max_choices);
    std::uniform_int_distribution<int> step(1, 8);
    std::vector<std::vector<int>> interior;
    for (std::size_t b = 1; b < layers; ++b) {
        std::vector<int> c;
        int v = 0;
        for (std::size_t k = size(rng); k > 0; --k) c.push_back(v += step(rng));
        interior.push_back(c);
    }
    return chain_space(interior);
}

inline std::vector<std::vector<double>> random_unaries(const SearchSpace& s, Rng& rng,
                                                       double scale = 1.0) {
    std::uniform_real_distribution<double> u(0.0, scale);
    std::vector<std::vector<double>> un;
    for (std::size_t b = 0; b < s.num_boundaries(); ++b) {
        const bool edge = b == 0 || b + 1 == s.num_boundaries();
        std::vector<double> v(s.choices(b).size(), 0.0);
        if (!edge)
            for (auto& x : v) x = u(rng);
        un.push_back(v);
    }
    return un;
}

inline LatencyTable random_table(const SearchSpace& s, Rng& rng, double lo = 0.1, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    LatencyTable t(s);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

/// Every path of the space, lexicographic.
inline std::vector<ChoicePath> all_paths(const SearchSpace& s) {
    std::vector<ChoicePath> out;
    for_each_config(s, 10'000'000, [&](const ChoicePath& p) { out.push_back(p); });
    return out;
}

struct Brute {
    ChoicePath path;
    double energy = std::numeric_limits<double>::infinity();
    std::size_t minimizers = 0;
};

inline Brute brute_decode(const ChainEnergy& e, const SearchSpace& s, double eps = 1e-12) {
    Brute best;
    std::vector<double> energies;
    const auto paths = all_paths(s);
    for (const auto& p : paths) {
        const double v = e.evaluate(p);
        energies.push_back(v);
        if (v < best.energy) {
            best.energy = v;
            best.path = p;
        }
    }
    for (double v : energies)
        if (v <= best.energy + eps) ++best.minimizers;
    return best;
}

/// Exact CRF marginals p(c) ∝ exp(-E(c)/T) by enumeration.
inline std::vector<std::vector<double>> gibbs_marginals(const ChainEnergy& e, const SearchSpace& s,
                                                        double T = 1.0) {
    const auto paths = all_paths(s);
    std::vector<double> w;
    double emin = std::numeric_limits<double>::infinity();
    for (const auto& p : paths) emin = std::min(emin, e.evaluate(p));
    double z = 0.0;
    for (const auto& p : paths) {
        w.push_back(std::exp(-(e.evaluate(p) - emin) / T));
        z += w.back();
    }
    std::vector<std::vector<double>> m;
    for (std::size_t b = 0; b < s.num_boundaries(); ++b) m.emplace_back(s.choices(b).size(), 0.0);
    for (std::size_t k = 0; k < paths.size(); ++k)
        for (std::size_t b = 0; b < paths[k].size(); ++b) m[b][paths[k][b]] += w[k] / z;
    return m;
}

}  // namespace fixtures

namespace fixtures {

/// Local-optimum trap: boundary A trims cheaply in error but saves little
/// latency; boundary B costs more error per step but saves ten times as much.
/// Greedy exhausts A before being forced to trim B.
struct Trap {
    SearchSpace space;
    LatencyTable table;
    std::vector<std::vector<double>> quality;
    double target_ms;
};

inline Trap trap_fixture() {
    SearchSpace s = chain_space({{8, 16, 24}, {16, 32}});
    LatencyTable t(s);
    for (std::size_t a = 0; a < 3; ++a) t.at(0, 0, a) = 0.5 + 0.1 * static_cast<double>(a);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 2; ++b) t.at(1, a, b) = 0.2 + 1.0 * static_cast<double>(b);
    for (std::size_t b = 0; b < 2; ++b) t.at(2, b, 0) = 0.3;
    std::vector<std::vector<double>> q = {{0.0}, {0.10, 0.04, 0.0}, {0.08, 0.0}, {0.0}};
    const double target = predict(t, s.max_config()) - 1.0 + 1e-9;
    return {std::move(s), std::move(t), std::move(q), target};
}

inline double unary_objective(const std::vector<std::vector<double>>& q, const ChoicePath& p) {
    double u = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) u += q[b][p[b]];
    return u;
}

}  // namespace fixtures
