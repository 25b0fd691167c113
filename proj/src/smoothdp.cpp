#include "aows/smoothdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aows/error.hpp"

namespace aows {
namespace {

/// -T log sum_k exp(-v_k / T), shifted by the minimum for stability.
double soft_min(const std::vector<double>& v, double temperature) {
    const double m = *std::min_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(-(x - m) / temperature);
    return m - temperature * std::log(s);
}

std::vector<double> normalized_log(const std::vector<double>& scores, double temperature) {
    // log p_k = -s_k/T - log sum exp(-s/T)
    const double m = *std::min_element(scores.begin(), scores.end());
    double s = 0.0;
    for (double x : scores) s += std::exp(-(x - m) / temperature);
    const double log_z = std::log(s);
    std::vector<double> out(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) out[k] = -(scores[k] - m) / temperature - log_z;
    return out;
}

std::size_t draw(const std::vector<double>& log_probs, Rng& rng) {
    std::vector<double> w(log_probs.size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(log_probs[k]);
    std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
    return dist(rng);
}

}  // namespace

std::vector<double> MarginalSet::probabilities(std::size_t boundary) const {
    const auto& lp = log_probs.at(boundary);
    std::vector<double> p(lp.size());
    for (std::size_t k = 0; k < lp.size(); ++k) p[k] = std::exp(lp[k]);
    return p;
}

double MarginalSet::max_probability(std::size_t boundary) const {
    const auto& lp = log_probs.at(boundary);
    return std::exp(*std::max_element(lp.begin(), lp.end()));
}

double MarginalSet::entropy(std::size_t boundary) const {
    double h = 0.0;
    for (double l : log_probs.at(boundary)) {
        const double p = std::exp(l);
        if (p > 0.0) h -= p * l;
    }
    return h;
}

SmoothedChain smooth_chain(const ChainEnergy& energy, double temperature) {
    if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
    energy.require_defined();
    const std::size_t nb = energy.num_boundaries();
    SmoothedChain out;
    if (nb == 0) return out;
    const auto& u = energy.unaries;
    const double g = energy.gamma;

    out.forward.resize(nb);
    out.backward.resize(nb);
    out.forward[0].assign(u[0].size(), 0.0);
    std::vector<double> terms;
    for (std::size_t b = 0; b + 1 < nb; ++b) {
        const auto& prev = out.forward[b];
        auto& next = out.forward[b + 1];
        next.resize(u[b + 1].size());
        terms.resize(u[b].size());
        for (std::size_t d = 0; d < next.size(); ++d) {
            for (std::size_t c = 0; c < terms.size(); ++c)
                terms[c] = prev[c] + u[b][c] + g * energy.pairwise.at(b, c, d);
            next[d] = soft_min(terms, temperature);
        }
    }
    out.backward[nb - 1].assign(u[nb - 1].size(), 0.0);
    for (std::size_t b = nb - 1; b-- > 0;) {
        const auto& after = out.backward[b + 1];
        auto& cur = out.backward[b];
        cur.resize(u[b].size());
        terms.resize(u[b + 1].size());
        for (std::size_t c = 0; c < cur.size(); ++c) {
            for (std::size_t d = 0; d < terms.size(); ++d)
                terms[d] = g * energy.pairwise.at(b, c, d) + u[b + 1][d] + after[d];
            cur[c] = soft_min(terms, temperature);
        }
    }

    out.marginals.log_probs.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        std::vector<double> scores(u[b].size());
        for (std::size_t c = 0; c < scores.size(); ++c)
            scores[c] = out.forward[b][c] + u[b][c] + out.backward[b][c];
        out.marginals.log_probs[b] = normalized_log(scores, temperature);
    }
    std::vector<double> root(u[0].size());
    for (std::size_t c = 0; c < root.size(); ++c) root[c] = u[0][c] + out.backward[0][c];
    out.log_partition = -soft_min(root, temperature) / temperature;
    return out;
}

MarginalSet forward_backward(const ChainEnergy& energy, double temperature) {
    return smooth_chain(energy, temperature).marginals;
}

ChoicePath sample(const MarginalSet& marginals, Rng& rng) {
    ChoicePath path(marginals.num_boundaries());
    for (std::size_t b = 0; b < path.size(); ++b) path[b] = draw(marginals.log_probs[b], rng);
    return path;
}

ChoicePath sample_joint(const ChainEnergy& energy, const SmoothedChain& chain, double temperature,
                        Rng& rng) {
    const std::size_t nb = energy.num_boundaries();
    ChoicePath path(nb);
    if (nb == 0) return path;
    const auto& u = energy.unaries;
    std::vector<double> scores(u[0].size());
    for (std::size_t c = 0; c < scores.size(); ++c) scores[c] = u[0][c] + chain.backward[0][c];
    path[0] = draw(normalized_log(scores, temperature), rng);
    for (std::size_t b = 0; b + 1 < nb; ++b) {
        scores.resize(u[b + 1].size());
        for (std::size_t d = 0; d < scores.size(); ++d)
            scores[d] = energy.gamma * energy.pairwise.at(b, path[b], d) + u[b + 1][d] +
                        chain.backward[b + 1][d];
        path[b + 1] = draw(normalized_log(scores, temperature), rng);
    }
    return path;
}

AnnealSchedule::AnnealSchedule(std::vector<Knot> knots) : knots_(std::move(knots)) {
    if (knots_.empty()) throw ValidationError("schedule needs at least one knot");
    for (std::size_t k = 0; k < knots_.size(); ++k) {
        if (!(knots_[k].temperature > 0.0) || !std::isfinite(knots_[k].temperature))
            throw ValidationError("schedule temperatures must be positive");
        if (!std::isfinite(knots_[k].epoch)) throw ValidationError("schedule epochs must be finite");
        if (k > 0 && !(knots_[k].epoch > knots_[k - 1].epoch))
            throw ValidationError("schedule epochs must be strictly increasing");
    }
}

AnnealSchedule AnnealSchedule::standard() {
    return AnnealSchedule({{5.0, 1.0}, {6.0, 1e-2}, {10.0, 1e-3}, {20.0, 5e-4}});
}

AnnealSchedule AnnealSchedule::shifted(double offset) const {
    std::vector<Knot> k = knots_;
    for (auto& knot : k) knot.epoch += offset;
    return AnnealSchedule(std::move(k));
}

double temperature_at(const AnnealSchedule& schedule, double epoch) {
    const auto& k = schedule.knots();
    if (std::isnan(epoch) || epoch < k.front().epoch)
        throw ValidationError("epoch " + std::to_string(epoch) + " precedes the schedule start " +
                              std::to_string(k.front().epoch));
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
        if (epoch < k[i + 1].epoch) {
            const double frac = (epoch - k[i].epoch) / (k[i + 1].epoch - k[i].epoch);
            return k[i].temperature * std::pow(k[i + 1].temperature / k[i].temperature, frac);
        }
    }
    return k.back().temperature;
}

}  // namespace aows
