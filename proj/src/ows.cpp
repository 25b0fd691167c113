#include "aows/ows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aows/error.hpp"

namespace aows {

ErrorStats::ErrorStats(const SearchSpace& space) : choices_(space.all_choices()) {
    for (const auto& set : choices_) {
        current_.emplace_back(set.size());
        served_.emplace_back(set.size());
        delta_.emplace_back(set.size());
    }
}

void ErrorStats::record(const ChannelConfig& config, double loss, double max_loss) {
    if (config.channels.size() != choices_.size())
        throw ValidationError("record: config length does not match the stats shape");
    ChoicePath path(choices_.size());
    for (std::size_t b = 0; b < choices_.size(); ++b) {
        const auto& set = choices_[b];
        auto it = std::lower_bound(set.begin(), set.end(), config.channels[b]);
        if (it == set.end() || *it != config.channels[b])
            throw ValidationError("record: channel " + std::to_string(config.channels[b]) +
                                  " not a choice of boundary " + std::to_string(b));
        path[b] = static_cast<std::size_t>(it - set.begin());
    }
    if (!std::isfinite(loss) || !std::isfinite(max_loss))
        throw ValidationError("record: losses must be finite");
    record_gap(path, loss - max_loss);
}

void ErrorStats::record_gap(const ChoicePath& path, double gap) {
    for (std::size_t b = 1; b + 1 < choices_.size(); ++b) {
        auto& e = current_[b].at(path[b]);
        e.sum += gap;
        e.count += 1;
    }
}

void ErrorStats::finalize_epoch() {
    for (std::size_t b = 0; b < choices_.size(); ++b) {
        for (std::size_t c = 0; c < choices_[b].size(); ++c) {
            auto& cur = current_[b][c];
            if (cur.count > 0) {
                served_[b][c] = cur;
                delta_[b][c] = cur.sum / static_cast<double>(cur.count);
            }
            cur = Entry{};
        }
    }
    ++epochs_;
}

std::optional<double> ErrorStats::current_mean(std::size_t boundary, std::size_t choice) const {
    const auto& e = current_.at(boundary).at(choice);
    if (e.count == 0) return std::nullopt;
    return e.sum / static_cast<double>(e.count);
}

std::optional<double> ErrorStats::delta(std::size_t boundary, std::size_t choice) const {
    return delta_.at(boundary).at(choice);
}

std::vector<std::vector<double>> ErrorStats::unaries() const {
    std::vector<std::vector<double>> out;
    out.reserve(choices_.size());
    for (std::size_t b = 0; b < choices_.size(); ++b) {
        std::vector<double> row(choices_[b].size(), 0.0);
        if (interior(b))
            for (std::size_t c = 0; c < row.size(); ++c)
                row[c] = delta_[b][c].value_or(std::numeric_limits<double>::quiet_NaN());
        out.push_back(std::move(row));
    }
    return out;
}

void ErrorStats::set_served(std::size_t boundary, std::size_t choice, Entry stats,
                            std::optional<double> delta) {
    served_.at(boundary).at(choice) = stats;
    delta_.at(boundary).at(choice) = delta;
}

ChainEnergy::ChainEnergy(std::vector<std::vector<double>> u, PairTable<double> p, double g)
    : unaries(std::move(u)), pairwise(std::move(p)), gamma(g) {
    const auto& labels = pairwise.boundary_choices();
    if (labels.size() != unaries.size())
        throw ValidationError("chain energy: unary and pairwise shapes disagree");
    for (std::size_t b = 0; b < unaries.size(); ++b)
        if (unaries[b].size() != labels[b].size())
            throw ValidationError("chain energy: unary size mismatch at boundary " +
                                  std::to_string(b));
}

ChainEnergy ChainEnergy::from_stats(const ErrorStats& stats, const LatencyTable& table,
                                    double gamma) {
    return ChainEnergy(stats.unaries(), table, gamma);
}

ChainEnergy ChainEnergy::pairwise_only(const PairTable<double>& table) {
    std::vector<std::vector<double>> zeros;
    for (const auto& set : table.boundary_choices()) zeros.emplace_back(set.size(), 0.0);
    return ChainEnergy(std::move(zeros), table, 1.0);
}

void ChainEnergy::require_defined() const {
    for (std::size_t b = 0; b < unaries.size(); ++b)
        for (std::size_t c = 0; c < unaries[b].size(); ++c)
            if (std::isnan(unaries[b][c])) throw UndefinedUnaryError(b, label(b, c));
}

double ChainEnergy::unary_sum(const ChoicePath& path) const {
    double s = 0.0;
    for (std::size_t b = 0; b < unaries.size(); ++b) s += unaries[b].at(path[b]);
    return s;
}

double ChainEnergy::pairwise_sum(const ChoicePath& path) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pairwise.num_layers(); ++i)
        s += pairwise.at(i, path[i], path[i + 1]);
    return s;
}

double ChainEnergy::evaluate(const ChoicePath& path) const {
    return unary_sum(path) + gamma * pairwise_sum(path);
}

Decoded decode(const ChainEnergy& energy) {
    energy.require_defined();
    const std::size_t nb = energy.num_boundaries();
    if (nb == 0) return {};

    // cost_to_go[b][c]: min energy of boundaries b..n given c_b = c
    std::vector<std::vector<double>> cost_to_go(nb);
    cost_to_go[nb - 1] = energy.unaries[nb - 1];
    for (std::size_t b = nb - 1; b-- > 0;) {
        const auto& next = cost_to_go[b + 1];
        auto& cur = cost_to_go[b];
        cur.resize(energy.num_choices(b));
        for (std::size_t c = 0; c < cur.size(); ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t d = 0; d < next.size(); ++d)
                best = std::min(best, energy.gamma * energy.pairwise.at(b, c, d) + next[d]);
            cur[c] = energy.unaries[b][c] + best;
        }
    }

    // Forward trace-back taking the first index attaining each minimum.
    ChoicePath path(nb);
    const auto& first = cost_to_go[0];
    path[0] = static_cast<std::size_t>(std::min_element(first.begin(), first.end()) - first.begin());
    for (std::size_t b = 0; b + 1 < nb; ++b) {
        const auto& next = cost_to_go[b + 1];
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t d = 0; d < next.size(); ++d) {
            const double v = energy.gamma * energy.pairwise.at(b, path[b], d) + next[d];
            if (v < best) {
                best = v;
                arg = d;
            }
        }
        path[b + 1] = arg;
    }
    return {path, energy.evaluate(path)};
}

double default_gamma_max(const std::vector<std::vector<double>>& unaries,
                         const PairTable<double>& table) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t b = 1; b + 1 < unaries.size(); ++b)
        for (double v : unaries[b])
            if (!std::isnan(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    double min_pos = std::numeric_limits<double>::infinity();
    for (double v : table.values())
        if (v > 0.0) min_pos = std::min(min_pos, v);
    if (!std::isfinite(min_pos)) min_pos = 1.0;
    double range = std::isfinite(lo) ? hi - lo : 0.0;
    if (range <= 0.0) range = 1.0;
    return 1e6 * range / min_pos;
}

SearchResult lagrangian_search(const std::vector<std::vector<double>>& unaries,
                               const LatencyTable& table, const SearchOptions& opts) {
    if (!(opts.target_ms > 0.0)) throw ValidationError("target latency must be positive");
    if (!(opts.tol > 0.0)) throw ValidationError("search tolerance must be positive");
    const double gamma_max = opts.gamma_max.value_or(default_gamma_max(unaries, table));
    if (!(gamma_max > 0.0)) throw ValidationError("gamma_max must be positive");

    ChainEnergy energy(unaries, table, 0.0);
    energy.require_defined();

    SearchResult result;
    result.target_ms = opts.target_ms;
    std::optional<Decoded> best;
    double best_gamma = 0.0;
    double best_unary = std::numeric_limits<double>::infinity();

    // Decodes at gamma and returns whether the decode meets the target.
    auto probe = [&](double gamma) {
        energy.gamma = gamma;
        Decoded d = decode(energy);
        DualPoint pt{gamma, energy.pairwise_sum(d.path), energy.unary_sum(d.path)};
        result.dual_trace.push_back(pt);
        const bool feasible = pt.latency_ms <= opts.target_ms;
        if (feasible && pt.unary_sum < best_unary) {
            best_unary = pt.unary_sum;
            best_gamma = gamma;
            best = std::move(d);
        }
        return feasible;
    };

    if (!probe(0.0)) {
        if (!probe(gamma_max)) {
            const Decoded fastest = decode(ChainEnergy::pairwise_only(table));
            throw TargetUnreachableError(opts.target_ms, predict(table, fastest.path));
        }
        double lo = 0.0;
        double hi = gamma_max;
        while (hi - lo >= opts.tol) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (probe(mid))
                hi = mid;
            else
                lo = mid;
        }
    }

    const ChoicePath& path = best->path;
    std::vector<int> channels;
    for (std::size_t b = 0; b < path.size(); ++b) channels.push_back(energy.label(b, path[b]));
    result.config = ChannelConfig{std::move(channels)};
    result.gamma = best_gamma;
    result.unary_sum = best_unary;
    result.modeled_latency_ms = predict(table, path);
    result.energy = result.unary_sum + best_gamma * result.modeled_latency_ms;
    return result;
}

SearchResult lagrangian_search(const ErrorStats& stats, const LatencyTable& table,
                               const SearchOptions& opts) {
    return lagrangian_search(stats.unaries(), table, opts);
}

double dual_value(const DualPoint& p, double target_ms) {
    return p.unary_sum + p.gamma * (p.latency_ms - target_ms);
}

double best_dual_bound(const SearchResult& result) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : result.dual_trace) best = std::max(best, dual_value(p, result.target_ms));
    return best;
}

}  // namespace aows
