#include "aows/greedy.hpp"

#include <map>

#include "aows/error.hpp"

namespace aows {

GreedyResult greedy_trim(const ProxyEvaluator& proxy, const LatencyTable& table, double target_ms,
                         const SearchSpace& space) {
    if (!(target_ms > 0.0)) throw ValidationError("target latency must be positive");
    if (table.boundary_choices() != space.all_choices())
        throw ValidationError("greedy: latency table does not match the search space");
    const double fastest = predict(table, space.min_config());
    if (fastest > target_ms) throw TargetUnreachableError(target_ms, fastest);

    GreedyResult out;
    std::map<ChannelConfig, double> memo;
    auto evaluate = [&](const ChannelConfig& c, std::size_t& spent) {
        auto it = memo.find(c);
        if (it != memo.end()) return it->second;
        const double e = proxy(c);
        ++out.proxy_calls;
        ++spent;
        memo.emplace(c, e);
        return e;
    };

    ChoicePath path = space.path_of(space.max_config());
    ChannelConfig config = space.config_of(path);
    double latency = predict(table, path);
    out.trajectory.push_back({config, std::nullopt, std::nullopt, latency, 0});

    while (latency > target_ms) {
        std::optional<std::size_t> best_b;
        double best_err = 0.0;
        std::size_t spent = 0;
        for (std::size_t b = 1; b + 1 < space.num_boundaries(); ++b) {
            if (path[b] == 0) continue;
            ChoicePath cand = path;
            --cand[b];
            const double err = evaluate(space.config_of(cand), spent);
            if (!best_b || err < best_err) {
                best_b = b;
                best_err = err;
            }
        }
        // min config is feasible, so some boundary is still trimmable here
        --path[*best_b];
        config = space.config_of(path);
        latency = predict(table, path);
        out.trajectory.push_back({config, best_b, best_err, latency, spent});
    }
    out.config = config;
    return out;
}

}  // namespace aows
