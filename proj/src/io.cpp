#include "aows/io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aows/error.hpp"

namespace aows::io {
namespace {

template <class T>
T field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing field '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

template <class T>
T field_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    return field<T>(obj, key, where);
}

std::size_t layer_find(const std::vector<int>& set, int v, const std::string& where) {
    for (std::size_t k = 0; k < set.size(); ++k)
        if (set[k] == v) return k;
    throw ValidationError(where + ": channel " + std::to_string(v) + " is not a valid choice");
}

/// {"layers":[{"layer":i,"entries":[{"c_in":..,"c_out":..,<key>:..}]}]}
template <class T, class Get>
json pair_table_json(const PairTable<T>& t, const std::string& key, Get get) {
    json layers = json::array();
    for (std::size_t i = 0; i < t.num_layers(); ++i) {
        json entries = json::array();
        for (std::size_t r = 0; r < t.rows(i); ++r)
            for (std::size_t c = 0; c < t.cols(i); ++c) {
                json e = {{"c_in", t.inputs(i)[r]}, {"c_out", t.outputs(i)[c]}};
                get(e, key, t.flat_index(i, r, c));
                entries.push_back(std::move(e));
            }
        layers.push_back({{"layer", i}, {"entries", std::move(entries)}});
    }
    return layers;
}

template <class T, class Set>
void pair_table_read(PairTable<T>& t, const json& doc, const std::string& what, Set set) {
    const auto layers = field<json>(doc, "layers", what);
    if (!layers.is_array() || layers.size() != t.num_layers())
        throw ValidationError(what + ".layers: expected " + std::to_string(t.num_layers()) +
                              " layers");
    std::vector<unsigned char> seen(t.size(), 0);
    for (std::size_t n = 0; n < layers.size(); ++n) {
        const std::string where = what + ".layers[" + std::to_string(n) + "]";
        const auto i = field<std::size_t>(layers[n], "layer", where);
        if (i >= t.num_layers()) throw ValidationError(where + ": layer index out of range");
        const auto entries = field<json>(layers[n], "entries", where);
        if (!entries.is_array()) throw ValidationError(where + ".entries: expected an array");
        for (std::size_t m = 0; m < entries.size(); ++m) {
            const std::string ew = where + ".entries[" + std::to_string(m) + "]";
            const std::size_t r = layer_find(t.inputs(i), field<int>(entries[m], "c_in", ew), ew);
            const std::size_t c = layer_find(t.outputs(i), field<int>(entries[m], "c_out", ew), ew);
            const std::size_t k = t.flat_index(i, r, c);
            if (seen[k]) throw ValidationError(ew + ": duplicate entry");
            seen[k] = 1;
            set(entries[m], k, ew);
        }
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k]) throw ValidationError(what + ": table is missing entries");
}

json config_json(const ChannelConfig& c) { return c.channels; }

}  // namespace

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

json to_json(const SearchSpace& space) {
    json layers = json::array();
    for (std::size_t i = 0; i < space.num_layers(); ++i) {
        const auto& p = space.layer(i);
        layers.push_back({{"height", p.height},
                          {"width", p.width},
                          {"stride", p.stride},
                          {"kernel", p.kernel},
                          {"kind", to_string(p.kind)},
                          {"choices", space.choices(i + 1)}});
    }
    return {{"input_channels", space.input_channels()},
            {"output_channels", space.output_channels()},
            {"layers", std::move(layers)}};
}

SearchSpace space_from_json(const json& doc) {
    const int in = field<int>(doc, "input_channels", "space");
    const int out = field<int>(doc, "output_channels", "space");
    const auto layers = field<json>(doc, "layers", "space");
    if (!layers.is_array() || layers.empty())
        throw ValidationError("space.layers: expected a non-empty array");
    std::vector<LayerParams> params;
    std::vector<std::vector<int>> interior;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = "space.layers[" + std::to_string(i) + "]";
        const auto& l = layers[i];
        LayerParams p;
        p.height = field<int>(l, "height", where);
        p.width = field<int>(l, "width", where);
        p.stride = field_or<int>(l, "stride", 1, where);
        p.kernel = field_or<int>(l, "kernel", 1, where);
        try {
            p.kind = layer_kind_from_string(field_or<std::string>(l, "kind", "full_conv", where));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ".kind: " + e.what());
        }
        params.push_back(p);
        const bool last = i + 1 == layers.size();
        if (!last) {
            interior.push_back(field<std::vector<int>>(l, "choices", where));
        } else if (l.contains("choices")) {
            auto c = field<std::vector<int>>(l, "choices", where);
            if (c != std::vector<int>{out})
                throw ValidationError(where + ".choices: last layer must output [output_channels]");
        }
    }
    try {
        return SearchSpace(in, out, std::move(params), std::move(interior));
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("space: ") + e.what());
    }
}

SearchSpace load_space(const std::filesystem::path& path) {
    try {
        return space_from_json(read_json_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

ChannelConfig config_from_json(const json& value, const SearchSpace& space) {
    std::vector<int> v;
    try {
        v = value.get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    if (v.size() + 2 == space.num_boundaries()) return space.from_interior(v);
    ChannelConfig c{std::move(v)};
    space.path_of(c);
    return c;
}

ChannelConfig parse_interior_config(const std::string& text, const SearchSpace& space) {
    std::vector<int> v;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stoi(tok, &used));
            while (used < tok.size() && std::isspace(static_cast<unsigned char>(tok[used]))) ++used;
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ValidationError("config: '" + tok + "' is not an integer");
        }
    }
    return space.from_interior(v);
}

std::vector<BenchmarkSample> read_samples(std::istream& in, const SearchSpace& space) {
    std::vector<BenchmarkSample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        try {
            const json rec = json::parse(line);
            BenchmarkSample s;
            s.config = config_from_json(field<json>(rec, "config", where), space);
            s.latency_ms = field<double>(rec, "latency_ms", where);
            if (!(s.latency_ms >= 0.0) || !std::isfinite(s.latency_ms))
                throw ValidationError("latency_ms must be finite and >= 0");
            out.push_back(std::move(s));
        } catch (const json::parse_error& e) {
            throw ValidationError(where + ": " + e.what());
        } catch (const ValidationError& e) {
            const std::string msg = e.what();
            throw ValidationError(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
        }
    }
    return out;
}

std::vector<BenchmarkSample> load_samples(const std::filesystem::path& path,
                                          const SearchSpace& space) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    try {
        return read_samples(in, space);
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

std::string samples_to_jsonl(const std::vector<BenchmarkSample>& samples) {
    std::string s;
    for (const auto& smp : samples)
        s += json{{"config", smp.config.channels}, {"latency_ms", smp.latency_ms}}.dump() + "\n";
    return s;
}

json to_json(const LatencyTable& table) {
    json doc;
    doc["layers"] = pair_table_json(table, "latency_ms", [&](json& e, const std::string& key,
                                                             std::size_t k) {
        e[key] = table.values()[k];
        if (!table.fitted(k)) e["unfitted"] = true;
    });
    return doc;
}

LatencyTable table_from_json(const json& doc, const SearchSpace& space) {
    LatencyTable t(space);
    pair_table_read(t, doc, "table", [&](const json& e, std::size_t k, const std::string& w) {
        t.values()[k] = field<double>(e, "latency_ms", w);
        if (!std::isfinite(t.values()[k])) throw ValidationError(w + ": latency must be finite");
        t.set_fitted(k, !field_or<bool>(e, "unfitted", false, w));
    });
    return t;
}

json to_json(const CountTable& counts) {
    json doc;
    doc["layers"] = pair_table_json(counts, "count", [&](json& e, const std::string& key,
                                                         std::size_t k) {
        e[key] = counts.values()[k];
    });
    return doc;
}

CountTable counts_from_json(const json& doc, const SearchSpace& space) {
    CountTable t(space);
    pair_table_read(t, doc, "counts", [&](const json& e, std::size_t k, const std::string& w) {
        t.values()[k] = field<std::int64_t>(e, "count", w);
        if (t.values()[k] < 0) throw ValidationError(w + ": count must be >= 0");
    });
    return t;
}

json to_json(const ErrorStats& stats) {
    json boundaries = json::array();
    for (std::size_t b = 1; b + 1 < stats.num_boundaries(); ++b) {
        json choices = json::array();
        for (std::size_t c = 0; c < stats.choices(b).size(); ++c) {
            const auto& e = stats.served(b, c);
            const auto d = stats.delta(b, c);
            choices.push_back({{"channels", stats.choices(b)[c]},
                               {"sum", e.sum},
                               {"count", e.count},
                               {"delta", d ? json(*d) : json(nullptr)}});
        }
        boundaries.push_back({{"boundary", b}, {"choices", std::move(choices)}});
    }
    return {{"epochs", stats.epochs_finalized()}, {"layers", std::move(boundaries)}};
}

ErrorStats stats_from_json(const json& doc, const SearchSpace& space) {
    ErrorStats stats(space);
    const auto layers = field<json>(doc, "layers", "stats");
    if (!layers.is_array()) throw ValidationError("stats.layers: expected an array");
    for (std::size_t n = 0; n < layers.size(); ++n) {
        const std::string where = "stats.layers[" + std::to_string(n) + "]";
        const auto b = field<std::size_t>(layers[n], "boundary", where);
        if (b == 0 || b + 1 >= space.num_boundaries())
            throw ValidationError(where + ": boundary must be interior");
        const auto choices = field<json>(layers[n], "choices", where);
        if (!choices.is_array()) throw ValidationError(where + ".choices: expected an array");
        for (std::size_t m = 0; m < choices.size(); ++m) {
            const std::string cw = where + ".choices[" + std::to_string(m) + "]";
            const auto& e = choices[m];
            const std::size_t c = layer_find(space.choices(b), field<int>(e, "channels", cw), cw);
            ErrorStats::Entry entry{field_or<double>(e, "sum", 0.0, cw),
                                    field_or<std::int64_t>(e, "count", 0, cw)};
            if (entry.count < 0) throw ValidationError(cw + ": count must be >= 0");
            std::optional<double> delta;
            if (e.contains("delta") && !e["delta"].is_null())
                delta = field<double>(e, "delta", cw);
            else if (entry.count > 0)
                delta = entry.sum / static_cast<double>(entry.count);
            stats.set_served(b, c, entry, delta);
        }
    }
    return stats;
}

json to_json(const SearchResult& r) {
    json trace = json::array();
    for (const auto& p : r.dual_trace)
        trace.push_back({{"gamma", p.gamma},
                         {"latency_ms", p.latency_ms},
                         {"unary_sum", p.unary_sum},
                         {"dual_value", dual_value(p, r.target_ms)}});
    return {{"config", config_json(r.config)},
            {"interior", std::vector<int>(r.config.channels.begin() + 1, r.config.channels.end() - 1)},
            {"gamma", r.gamma},
            {"modeled_latency_ms", r.modeled_latency_ms},
            {"energy", r.energy},
            {"unary_sum", r.unary_sum},
            {"target_ms", r.target_ms},
            {"dual_bound", best_dual_bound(r)},
            {"dual_trace", std::move(trace)}};
}

json to_json(const GreedyResult& r) {
    json steps = json::array();
    for (const auto& s : r.trajectory)
        steps.push_back({{"config", config_json(s.config)},
                         {"trimmed_boundary", s.trimmed_boundary ? json(*s.trimmed_boundary) : json(nullptr)},
                         {"proxy_error", s.proxy_error ? json(*s.proxy_error) : json(nullptr)},
                         {"predicted_latency_ms", s.predicted_latency_ms},
                         {"evaluations", s.evaluations}});
    return {{"config", config_json(r.config)},
            {"proxy_calls", r.proxy_calls},
            {"trajectory", std::move(steps)}};
}

json to_json(const AowsResult& r) {
    json epochs = json::array();
    for (const auto& e : r.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"warmup", e.warmup},
                          {"temperature", e.temperature},
                          {"gamma", e.gamma},
                          {"entropy", e.entropy}});
    json doc = to_json(r.result);
    doc["epochs"] = std::move(epochs);
    doc["stats"] = to_json(r.stats);
    return doc;
}

json to_json(const SimulationReport& r) {
    json methods = json::array();
    for (const auto& m : r.methods)
        methods.push_back({{"method", m.method},
                           {"config", config_json(m.config)},
                           {"true_objective", m.true_objective},
                           {"modeled_latency_ms", m.modeled_latency_ms},
                           {"true_latency_ms", m.true_latency_ms}});
    return {{"benchmark_samples", r.benchmark_samples},
            {"lambda", r.lambda},
            {"validation_rmse", r.validation_rmse},
            {"hinge_mass", r.hinge_mass},
            {"target_ms", r.target_ms},
            {"methods", std::move(methods)}};
}

json to_json(const FitReport& r) {
    return {{"iterations", r.iterations},
            {"objective", r.objective},
            {"residual_norm", r.residual_norm},
            {"hinge_mass", r.hinge_mass},
            {"optimality", r.optimality},
            {"untouched_columns", r.untouched_columns}};
}

AnnealSchedule schedule_from_json(const json& doc) {
    const json knots = doc.is_object() ? field<json>(doc, "knots", "schedule") : doc;
    if (!knots.is_array()) throw ValidationError("schedule: expected a list of knots");
    std::vector<AnnealSchedule::Knot> out;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        const std::string where = "schedule[" + std::to_string(k) + "]";
        out.push_back({field<double>(knots[k], "epoch", where),
                       field<double>(knots[k], "temperature", where)});
    }
    return AnnealSchedule(std::move(out));
}

json to_json(const AnnealSchedule& s) {
    json knots = json::array();
    for (const auto& k : s.knots()) knots.push_back({{"epoch", k.epoch}, {"temperature", k.temperature}});
    return knots;
}

Scenario scenario_from_json(const json& doc) {
    Scenario sc;
    if (!doc.is_object()) throw ValidationError("scenario: expected an object");
    sc.seed = field_or<std::uint64_t>(doc, "seed", sc.seed, "scenario");
    if (doc.contains("device")) {
        const auto& d = doc["device"];
        sc.device_noise = field_or<double>(d, "noise", sc.device_noise, "scenario.device");
        sc.device_total_ms = field_or<double>(d, "total_ms", sc.device_total_ms, "scenario.device");
    }
    if (doc.contains("loss")) {
        const auto& l = doc["loss"];
        const std::string w = "scenario.loss";
        sc.loss.quality_scale = field_or<double>(l, "quality_scale", sc.loss.quality_scale, w);
        sc.loss.coupling = field_or<double>(l, "coupling", sc.loss.coupling, w);
        sc.loss.noise = field_or<double>(l, "noise", sc.loss.noise, w);
        sc.quality = field_or<std::vector<std::vector<double>>>(l, "quality", {}, w);
    }
    if (doc.contains("benchmark")) {
        const auto& b = doc["benchmark"];
        const std::string w = "scenario.benchmark";
        sc.benchmark_min_count = field_or<std::int64_t>(b, "min_count", sc.benchmark_min_count, w);
        sc.validation_samples = field_or<std::size_t>(b, "validation_samples", sc.validation_samples, w);
        sc.lambda_grid = field_or<std::vector<double>>(b, "lambda_grid", sc.lambda_grid, w);
    }
    if (doc.contains("fit")) {
        const auto& f = doc["fit"];
        sc.fit.tol = field_or<double>(f, "tol", sc.fit.tol, "scenario.fit");
        sc.fit.max_iters = field_or<std::size_t>(f, "max_iters", sc.fit.max_iters, "scenario.fit");
    }
    if (doc.contains("target_ms")) sc.target_ms = field<double>(doc, "target_ms", "scenario");
    sc.target_fraction = field_or<double>(doc, "target_fraction", sc.target_fraction, "scenario");
    if (doc.contains("aows")) {
        const auto& a = doc["aows"];
        const std::string w = "scenario.aows";
        auto& r = sc.aows;
        r.warmup_epochs = field_or<std::size_t>(a, "warmup_epochs", r.warmup_epochs, w);
        r.total_epochs = field_or<std::size_t>(a, "total_epochs", r.total_epochs, w);
        r.samples_per_epoch = field_or<std::size_t>(a, "samples_per_epoch", r.samples_per_epoch, w);
        r.batch_size = field_or<std::size_t>(a, "batch_size", r.batch_size, w);
        if (a.contains("schedule")) r.schedule = schedule_from_json(a["schedule"]);
        const auto policy = field_or<std::string>(a, "gamma_policy", "per_epoch", w);
        if (policy == "per_epoch")
            r.gamma_policy = GammaPolicy::per_epoch;
        else if (policy == "fixed")
            r.gamma_policy = GammaPolicy::fixed;
        else
            throw ValidationError(w + ".gamma_policy: expected per_epoch or fixed");
        r.fixed_gamma = field_or<double>(a, "fixed_gamma", r.fixed_gamma, w);
        if (a.contains("gamma_max")) r.gamma_max = field<double>(a, "gamma_max", w);
        r.gamma_tol = field_or<double>(a, "gamma_tol", r.gamma_tol, w);
        r.joint_sampling = field_or<bool>(a, "joint_sampling", r.joint_sampling, w);
        r.marginals_per_epoch = field_or<bool>(a, "marginals_per_epoch", r.marginals_per_epoch, w);
    }
    sc.oracle_cap = field_or<std::uint64_t>(doc, "oracle_cap", sc.oracle_cap, "scenario");
    return sc;
}

std::string marginals_csv(const MarginalSet& m, const SearchSpace& space) {
    std::ostringstream os;
    os.precision(17);
    os << "boundary,channels,probability\n";
    for (std::size_t b = 0; b < m.num_boundaries(); ++b) {
        const auto p = m.probabilities(b);
        for (std::size_t c = 0; c < p.size(); ++c)
            os << b << ',' << space.choices(b)[c] << ',' << p[c] << '\n';
    }
    return os.str();
}

std::string dual_trace_csv(const SearchResult& r) {
    std::ostringstream os;
    os.precision(17);
    os << "gamma,latency_ms,unary_sum,dual_value\n";
    for (const auto& p : r.dual_trace)
        os << p.gamma << ',' << p.latency_ms << ',' << p.unary_sum << ',' << dual_value(p, r.target_ms)
           << '\n';
    return os.str();
}

}  // namespace aows::io
