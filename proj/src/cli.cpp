#include "aows/cli.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "aows/error.hpp"
#include "aows/io.hpp"

#ifndef AOWS_VERSION
#define AOWS_VERSION "dev"
#endif

namespace aows::cli {
namespace {

using io::json;

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i)
        os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

/// Everything needed to replay a run, attached to every output document.
struct RunManifest {
    std::string subcommand;
    std::vector<std::string> args;
    std::map<std::string, std::string> inputs;
    std::optional<std::uint64_t> seed;

    void input(const std::string& path) { inputs[path] = sha256_file(path); }

    json to_json() const {
        json digests = json::object();
        for (const auto& [p, d] : inputs) digests[p] = "sha256:" + d;
        return {{"subcommand", subcommand},
                {"args", args},
                {"input_digests", std::move(digests)},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"tool_version", AOWS_VERSION}};
    }
};

struct Output {
    std::string path;
    std::ostream* stdout_stream;

    void emit(const std::string& text) const {
        if (path.empty() || path == "-")
            *stdout_stream << text;
        else
            write_atomically(path, text);
    }
    void emit(const json& doc) const { emit(doc.dump(2) + "\n"); }
};

struct Options {
    std::string space, table, samples, stats, counts, scenario, schedule, proxy = "sim",
        proxy_file, config, out, emit_csv;
    double lambda = 0.0, tol = -1.0, target_ms = 0.0, gamma_max = 0.0;
    std::size_t max_iters = FitOptions{}.max_iters, count = 1;
    std::uint64_t seed = 0;
    bool allow_partial = false;
};

std::uint64_t root_seed(const CLI::App& sub, const Options& o, const Scenario* sc) {
    if (sub.count("--seed") > 0) return o.seed;
    return sc ? sc->seed : 0;
}

SyntheticLoss scenario_loss(const SearchSpace& space, const Scenario& sc, std::uint64_t seed) {
    if (!sc.quality.empty())
        return SyntheticLoss(space, sc.quality, PairTable<double>(space), sc.loss.noise,
                             derive_seed(seed, "loss.observe"));
    return SyntheticLoss::random(space, sc.loss, derive_seed(seed, "loss"));
}

ProxyEvaluator file_proxy(const std::string& path, const SearchSpace& space) {
    const json doc = io::read_json_file(path);
    if (!doc.contains("entries") || !doc["entries"].is_array())
        throw ValidationError(path + ": expected {\"entries\": [...]}");
    auto table = std::make_shared<std::map<ChannelConfig, double>>();
    for (std::size_t k = 0; k < doc["entries"].size(); ++k) {
        const auto& e = doc["entries"][k];
        const std::string where = path + ": entries[" + std::to_string(k) + "]";
        if (!e.contains("config") || !e.contains("error"))
            throw ValidationError(where + ": needs config and error");
        ChannelConfig c;
        try {
            c = io::config_from_json(e["config"], space);
        } catch (const ValidationError& ve) {
            throw ValidationError(where + ": " + ve.what());
        }
        (*table)[c] = e["error"].get<double>();
    }
    return [table](const ChannelConfig& c) {
        auto it = table->find(c);
        if (it == table->end()) {
            std::string s;
            for (int v : c.channels) s += (s.empty() ? "" : ",") + std::to_string(v);
            throw ValidationError("proxy file has no entry for config " + s);
        }
        return it->second;
    };
}

int run(CLI::App& app, CLI::App* sub, const Options& o, RunManifest& m, const Output& out) {
    const std::string name = sub->get_name();
    m.subcommand = name;
    auto space_in = [&] {
        m.input(o.space);
        return io::load_space(o.space);
    };
    auto table_in = [&](const SearchSpace& space) {
        m.input(o.table);
        try {
            return io::table_from_json(io::read_json_file(o.table), space);
        } catch (const ValidationError& e) {
            throw ValidationError(o.table + ": " + e.what());
        }
    };
    auto scenario_in = [&] {
        if (o.scenario.empty()) return Scenario{};
        m.input(o.scenario);
        return io::scenario_from_json(io::read_json_file(o.scenario));
    };
    (void)app;

    if (name == "flops") {
        const SearchSpace space = space_in();
        const ChannelConfig c = io::parse_interior_config(o.config, space);
        const double f = flops(c, space);
        out.emit(json{{"config", c.channels}, {"flops", f}, {"mflops", f / 1e6},
                      {"manifest", m.to_json()}});
    } else if (name == "predict") {
        const SearchSpace space = space_in();
        const LatencyTable table = table_in(space);
        const ChannelConfig c = io::parse_interior_config(o.config, space);
        out.emit(json{{"config", c.channels}, {"latency_ms", predict(table, c)},
                      {"manifest", m.to_json()}});
    } else if (name == "plan") {
        const SearchSpace space = space_in();
        CountTable counts(space);
        if (std::filesystem::exists(o.counts)) {
            m.input(o.counts);
            try {
                counts = io::counts_from_json(io::read_json_file(o.counts), space);
            } catch (const ValidationError& e) {
                throw ValidationError(o.counts + ": " + e.what());
            }
        }
        json configs = json::array();
        for (std::size_t k = 0; k < o.count; ++k) {
            const ChannelConfig c = plan_next(counts, space);
            add_counts(counts, space.path_of(c));
            configs.push_back(c.channels);
        }
        json doc = io::to_json(counts);
        doc["min_count"] = min_count(counts);
        write_atomically(o.counts, doc.dump(2) + "\n");
        out.emit(json{{"configs", std::move(configs)},
                      {"min_count", min_count(counts)},
                      {"manifest", m.to_json()}});
    } else if (name == "fit") {
        const SearchSpace space = space_in();
        m.input(o.samples);
        const auto samples = io::load_samples(o.samples, space);
        FitOptions fo;
        fo.lambda = o.lambda;
        if (o.tol > 0.0) fo.tol = o.tol;
        fo.max_iters = o.max_iters;
        fo.allow_partial = o.allow_partial;
        const FitResult r = fit_detailed(assemble(samples, space), fo);
        json doc = io::to_json(r.table);
        doc["fit_report"] = io::to_json(r.report);
        doc["samples"] = samples.size();
        doc["manifest"] = m.to_json();
        out.emit(doc);
    } else if (name == "search") {
        const SearchSpace space = space_in();
        const LatencyTable table = table_in(space);
        m.input(o.stats);
        ErrorStats stats = io::stats_from_json(io::read_json_file(o.stats), space);
        SearchOptions so{o.target_ms, std::nullopt, o.tol > 0.0 ? o.tol : SearchOptions{}.tol};
        if (sub->count("--gamma-max") > 0) so.gamma_max = o.gamma_max;
        const SearchResult r = lagrangian_search(stats, table, so);
        json doc = io::to_json(r);
        doc["manifest"] = m.to_json();
        out.emit(doc);
        if (!o.emit_csv.empty()) write_atomically(o.emit_csv, io::dual_trace_csv(r));
    } else if (name == "aows") {
        const SearchSpace space = space_in();
        const LatencyTable table = table_in(space);
        const Scenario sc = scenario_in();
        const std::uint64_t seed = root_seed(*sub, o, &sc);
        m.seed = seed;
        AowsRunConfig run = sc.aows;
        if (!o.schedule.empty()) {
            m.input(o.schedule);
            run.schedule = io::schedule_from_json(io::read_json_file(o.schedule));
        }
        run.target_ms = o.target_ms;
        run.seed = derive_seed(seed, "aows");
        if (sub->count("--gamma-max") > 0) run.gamma_max = o.gamma_max;
        SyntheticLoss loss = scenario_loss(space, sc, seed);
        const AowsResult r = run_aows(run, loss, table, space);
        json doc = io::to_json(r);
        doc["manifest"] = m.to_json();
        out.emit(doc);
        if (!o.emit_csv.empty()) write_atomically(o.emit_csv, io::marginals_csv(r.marginals, space));
    } else if (name == "greedy") {
        const SearchSpace space = space_in();
        const LatencyTable table = table_in(space);
        ProxyEvaluator proxy;
        std::optional<SyntheticLoss> loss;
        if (o.proxy == "sim") {
            const Scenario sc = scenario_in();
            const std::uint64_t seed = root_seed(*sub, o, &sc);
            m.seed = seed;
            loss.emplace(scenario_loss(space, sc, seed));
            proxy = [&](const ChannelConfig& c) { return loss->expected_gap(c); };
        } else {
            if (o.proxy_file.empty()) throw ValidationError("--proxy file needs --proxy-file");
            m.input(o.proxy_file);
            proxy = file_proxy(o.proxy_file, space);
        }
        const GreedyResult r = greedy_trim(proxy, table, o.target_ms, space);
        json doc = io::to_json(r);
        doc["target_ms"] = o.target_ms;
        doc["manifest"] = m.to_json();
        out.emit(doc);
    } else if (name == "simulate") {
        const SearchSpace space = space_in();
        Scenario sc = scenario_in();
        sc.seed = root_seed(*sub, o, &sc);
        m.seed = sc.seed;
        if (sub->count("--target-ms") > 0) sc.target_ms = o.target_ms;
        const SimulationReport r = run_simulation(space, sc);
        json doc = io::to_json(r);
        doc["manifest"] = m.to_json();
        out.emit(doc);
    }
    return ok;
}

}  // namespace

void write_atomically(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot write " + tmp.string());
        os << contents;
        os.flush();
        if (!os) throw ValidationError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw ValidationError("cannot rename onto " + path + ": " + ec.message());
    }
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Latency-constrained channel width search"};
    app.require_subcommand(1);
    Options o;
    RunManifest manifest;
    manifest.args = args;

    auto space_opt = [&](CLI::App* s) { s->add_option("--space", o.space, "search-space JSON")->required(); };
    auto table_opt = [&](CLI::App* s, const char* flag) {
        s->add_option(flag, o.table, "latency table JSON")->required();
    };
    auto out_opt = [&](CLI::App* s) { s->add_option("--out", o.out, "output path (default stdout)"); };

    auto* flops_cmd = app.add_subcommand("flops", "FLOPs of a configuration");
    space_opt(flops_cmd);
    flops_cmd->add_option("--config", o.config, "interior channels, comma separated")->required();
    out_opt(flops_cmd);

    auto* predict_cmd = app.add_subcommand("predict", "Modeled latency of a configuration");
    space_opt(predict_cmd);
    table_opt(predict_cmd, "--table");
    predict_cmd->add_option("--config", o.config, "interior channels, comma separated")->required();
    out_opt(predict_cmd);

    auto* plan_cmd = app.add_subcommand("plan", "Next configurations to benchmark");
    space_opt(plan_cmd);
    plan_cmd->add_option("--counts", o.counts, "count file (created if absent, updated)")->required();
    plan_cmd->add_option("--count", o.count, "number of configurations")->check(CLI::PositiveNumber);
    out_opt(plan_cmd);

    auto* fit_cmd = app.add_subcommand("fit", "Fit the latency table from benchmarks");
    space_opt(fit_cmd);
    fit_cmd->add_option("--samples", o.samples, "JSONL benchmark records")->required();
    fit_cmd->add_option("--lambda", o.lambda, "monotonicity weight")->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--tol", o.tol, "optimality tolerance")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--max-iters", o.max_iters, "iteration cap")->check(CLI::PositiveNumber);
    fit_cmd->add_flag("--allow-partial", o.allow_partial, "zero-fill entries no sample covers");
    out_opt(fit_cmd);

    auto* search_cmd = app.add_subcommand("search", "Lagrangian width search");
    space_opt(search_cmd);
    search_cmd->add_option("--stats", o.stats, "error statistics JSON")->required();
    table_opt(search_cmd, "--latency-table");
    search_cmd->add_option("--target-ms", o.target_ms, "latency target")->required();
    search_cmd->add_option("--gamma-max", o.gamma_max, "upper multiplier bracket");
    search_cmd->add_option("--tol", o.tol, "multiplier interval tolerance")->check(CLI::PositiveNumber);
    search_cmd->add_option("--emit-csv", o.emit_csv, "write the dual trace as CSV");
    out_opt(search_cmd);

    auto* aows_cmd = app.add_subcommand("aows", "Adaptive search against the synthetic loss oracle");
    space_opt(aows_cmd);
    table_opt(aows_cmd, "--latency-table");
    aows_cmd->add_option("--scenario", o.scenario, "scenario JSON (loss oracle, run settings)");
    aows_cmd->add_option("--schedule", o.schedule, "temperature schedule JSON");
    aows_cmd->add_option("--target-ms", o.target_ms, "latency target")->required();
    aows_cmd->add_option("--gamma-max", o.gamma_max, "upper multiplier bracket");
    aows_cmd->add_option("--seed", o.seed, "root seed");
    aows_cmd->add_option("--emit-csv", o.emit_csv, "write final marginals as CSV");
    out_opt(aows_cmd);

    auto* greedy_cmd = app.add_subcommand("greedy", "Greedy trimming baseline");
    space_opt(greedy_cmd);
    table_opt(greedy_cmd, "--latency-table");
    greedy_cmd->add_option("--target-ms", o.target_ms, "latency target")->required();
    greedy_cmd->add_option("--proxy", o.proxy, "proxy source")->check(CLI::IsMember({"sim", "file"}));
    greedy_cmd->add_option("--scenario", o.scenario, "scenario JSON for --proxy sim");
    greedy_cmd->add_option("--proxy-file", o.proxy_file, "JSON proxy errors for --proxy file");
    greedy_cmd->add_option("--seed", o.seed, "root seed");
    out_opt(greedy_cmd);

    auto* sim_cmd = app.add_subcommand("simulate", "End-to-end synthetic comparison");
    space_opt(sim_cmd);
    sim_cmd->add_option("--scenario", o.scenario, "scenario JSON");
    sim_cmd->add_option("--seed", o.seed, "root seed (overrides the scenario)");
    sim_cmd->add_option("--target-ms", o.target_ms, "latency target (overrides the scenario)");
    out_opt(sim_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return invalid_input;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        return run(app, sub, o, manifest, Output{o.out, &out});
    } catch (const ValidationError& e) {
        err << "invalid input: " << e.what() << "\n";
        return invalid_input;
    } catch (const ComputationError& e) {
        err << "computation failed: " << e.what() << "\n";
        return computation_failed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return unexpected;
    }
}

}  // namespace aows::cli
