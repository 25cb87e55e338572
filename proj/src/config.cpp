#include "icl/config.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace icl {

namespace {

using json = nlohmann::json;

std::string joined(const std::vector<std::string>& xs)
{
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
    return s;
}

}  // namespace

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"posterior-trace", "risk-curve",      "early-ascent",
                                                "bounded-efficacy", "zero-shot",      "ridge-compare",
                                                "discrete-ascent",  "envelope-check", "oracle-check"};
    return names;
}

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys{"scenario", "command",  "k_grid", "n_trials", "seed",    "out",
                                               "sigma_mu", "sigma_w", "tau_y",  "strict",   "workers", "n_particles"};
    return keys;
}

std::vector<int> parse_k_grid(const std::string& text)
{
    std::vector<int> ks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad k_grid entry '" + item + "'");
        }
        if (used != item.size()) throw std::invalid_argument("bad k_grid entry '" + item + "'");
        ks.push_back(v);
    }
    return ks;
}

ExperimentConfig merge_config_json(const std::string& text, ExperimentConfig cfg)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    const auto& keys = config_keys();
    for (const auto& [key, value] : j.items()) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw std::invalid_argument("unknown config key '" + key + "' (valid keys: " + joined(keys) + ")");
    }
    try {
        if (j.contains("scenario")) cfg.scenario = j["scenario"].get<std::string>();
        if (j.contains("command")) cfg.command = j["command"].get<std::string>();
        if (j.contains("k_grid")) cfg.k_grid = j["k_grid"].get<std::vector<int>>();
        if (j.contains("n_trials")) cfg.n_trials = j["n_trials"].get<long>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out")) cfg.out = j["out"].get<std::string>();
        if (j.contains("sigma_mu")) cfg.sigma_mu = j["sigma_mu"].get<double>();
        if (j.contains("sigma_w")) cfg.sigma_w = j["sigma_w"].get<double>();
        if (j.contains("tau_y")) cfg.tau_y = j["tau_y"].get<double>();
        if (j.contains("strict")) cfg.strict = j["strict"].get<bool>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
        if (j.contains("n_particles")) cfg.n_particles = j["n_particles"].get<long>();
    } catch (const json::type_error& e) {
        throw std::invalid_argument(std::string("config value has the wrong type: ") + e.what());
    }
    return cfg;
}

void validate_config(const ExperimentConfig& cfg)
{
    if (cfg.scenario.empty()) throw std::invalid_argument("missing required key 'scenario'");
    if (cfg.command.empty()) throw std::invalid_argument("missing required key 'command'");
    const auto& cmds = command_names();
    if (std::find(cmds.begin(), cmds.end(), cfg.command) == cmds.end())
        throw std::invalid_argument("unknown command '" + cfg.command + "' (valid: " + joined(cmds) + ")");
    if (cfg.k_grid.empty()) throw std::invalid_argument("k_grid is empty");
    for (std::size_t i = 0; i < cfg.k_grid.size(); ++i) {
        if (cfg.k_grid[i] < 0) throw std::invalid_argument("k_grid entries must be non-negative");
        if (i > 0 && cfg.k_grid[i] <= cfg.k_grid[i - 1]) throw std::invalid_argument("k_grid must be strictly increasing");
    }
    if (cfg.n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
    if (cfg.workers < 0) throw std::invalid_argument("workers must be non-negative");
    if (cfg.n_particles < 10000) throw std::invalid_argument("n_particles must be at least 10000");
}

std::string config_to_json(const ExperimentConfig& cfg)
{
    json j;
    j["scenario"] = cfg.scenario;
    j["command"] = cfg.command;
    j["k_grid"] = cfg.k_grid;
    j["n_trials"] = cfg.n_trials;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out;
    j["sigma_mu"] = cfg.sigma_mu ? json(*cfg.sigma_mu) : json(nullptr);
    j["sigma_w"] = cfg.sigma_w ? json(*cfg.sigma_w) : json(nullptr);
    j["tau_y"] = cfg.tau_y ? json(*cfg.tau_y) : json(nullptr);
    j["strict"] = cfg.strict;
    j["workers"] = cfg.workers;
    j["n_particles"] = cfg.n_particles;
    return j.dump();
}

LoadResult load_config(const std::vector<std::string>& args)
{
    CLI::App app{"Bayesian in-context learning laboratory", "icl_lab"};
    std::string config_path, scenario, command, k_grid, out;
    long n_trials = 0, n_particles = 0;
    std::uint64_t seed = 0;
    double sigma_mu = 0, sigma_w = 0, tau_y = 0;
    int workers = 0;
    auto* o_config = app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* o_scenario = app.add_option("--scenario", scenario, "scenario name");
    auto* o_command = app.add_option("--command", command, "one of: " + joined(command_names()));
    auto* o_k = app.add_option("--k-grid", k_grid, "comma-separated prompt lengths");
    auto* o_n = app.add_option("--n-trials", n_trials, "Monte-Carlo trials per k");
    auto* o_seed = app.add_option("--seed", seed, "master seed");
    auto* o_out = app.add_option("--out", out, "CSV output path");
    auto* o_smu = app.add_option("--sigma-mu", sigma_mu, "override sigma_mu");
    auto* o_sw = app.add_option("--sigma-w", sigma_w, "override sigma_w");
    auto* o_ty = app.add_option("--tau-y", tau_y, "override label noise tau_y");
    auto* o_strict = app.add_flag("--strict", "unit-norm violations are errors");
    auto* o_workers = app.add_option("--workers", workers, "worker threads (0 = all cores)");
    auto* o_particles = app.add_option("--n-particles", n_particles, "importance-sampling particles");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        return {{}, true, app.help()};
    } catch (const CLI::ParseError& e) {
        throw std::invalid_argument(e.what());
    }

    ExperimentConfig cfg;
    if (o_config->count()) {
        std::ifstream in(config_path);
        if (!in) throw std::invalid_argument("cannot read config file " + config_path);
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = merge_config_json(buf.str(), cfg);
    }
    if (o_scenario->count()) cfg.scenario = scenario;
    if (o_command->count()) cfg.command = command;
    if (o_k->count()) cfg.k_grid = parse_k_grid(k_grid);
    if (o_n->count()) cfg.n_trials = n_trials;
    if (o_seed->count()) cfg.seed = seed;
    if (o_out->count()) cfg.out = out;
    if (o_smu->count()) cfg.sigma_mu = sigma_mu;
    if (o_sw->count()) cfg.sigma_w = sigma_w;
    if (o_ty->count()) cfg.tau_y = tau_y;
    if (o_strict->count()) cfg.strict = true;
    if (o_workers->count()) cfg.workers = workers;
    if (o_particles->count()) cfg.n_particles = n_particles;
    validate_config(cfg);
    return {cfg, false, {}};
}

}  // namespace icl
