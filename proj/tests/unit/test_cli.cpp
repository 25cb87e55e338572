#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "icl/config.hpp"
#include "icl/runner.hpp"

using namespace icl;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& csv)
{
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string l;
    while (std::getline(ss, l))
        if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
}

ExperimentConfig small(const std::string& scenario, const std::string& command)
{
    ExperimentConfig c;
    c.scenario = scenario;
    c.command = command;
    c.k_grid = {0, 1, 4};
    c.n_trials = 100;
    c.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("flags fill defaults")
{
    const LoadResult r = load_config({"--scenario", "tetrahedron", "--command", "risk-curve", "--seed", "7"});
    CHECK(r.config.seed == 7);
    CHECK(r.config.n_trials == 2000);
    CHECK(r.config.k_grid.front() == 0);
    CHECK(r.config.k_grid.back() == 512);
    CHECK(load_config({"--help"}).help);
}

TEST_CASE("config file and flag precedence")
{
    const std::string path = "icl_cfg_test.json";
    {
        std::ofstream f(path);
        f << R"({"scenario": "tetrahedron", "command": "risk-curve", "n_trials": 500, "k_grid": [0, 2, 8]})";
    }
    const LoadResult a = load_config({"--config", path});
    CHECK(a.config.n_trials == 500);
    CHECK(a.config.k_grid == std::vector<int>{0, 2, 8});
    const LoadResult b = load_config({"--config", path, "--n-trials", "2000"});
    CHECK(b.config.n_trials == 2000);
    std::remove(path.c_str());
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(merge_config_json(R"({"scenario": "x", "bogus": 1})"), std::invalid_argument);
    try {
        merge_config_json(R"({"bogus": 1})");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("n_trials") != std::string::npos);
    }
    ExperimentConfig c = merge_config_json(R"({"scenario": "tetrahedron", "command": "risk-curve", "k_grid": [4, 2]})");
    CHECK_THROWS_AS(validate_config(c), std::invalid_argument);
    CHECK_THROWS_AS(load_config({"--command", "risk-curve"}), std::invalid_argument);
    CHECK_THROWS_AS(load_config({"--scenario", "tetrahedron", "--command", "nope"}), std::invalid_argument);
    CHECK_THROWS_AS(load_config({"--scenario", "tetrahedron", "--command", "risk-curve", "--k-grid", "1,1"}),
                    std::invalid_argument);
    CHECK_THROWS_AS(load_config({"--scenario", "tetrahedron", "--command", "risk-curve", "--what"}), std::invalid_argument);
}

TEST_CASE("csv layout and determinism")
{
    const ExperimentConfig c = small("tetrahedron", "risk-curve");
    const std::string a = format_csv(c, run_command(c));
    const std::string b = format_csv(c, run_command(c));
    CHECK(a == b);
    const auto rows = lines(a);
    REQUIRE(rows.size() == 1 + 3 * 4);
    CHECK(rows[0] == "k,metric,value,stderr,component,extra");
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(std::count(rows[i].begin(), rows[i].end(), ',') == 5);
    CHECK(a.find("# config: ") != std::string::npos);
    CHECK(a.find("0,bound_coarse,NaN,NaN,,needs k >= 1") != std::string::npos);

    ExperimentConfig other = c;
    other.seed = 12;
    CHECK(format_csv(other, run_command(other)) != a);
}

TEST_CASE("posterior trace rows cover every component")
{
    const ExperimentConfig c = small("tetrahedron", "posterior-trace");
    const RunResult r = run_command(c);
    // 4 weights, 4 distances, 3 psi_mu, 3 psi_w per k
    CHECK(r.rows.size() == 3 * 14);
    double tot = 0.0;
    for (const auto& row : r.rows)
        if (row.k == 4 && row.metric == "pi_tilde") tot += row.value;
    CHECK(tot == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("every command runs")
{
    for (const auto& [sc, cmd] : std::vector<std::pair<std::string, std::string>>{{"early-ascent-1", "early-ascent"},
                                                                                 {"bounded-efficacy", "bounded-efficacy"},
                                                                                 {"zero-shot-2", "zero-shot"},
                                                                                 {"ridge-d6", "ridge-compare"},
                                                                                 {"discrete-ascent", "discrete-ascent"},
                                                                                 {"tetrahedron", "envelope-check"}}) {
        const ExperimentConfig c = small(sc, cmd);
        const RunResult r = run_command(c);
        CHECK(!r.rows.empty());
    }
    // inapplicable bounds become NaN rows instead of errors
    const RunResult tet = run_command(small("tetrahedron", "zero-shot"));
    bool nan_seen = false;
    for (const auto& row : tet.rows) nan_seen |= row.metric == "bound_zeroshot" && std::isnan(row.value);
    CHECK(nan_seen);
    CHECK_THROWS_AS(run_command(small("tetrahedron", "discrete-ascent")), std::invalid_argument);
}

TEST_CASE("run writes the file and reports the exit code")
{
    ExperimentConfig c = small("tetrahedron", "risk-curve");
    c.out = "icl_run_test.csv";
    std::ostringstream log;
    CHECK(run(c, log) == 0);
    const std::string first = slurp(c.out);
    CHECK(run(c, log) == 0);
    CHECK(slurp(c.out) == first);
    std::remove(c.out.c_str());

    c.out = "/nonexistent-dir/x.csv";
    CHECK(run(c, log) == 4);
    c.scenario = "nope";
    CHECK(run(c, log) == 2);
}

TEST_CASE("oracle check")
{
    ExperimentConfig c = small("early-ascent-1", "oracle-check");
    c.k_grid = {0, 1, 4, 8};
    c.n_trials = 20;
    CHECK(oracle_check(c, default_engine()).status == CheckStatus::pass);

    // flipping the sign of the w evidence must be caught
    const PosteriorEngine corrupted = [](const PriorModel& m, const Sequence& p, const Vec& q) {
        const SufficientStats s = sufficient_stats(p, q);
        PosteriorMixture post = posterior(m, s);
        const LogWeightParts parts = reweight_parts(m, s);
        Vec l(m.M());
        for (int i = 0; i < m.M(); ++i) l[i] = std::log(m.components[i].pi) + parts.mu[i] - parts.w[i];
        post.log_weights = normalize_log_weights(l);
        post.pi_tilde = post.log_weights.array().exp();
        post.w_tilde.setZero();
        for (int i = 0; i < m.M(); ++i) post.w_tilde += post.pi_tilde[i] * post.w_tilde_m[i];
        return post;
    };
    CHECK(oracle_check(c, corrupted).status == CheckStatus::fail);

    ExperimentConfig d3 = c;
    d3.scenario = "early-ascent-3";
    CHECK_THROWS_AS(oracle_check(d3, default_engine()), std::invalid_argument);
    ExperimentConfig longk = c;
    longk.k_grid = {0, 16};
    CHECK_THROWS_AS(oracle_check(longk, default_engine()), std::invalid_argument);
}

TEST_CASE("number formatting round-trips")
{
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) CHECK(std::stod(format_number(v)) == v);
    CHECK(format_number(std::nan("")) == "NaN");
}
