#include <doctest.h>

#include <cmath>

#include "icl/oracles.hpp"
#include "icl/posterior.hpp"
#include "icl/scenarios.hpp"

using namespace icl;

namespace {

Vec one(double x) { return Vec::Constant(1, x); }

PriorModel pair_1d(double s_mu, double s_w, double s_x, double s_y)
{
    PriorModel p;
    p.d = 1;
    p.components = {{0.5, one(1), one(1)}, {0.5, one(-1), one(-1)}};
    p.sigma_mu = s_mu;
    p.sigma_w = s_w;
    p.sigma_x = s_x;
    p.sigma_y = s_y;
    return p;
}

}  // namespace

TEST_CASE("importance sampling: trivial cases")
{
    PriorModel single = pair_1d(0.2, 0.2, 1, 1);
    single.components.resize(1);
    single.components[0].pi = 1.0;
    Sequence p;
    p.xs = {one(0.3)};
    p.ys = {0.1};
    const OracleEstimate o = importance_posterior(single, p, one(0.5), 20000, {1, 0});
    CHECK(o.weights[0] == doctest::Approx(1.0).epsilon(1e-12));

    PriorModel wide = tetrahedron().prior;
    wide.sigma_x = 1e8;
    Vec q(3);
    q << 0.1, 0.2, 0.3;
    const OracleEstimate z = importance_posterior(wide, {}, q, 100000, {2, 0});
    for (int m = 0; m < 4; ++m) CHECK(std::abs(z.weights[m] - 0.25) < 3 * z.weights_se[m]);
    CHECK(z.ess > 99000);

    CHECK_THROWS_AS(importance_posterior(wide, {}, q, 100, {}), std::invalid_argument);
}

TEST_CASE("importance sampling is independent of the worker count")
{
    const Scenario s = early_ascent(2);
    Stream rng(1);
    const Prompt p = sample_incontext_prompt(s.source, 4, rng);
    const OracleEstimate a = importance_posterior(s.prior, p.seq, p.query, 50000, {3, 1});
    const OracleEstimate b = importance_posterior(s.prior, p.seq, p.query, 50000, {3, 6});
    CHECK((a.weights.array() == b.weights.array()).all());
    CHECK((a.w_mean.array() == b.w_mean.array()).all());
}

TEST_CASE("importance sampling agrees with the closed form in d = 2")
{
    const Scenario s = early_ascent(2);
    Stream rng(2);
    const Prompt p = sample_incontext_prompt(s.source, 4, rng);
    const OracleEstimate o = importance_posterior(s.prior, p.seq, p.query, 1000000, {4, 0});
    const PosteriorMixture post = posterior(s.prior, p.seq, p.query);
    CHECK_FALSE(o.unreliable);
    for (int m = 0; m < 3; ++m) CHECK(std::abs(o.weights[m] - post.pi_tilde[m]) <= 3 * o.weights_se[m] + 1e-12);
    for (int c = 0; c < 2; ++c) CHECK(std::abs(o.w_mean[c] - post.w_tilde[c]) <= 3 * o.w_mean_se[c] + 1e-12);
}

TEST_CASE("grid oracle")
{
    const PriorModel sym = pair_1d(0.3, 0.3, 1, 1);
    const OracleEstimate e = grid_posterior_1d(sym, {}, one(0.0));
    CHECK(e.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(e.weights[1] == doctest::Approx(0.5).epsilon(1e-12));

    const Scenario s = early_ascent(1);
    Stream rng(6);
    const Prompt p = sample_incontext_prompt(s.source, 6, rng);
    const OracleEstimate g1 = grid_posterior_1d(s.prior, p.seq, p.query, {2001, 8, 10});
    const OracleEstimate g2 = grid_posterior_1d(s.prior, p.seq, p.query, {4001, 8, 10});
    const OracleEstimate g3 = grid_posterior_1d(s.prior, p.seq, p.query, {8001, 8, 10});
    const double d12 = std::abs(g1.weights[0] - g2.weights[0]) + std::abs(g1.w_mean[0] - g2.w_mean[0]);
    const double d23 = std::abs(g2.weights[0] - g3.weights[0]) + std::abs(g2.w_mean[0] - g3.w_mean[0]);
    CHECK(d12 < 1e-5);
    CHECK(d23 <= d12);
    const OracleEstimate again = grid_posterior_1d(s.prior, p.seq, p.query);
    CHECK(again.weights[0] == g1.weights[0]);

    CHECK_THROWS_AS(grid_posterior_1d(tetrahedron().prior, {}, Vec::Zero(3)), std::invalid_argument);
    CHECK_THROWS_AS(grid_posterior_1d(s.prior, p.seq, p.query, {1000, 8, 10}), std::invalid_argument);
    const Prompt big = sample_incontext_prompt(s.source, 100000, rng);
    CHECK_THROWS_AS(grid_posterior_1d(s.prior, big.seq, big.query), std::invalid_argument);
}

TEST_CASE("toy posterior")
{
    ToyPrior1D t;
    t.pi = {0.3, 0.7};
    t.mu = {-1, 1};
    t.sigma = 1;
    t.tau = 1;
    const ToyPosterior z = toy_posterior(t, {});
    CHECK(z.pi_tilde[0] == doctest::Approx(0.3));
    CHECK(z.mu_tilde[1] == 1.0);
    CHECK(z.var == 1.0);

    const ToyPosterior a = toy_posterior(t, {1.0});
    const double w0 = 0.3 * std::exp(-1.0), w1 = 0.7;
    CHECK(a.pi_tilde[0] == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-14));
    CHECK(a.mu_tilde[0] == doctest::Approx(0.0));
    CHECK(a.mu_tilde[1] == doctest::Approx(1.0));
    CHECK(a.pi_tilde[0] + a.pi_tilde[1] == doctest::Approx(1.0).epsilon(1e-15));

    // the same instance as a PriorModel whose w part carries no information
    PriorModel m;
    m.d = 1;
    m.components = {{0.3, one(-1), one(0)}, {0.7, one(1), one(0)}};
    m.sigma_mu = 1;
    m.sigma_x = 1;
    m.sigma_w = 1;
    m.sigma_y = 1;
    const OracleEstimate g = grid_posterior_1d(m, {}, one(1.0));
    CHECK(std::abs(g.weights[0] - a.pi_tilde[0]) < 1e-6);

    ToyPrior1D sharp = t;
    sharp.sigma = 1e-9;
    const std::vector<double> xs{0.5, 0.9, 1.2};
    const ToyPosterior s = toy_posterior(sharp, xs);
    CHECK(s.mu_tilde[0] == doctest::Approx(-1.0).epsilon(1e-9));
    const double xbar = (0.5 + 0.9 + 1.2) / 3;
    const double l0 = std::log(0.3) - 3 * (-1 - xbar) * (-1 - xbar) / 2;
    const double l1 = std::log(0.7) - 3 * (1 - xbar) * (1 - xbar) / 2;
    CHECK(s.pi_tilde[0] == doctest::Approx(1.0 / (1.0 + std::exp(l1 - l0))).epsilon(1e-6));
}

TEST_CASE("discrete model basics")
{
    DiscreteModel m;
    m.M = 5;
    m.components = {{1.0, 2, 3}};
    DiscreteSequence p;
    p.xs = {2, 2};
    p.ys = {0, 0};
    const DiscretePrediction d = discrete_bayes_predict(m, p, 2);
    CHECK(d.argmax == 0);
    CHECK(d.dist[0] == 1.0);

    const DiscreteScenario s = discrete_ascent();
    Stream rng(8);
    const DiscreteSequence q = discrete_sample_prompt(s.source, 6, 12, rng);
    const DiscretePrediction pr = discrete_bayes_predict(s.model, q, 1);
    double tot = 0.0;
    for (double v : pr.dist) tot += v;
    CHECK(std::abs(tot - 1.0) < 1e-12);

    DiscreteModel bad = s.model;
    bad.sigma_y = 0.5;
    CHECK_THROWS_AS(validate_discrete(bad), std::invalid_argument);
    bad = s.model;
    bad.components[0].pi = 0.1;
    CHECK_THROWS_AS(validate_discrete(bad), std::invalid_argument);
    bad = s.model;
    bad.components[0].w = 6;
    CHECK_THROWS_AS(validate_discrete(bad), std::invalid_argument);

    const DiscreteSequence pre = discrete_sample(s.model, 20, rng);
    CHECK(pre.xs.size() == 20);
    for (int y : pre.ys) CHECK((y >= 0 && y < 6));
}

TEST_CASE("discrete predictor matches rejection sampling")
{
    DiscreteModel m;
    m.M = 3;
    m.components = {{0.5, 0, 1}, {0.3, 1, 2}, {0.2, 2, 0}};
    m.sigma_mu = 0.1;
    m.sigma_x = 0.2;
    m.sigma_y = 0.15;
    DiscreteSequence prompt;
    prompt.xs = {0, 1};
    prompt.ys = {1, 0};
    const int query = 0;
    const DiscretePrediction pred = discrete_bayes_predict(m, prompt, query);

    std::vector<double> task_hits(9, 0.0), y_hits(3, 0.0);
    double accepted = 0.0;
    Stream rng(2024);
    for (int i = 0; i < 1000000; ++i) {
        const DiscreteTask t = discrete_sample_task(m, rng);
        const DiscreteSequence s = discrete_sample(m, t, 3, rng);
        if (s.xs[0] != prompt.xs[0] || s.ys[0] != prompt.ys[0] || s.xs[1] != prompt.xs[1] ||
            s.ys[1] != prompt.ys[1] || s.xs[2] != query)
            continue;
        accepted += 1;
        task_hits[t.mu * 3 + t.w] += 1;
        y_hits[s.ys[2]] += 1;
    }
    REQUIRE(accepted > 1000);
    for (int j = 0; j < 9; ++j) {
        const double p = pred.task[j];
        const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / accepted);
        CHECK(std::abs(task_hits[j] / accepted - p) <= 3 * se + 1e-12);
    }
    for (int y = 0; y < 3; ++y) {
        const double p = pred.dist[y];
        CHECK(std::abs(y_hits[y] / accepted - p) <= 3 * std::sqrt(p * (1 - p) / accepted) + 1e-12);
    }
}
