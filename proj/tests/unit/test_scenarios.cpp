#include <doctest.h>

#include <cmath>

#include "icl/scenarios.hpp"

using namespace icl;

TEST_CASE("tetrahedron geometry")
{
    const Scenario s = tetrahedron();
    CHECK(s.prior.d == 3);
    CHECK(s.prior.M() == 4);
    for (const auto& c : s.prior.components) {
        CHECK(std::abs(c.mu.norm() - 1.0) < 1e-12);
        CHECK(c.mu == c.w);
        CHECK(c.pi == 0.25);
    }
    const double d01 = (s.prior.components[0].mu - s.prior.components[1].mu).norm();
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            CHECK(std::abs((s.prior.components[a].mu - s.prior.components[b].mu).norm() - d01) < 1e-12);
    for (int m = 1; m < 4; ++m) CHECK(s.source.mu_star.dot(s.prior.components[0].mu) > s.source.mu_star.dot(s.prior.components[m].mu));
    const Vec want = (2 * s.prior.components[0].w + s.prior.components[1].w + 0.2 * s.prior.components[2].w).normalized();
    CHECK((s.source.w_star - want).norm() < 1e-15);
    CHECK(tetrahedron(0.25, 0.25, false).name == "tetrahedron-plain");

    const RetrievalMargins m = compute_margins(s, 0);
    CHECK(m.d_mu_sq > 0);
    CHECK(m.d_w_sq > 0);
    CHECK(m.u_w_sq > 0);
    CHECK(m.applicable);
}

TEST_CASE("regular polyhedra")
{
    for (int M : {4, 6, 8, 12, 20}) {
        const Scenario s = regular_polyhedron(M);
        CHECK(s.prior.M() == M);
        for (const auto& c : s.prior.components) CHECK(std::abs(c.mu.norm() - 1.0) < 1e-12);
        CHECK(std::abs(s.source.w_star.norm() - 1.0) < 1e-12);
    }
    const Scenario oct = regular_polyhedron(6);
    for (int i = 0; i < 6; ++i) CHECK(oct.prior.components[i].mu.cwiseAbs().maxCoeff() == 1.0);

    const Scenario dod = regular_polyhedron(20);
    double best = -2.0;
    for (int a = 0; a < 20; ++a)
        for (int b = a + 1; b < 20; ++b) best = std::max(best, dod.prior.components[a].mu.dot(dod.prior.components[b].mu));
    const double phi = (1 + std::sqrt(5.0)) / 2;
    CHECK(std::abs(best - (1 - 2 / (3 * phi * phi))) < 1e-9);

    CHECK_THROWS_AS(regular_polyhedron(5), std::invalid_argument);

    std::vector<Vec> tie(3, Vec::Zero(2));
    tie[0] << 0, 0;
    tie[1] << 1, 0;
    tie[2] << 0, 1;
    CHECK(nearest_neighbor(tie, 0) == 1);
}

TEST_CASE("basis setting")
{
    const Scenario s = basis_setting(2);
    CHECK(s.prior.components[0].mu == Vec::Unit(2, 0));
    CHECK(s.prior.components[1].w == Vec::Unit(2, 1));
    CHECK(std::abs(s.source.w_star[0] - 2 / std::sqrt(5.0)) < 1e-15);
    CHECK(std::abs(s.source.w_star[1] - 1 / std::sqrt(5.0)) < 1e-15);
    const Scenario b = basis_setting(8);
    for (int i = 0; i < 8; ++i)
        for (int j = i + 1; j < 8; ++j) CHECK(b.prior.components[i].mu.dot(b.prior.components[j].mu) == 0.0);
    CHECK(compute_margins(b, 0).d_mu_sq > 0);
}

TEST_CASE("early ascent presets")
{
    const Scenario one = early_ascent(1);
    CHECK(one.prior.M() == 2);
    CHECK(one.source.w_star == one.prior.components[1].w);
    CHECK(one.prior.sigma_y == 2.0);
    const Scenario two = early_ascent(2);
    CHECK(two.prior.M() == 3);
    CHECK(two.source.mu_star == two.prior.components[0].mu);
    CHECK(two.prior.components[2].mu[1] == -1.0);
    CHECK(two.prior.components[2].w[0] == -1.0);
    CHECK(validate_prior(two.prior, false).ok());
}

TEST_CASE("zero-shot setting and margins")
{
    const Scenario z = zero_shot_setting(3);
    Stream rng(1);
    const Prompt p = sample_incontext_prompt(z.source, 16, rng);
    for (double y : p.seq.ys) CHECK(y == 0.0);
    const RetrievalMargins m = compute_margins(z, 0);
    CHECK(m.d_mu_sq == doctest::Approx(4 * z.prior.components[0].mu.dot(z.source.mu_star)));
    CHECK(m.d_w_sq == 0.0);
    CHECK_FALSE(m.applicable);

    const Scenario t = tetrahedron();
    int far = 0;
    double worst = -1;
    for (int i = 0; i < 4; ++i) {
        const double dist = (t.prior.components[i].mu - t.source.mu_star).norm();
        if (dist > worst) {
            worst = dist;
            far = i;
        }
    }
    const RetrievalMargins fm = compute_margins(t, far);
    CHECK(fm.d_mu_sq < 0);
    CHECK_FALSE(fm.applicable);

    Scenario single = t;
    single.prior.components.resize(1);
    CHECK_THROWS_AS(compute_margins(single, 0), std::invalid_argument);
}

TEST_CASE("presets round-trip through json exactly")
{
    std::vector<Scenario> all{tetrahedron(),        tetrahedron(0.1, 0.3, false), basis_setting(4), early_ascent(3),
                              zero_shot_setting(2), bounded_efficacy(),           retrieval_antipodal(), ridge_compare()};
    for (int M : {4, 6, 8, 12, 20}) all.push_back(regular_polyhedron(M));
    for (const auto& s : all) {
        const Scenario r = scenario_from_json(scenario_to_json(s));
        CHECK(r.name == s.name);
        CHECK(r.notes == s.notes);
        CHECK(r.retrieval_alpha == s.retrieval_alpha);
        CHECK(r.prior.sigma_mu == s.prior.sigma_mu);
        CHECK(r.prior.sigma_y == s.prior.sigma_y);
        REQUIRE(r.prior.M() == s.prior.M());
        for (int m = 0; m < s.prior.M(); ++m) {
            CHECK(r.prior.components[m].pi == s.prior.components[m].pi);
            CHECK(r.prior.components[m].mu == s.prior.components[m].mu);
            CHECK(r.prior.components[m].w == s.prior.components[m].w);
        }
        CHECK(r.source.mu_star == s.source.mu_star);
        CHECK(r.source.w_star == s.source.w_star);
        CHECK(r.source.zero_labels == s.source.zero_labels);
        CHECK(scenario_to_json(r) == scenario_to_json(s));
    }
}

TEST_CASE("lookup by name")
{
    CHECK(make_scenario("polyhedron-12").prior.M() == 12);
    CHECK(make_scenario("early-ascent-3").prior.d == 3);
    CHECK(make_scenario("tetrahedron", {0.05, std::nullopt, 0.2}).prior.sigma_mu == 0.05);
    CHECK(make_scenario("tetrahedron", {0.05, std::nullopt, 0.2}).source.tau_y == 0.2);
    CHECK_THROWS_AS(make_scenario("cube"), std::invalid_argument);
    CHECK_THROWS_AS(make_scenario("basis-x"), std::invalid_argument);
    CHECK(is_discrete_scenario("discrete-ascent"));
}
