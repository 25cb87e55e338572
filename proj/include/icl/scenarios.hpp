#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icl/model.hpp"
#include "icl/oracles.hpp"
#include "icl/risk.hpp"

namespace icl {

struct Scenario {
    std::string name;
    PriorModel prior;
    InContextSource source;
    std::optional<int> retrieval_alpha;  // 0-based
    std::string notes;
};

// shifted = true uses w* = normalize(2w1 + w2 + 0.2w3), else normalize(2w1 + w2).
Scenario tetrahedron(double sigma_mu = 0.25, double sigma_w = 0.25, bool shifted = true);
Scenario regular_polyhedron(int M, double sigma_mu = 0.25, double sigma_w = 0.25);
Scenario basis_setting(int d);
Scenario early_ascent(int d);
Scenario zero_shot_setting(int d, double sigma = 0.05);
// Biased-label tetrahedron with sigma_mu = sigma_w = 0.05 and alpha = 0.
Scenario bounded_efficacy();
// Antipodal d = 2 pair whose retrieval interval is non-empty.
Scenario retrieval_antipodal();
// Basis prior in d = 6 with low task variance; tasks come from the prior.
Scenario ridge_compare();

struct DiscreteScenario {
    std::string name;
    DiscreteModel model;
    DiscreteSource source;
};
DiscreteScenario discrete_ascent();

// Index of the nearest other center to center i; ties go to the lowest index.
int nearest_neighbor(const std::vector<Vec>& centers, int i);

RetrievalMargins compute_margins(const Scenario& s, int alpha);

struct ScenarioOverrides {
    std::optional<double> sigma_mu;
    std::optional<double> sigma_w;
    std::optional<double> tau_y;
};

std::vector<std::string> scenario_names();
bool is_discrete_scenario(const std::string& name);
Scenario make_scenario(const std::string& name, const ScenarioOverrides& ov = {});

std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);

}  // namespace icl
