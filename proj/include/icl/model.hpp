#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "icl/rng.hpp"

namespace icl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Component {
    double pi = 0.0;
    Vec mu;
    Vec w;
};

// Gaussian-mixture task prior. Component indices are 0-based in the API;
// CSV output and CLI messages print them 1-based.
struct PriorModel {
    int d = 1;
    std::vector<Component> components;
    double sigma_mu = 0.0;
    double sigma_w = 0.0;
    double sigma_x = 1.0;
    double sigma_y = 1.0;

    int M() const { return static_cast<int>(components.size()); }
    // sigma_mu^2 / sigma_x^2, with 0/0 read as 0.
    double delta_mu() const;
    double delta_w() const;
    // max pi_a / pi_b over all pairs.
    double weight_ratio() const;
};

struct InContextSource {
    Vec mu_star;
    Vec w_star;
    double tau_x = 1.0;
    double tau_y = 0.0;
    bool zero_labels = false;  // generator emits y_i = 0 regardless of w_star
};

struct Sequence {
    std::vector<Vec> xs;
    std::vector<double> ys;
    std::size_t size() const { return xs.size(); }
};

struct Prompt {
    Sequence seq;
    Vec query;
};

enum class Severity { warning, error };

struct Issue {
    Severity severity;
    std::string what;
};

struct ValidationReport {
    std::vector<Issue> issues;
    bool ok() const;
    std::string str() const;
};

// Non-finite entries throw std::invalid_argument in either mode.
ValidationReport validate_prior(const PriorModel& model, bool strict);
ValidationReport validate_source(const InContextSource& source, int d, bool strict);

struct TaskDraw {
    Vec mu;
    Vec w;
    int component = 0;
};

struct PretrainingDraw {
    Sequence seq;
    TaskDraw task;
};

TaskDraw sample_task(const PriorModel& model, Stream& rng);
PretrainingDraw sample_pretraining_sequence(const PriorModel& model, int K, Stream& rng);
Prompt sample_incontext_prompt(const InContextSource& source, int k, Stream& rng);

}  // namespace icl
