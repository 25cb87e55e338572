#pragma once

#include <vector>

#include "icl/model.hpp"

namespace icl {

// sum_x covers the k prompt inputs and the query; gram and sum_xy cover the
// prompt only.
struct SufficientStats {
    int k = 0;
    Vec sum_x;
    Mat gram;
    Vec sum_xy;
};

struct PosteriorMixture {
    Vec log_weights;  // normalized, log pi_tilde
    Vec pi_tilde;
    std::vector<Vec> mu_tilde;
    std::vector<Vec> w_tilde_m;
    double mu_posterior_var = 0.0;
    Mat w_posterior_cov;
    Vec w_tilde;
};

// Per-component evidence exponents; reweight_log = log pi + mu + w.
struct LogWeightParts {
    Vec mu;
    Vec w;
};

struct ShiftedComponents {
    std::vector<Vec> mu_tilde;
    std::vector<Vec> w_tilde;
};

struct PsiLimits {
    double limit_mu = 0.0;
    double limit_w = 0.0;
};

// Pairs are accumulated in lexicographic order, so any permutation of the
// prompt produces bit-identical statistics.
SufficientStats sufficient_stats(const Sequence& prompt, const Vec& query);

LogWeightParts reweight_parts(const PriorModel& model, const SufficientStats& stats);
Vec reweight_log(const PriorModel& model, const SufficientStats& stats);
ShiftedComponents shift_components(const PriorModel& model, const SufficientStats& stats);

// Log-sum-exp normalization; returns normalized log weights.
Vec normalize_log_weights(const Vec& log_w);

PosteriorMixture posterior(const PriorModel& model, const SufficientStats& stats);
PosteriorMixture posterior(const PriorModel& model, const Sequence& prompt, const Vec& query);
double predict(const PriorModel& model, const Sequence& prompt, const Vec& query);

double psi_mu(const PriorModel& model, const SufficientStats& stats, int alpha, int beta);
double psi_w(const PriorModel& model, const SufficientStats& stats, int alpha, int beta);
double log_ratio(const PriorModel& model, const SufficientStats& stats, int alpha, int beta);
double ratio(const PriorModel& model, const SufficientStats& stats, int alpha, int beta);
PsiLimits psi_limits(const PriorModel& model, const InContextSource& source, int alpha, int beta);

}  // namespace icl
