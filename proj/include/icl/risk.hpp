#pragma once

#include <cstdint>
#include <vector>

#include "icl/model.hpp"

namespace icl {

struct RiskPoint {
    int k = 0;
    double estimate = 0.0;
    double std_error = 0.0;
    long n_trials = 0;
};

// Trial i at prompt length k draws from Stream(seed, k, i); the worker count
// only changes scheduling.
struct McConfig {
    std::uint64_t seed = 1;
    int workers = 0;
};

RiskPoint summarize(int k, const std::vector<double>& values);

RiskPoint mc_learning_risk(const PriorModel& model, const InContextSource& source, int k, long n_trials,
                           const McConfig& mc);
RiskPoint mc_retrieval_risk(const PriorModel& model, const InContextSource& source, int alpha, int k,
                            long n_trials, const McConfig& mc);

struct CoarseBound {
    double value = 0.0;
    bool remainder_omitted = true;  // the O(k^(delta - 5/2)) term is never evaluated
};
CoarseBound coarse_bound(const PriorModel& model, const InContextSource& source, int k);

struct FineBound {
    double total = 0.0;
    double std_error = 0.0;
    Vec per_component;
    long n_trials = 0;
};
// Shares trial streams with mc_learning_risk, so each trial's bound term
// dominates that trial's loss.
FineBound finegrained_bound(const PriorModel& model, const InContextSource& source, int k, long n_trials,
                            const McConfig& mc);

struct RetrievalMargins {
    int alpha = 0;
    double d_mu_sq = 0.0;
    double d_w_sq = 0.0;
    double u_w_sq = 0.0;
    bool applicable = false;
};
RetrievalMargins compute_margins(const PriorModel& model, const InContextSource& source, int alpha);

struct EigenEnvelope {
    double t = 0.0;
    double gamma = 0.0;
    double L = 0.0;
    double U = 0.0;
    double fail_prob = 0.0;
    double mean_norm_bound = 0.0;
    bool vacuous = false;  // L <= 0
};
EigenEnvelope eigen_envelope(int d, int k, double t, double tau_x);

// C_{k=0} for one competitor beta.
double c_k0(const PriorModel& model, const InContextSource& source, int alpha, int beta, int k);

struct RetrievalBound {
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
    double nonasymptotic = 0.0;
    double asymptotic = 0.0;
    bool k_cap_ok = false;
    bool mu_gap_ok = false;
    bool w_gap_ok = false;
    bool u_ok = false;
    bool interval_ok = false;
};
RetrievalBound retrieval_bound(const PriorModel& model, const InContextSource& source,
                               const RetrievalMargins& margins, int k);

struct ZeroShotBound {
    int alpha = 0;
    double t1 = 0.0;
    double t2 = 0.0;
    double t3 = 0.0;
    double total = 0.0;
    bool interval_ok = false;
};
ZeroShotBound zero_shot_bound(const PriorModel& model, const InContextSource& source, int k);

struct ViolationRate {
    double rate = 0.0;
    double std_error = 0.0;
    long n_trials = 0;
};
ViolationRate eigen_violation_rate(const InContextSource& source, int k, double t, long n_trials,
                                   const McConfig& mc);

double ridge_predict(const Sequence& prompt, const Vec& query, double lambda);

struct RidgePoint {
    int k = 0;
    RiskPoint icl;
    RiskPoint ridge;
    double diff = 0.0;  // ridge - icl, paired per trial
    double diff_std_error = 0.0;
};
// Each trial draws its task from the prior and a noiseless prompt from it.
std::vector<RidgePoint> ridge_vs_icl_curve(const PriorModel& model, const std::vector<int>& ks, double lambda,
                                           long n_trials, const McConfig& mc);

struct EarlyAscentLimit {
    int alpha_star = 0;
    double limit_risk = 0.0;
    double zero_shot_risk = 0.0;
    bool ascent_predicted = false;
};
EarlyAscentLimit early_ascent_limit(const PriorModel& model, const InContextSource& source, long n_trials,
                                    const McConfig& mc);

}  // namespace icl
