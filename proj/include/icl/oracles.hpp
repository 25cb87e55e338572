#pragma once

#include <cstdint>
#include <vector>

#include "icl/model.hpp"
#include "icl/risk.hpp"

namespace icl {

struct OracleEstimate {
    Vec weights;
    Vec weights_se;
    Vec w_mean;
    Vec w_mean_se;
    double ess = 0.0;
    bool unreliable = false;  // ess < 100
};

// Self-normalized importance sampling with the prior as proposal.
OracleEstimate importance_posterior(const PriorModel& model, const Sequence& prompt, const Vec& query,
                                    long n_particles, const McConfig& mc);

struct GridSpec {
    int points = 2001;       // per axis
    double width_sd = 8.0;   // prior standard deviations covered around each center
    double min_pts_per_sd = 10.0;
};

// Trapezoidal integration over (mu, w) for d = 1; standard errors are zero.
OracleEstimate grid_posterior_1d(const PriorModel& model, const Sequence& prompt, const Vec& query,
                                 const GridSpec& grid = {});

struct ToyPrior1D {
    std::vector<double> pi;
    std::vector<double> mu;
    double sigma = 1.0;  // task noise
    double tau = 1.0;    // token noise
};

struct ToyPosterior {
    std::vector<double> pi_tilde;
    std::vector<double> mu_tilde;
    double var = 0.0;
};

ToyPosterior toy_posterior(const ToyPrior1D& prior, const std::vector<double>& samples);

// Tokens and task parameters live in {0, ..., M-1}.
struct DiscreteComponent {
    double pi = 0.0;
    int mu = 0;
    int w = 0;
};

struct DiscreteModel {
    int M = 2;
    std::vector<DiscreteComponent> components;
    double sigma_mu = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
};

struct DiscreteTask {
    int mu = 0;
    int w = 0;
};

struct DiscreteSequence {
    std::vector<int> xs;
    std::vector<int> ys;
};

// In-context task for the discrete model; x and y flip with the given rates.
struct DiscreteSource {
    DiscreteTask task;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
};

struct DiscretePrediction {
    std::vector<double> dist;   // P(y_{k+1} | prompt, x_{k+1})
    int argmax = 0;
    std::vector<double> task;   // P(mu, w | prompt, x_{k+1}), row-major M x M
};

void validate_discrete(const DiscreteModel& model);
DiscreteTask discrete_sample_task(const DiscreteModel& model, Stream& rng);
DiscreteSequence discrete_sample(const DiscreteModel& model, const DiscreteTask& task, int K, Stream& rng);
DiscreteSequence discrete_sample(const DiscreteModel& model, int K, Stream& rng);
DiscreteSequence discrete_sample_prompt(const DiscreteSource& source, int M, int k, Stream& rng);
int discrete_flip(int center, int M, double sigma, Stream& rng);
DiscretePrediction discrete_bayes_predict(const DiscreteModel& model, const DiscreteSequence& prompt, int query);

// 0-1 error of the Bayes argmax against the clean label (x + w*) mod M.
RiskPoint discrete_error(const DiscreteModel& model, const DiscreteSource& source, int k, long n_trials,
                         const McConfig& mc);

}  // namespace icl
