#include "icl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "icl/parallel.hpp"

namespace icl {

namespace {

constexpr long kBlock = 4096;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const std::vector<double>& a)
{
    const double top = *std::max_element(a.begin(), a.end());
    if (!std::isfinite(top)) return top;
    double s = 0.0;
    for (double v : a) s += std::exp(v - top);
    return top + std::log(s);
}

}  // namespace

OracleEstimate importance_posterior(const PriorModel& model, const Sequence& prompt, const Vec& query,
                                    long n_particles, const McConfig& mc)
{
    if (n_particles < 10000) throw std::invalid_argument("importance oracle needs at least 1e4 particles");
    if (!(model.sigma_x > 0.0) || !(model.sigma_y > 0.0)) throw std::invalid_argument("oracle needs positive sample noise");
    const int d = model.d;
    const int M = model.M();

    // Plain sums over the prompt, written out here rather than shared with the engine.
    double xx = query.squaredNorm(), yy = 0.0;
    Vec sx = query;
    Mat g = Mat::Zero(d, d);
    Vec h = Vec::Zero(d);
    for (std::size_t i = 0; i < prompt.size(); ++i) {
        const Vec& x = prompt.xs[i];
        xx += x.squaredNorm();
        sx += x;
        g += x * x.transpose();
        h += prompt.ys[i] * x;
        yy += prompt.ys[i] * prompt.ys[i];
    }
    const double n = prompt.size() + 1.0;

    std::vector<double> logw(n_particles);
    std::vector<int> comp(n_particles);
    Mat ws(d, n_particles);
    const long blocks = (n_particles + kBlock - 1) / kBlock;
    parallel_for(static_cast<std::size_t>(blocks), mc.workers, [&](std::size_t b) {
        Stream rng(mc.seed, 0x15ULL, b);
        const long lo = static_cast<long>(b) * kBlock;
        const long hi = std::min(n_particles, lo + kBlock);
        for (long i = lo; i < hi; ++i) {
            const TaskDraw t = sample_task(model, rng);
            const double lx = xx - 2.0 * t.mu.dot(sx) + n * t.mu.squaredNorm();
            const double ly = yy - 2.0 * t.w.dot(h) + t.w.dot(g * t.w);
            logw[i] = -lx / (2.0 * model.sigma_x * model.sigma_x) - ly / (2.0 * model.sigma_y * model.sigma_y);
            comp[i] = t.component;
            ws.col(i) = t.w;
        }
    });

    const double lse = log_sum_exp(logw);
    std::vector<double> W(n_particles);
    double w2 = 0.0;
    for (long i = 0; i < n_particles; ++i) {
        W[i] = std::exp(logw[i] - lse);
        w2 += W[i] * W[i];
    }

    OracleEstimate est;
    est.weights = Vec::Zero(M);
    est.w_mean = Vec::Zero(d);
    for (long i = 0; i < n_particles; ++i) {
        est.weights[comp[i]] += W[i];
        est.w_mean += W[i] * ws.col(i);
    }
    est.weights_se = Vec::Zero(M);
    est.w_mean_se = Vec::Zero(d);
    for (long i = 0; i < n_particles; ++i) {
        const double wi2 = W[i] * W[i];
        for (int m = 0; m < M; ++m) {
            const double f = (comp[i] == m ? 1.0 : 0.0) - est.weights[m];
            est.weights_se[m] += wi2 * f * f;
        }
        est.w_mean_se += wi2 * (ws.col(i) - est.w_mean).array().square().matrix();
    }
    est.weights_se = est.weights_se.array().sqrt();
    est.w_mean_se = est.w_mean_se.array().sqrt();
    est.ess = 1.0 / w2;
    est.unreliable = est.ess < 100.0;
    return est;
}

OracleEstimate grid_posterior_1d(const PriorModel& model, const Sequence& prompt, const Vec& query, const GridSpec& grid)
{
    if (model.d != 1) throw std::invalid_argument("grid oracle is one-dimensional");
    if (!(model.sigma_mu > 0.0) || !(model.sigma_w > 0.0) || !(model.sigma_x > 0.0) || !(model.sigma_y > 0.0))
        throw std::invalid_argument("grid oracle needs positive noise scales");
    if (grid.points < 2000) throw std::invalid_argument("grid needs at least 2000 points per axis");
    if (grid.width_sd < 8.0) throw std::invalid_argument("grid must cover at least 8 prior standard deviations");
    const int M = model.M();

    std::vector<double> xs{query[0]};
    for (const auto& x : prompt.xs) xs.push_back(x[0]);
    double xx = 0.0, yy = 0.0, xy = 0.0;
    for (std::size_t i = 0; i < prompt.size(); ++i) {
        xx += prompt.xs[i][0] * prompt.xs[i][0];
        xy += prompt.xs[i][0] * prompt.ys[i];
        yy += prompt.ys[i] * prompt.ys[i];
    }

    auto axis = [&](auto center_of, double sigma) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int m = 0; m < M; ++m) {
            lo = std::min(lo, center_of(m) - grid.width_sd * sigma);
            hi = std::max(hi, center_of(m) + grid.width_sd * sigma);
        }
        std::vector<double> v(grid.points);
        for (int i = 0; i < grid.points; ++i) v[i] = lo + (hi - lo) * i / (grid.points - 1);
        return v;
    };
    const auto mus = axis([&](int m) { return model.components[m].mu[0]; }, model.sigma_mu);
    const auto wsg = axis([&](int m) { return model.components[m].w[0]; }, model.sigma_w);
    const double hmu = mus[1] - mus[0];
    const double hw = wsg[1] - wsg[0];

    const double n = xs.size();
    const double post_sd_mu = model.sigma_mu / std::sqrt(1.0 + n * model.delta_mu());
    const double post_sd_w = model.sigma_w / std::sqrt(1.0 + model.delta_w() * xx);
    if (hmu * grid.min_pts_per_sd > post_sd_mu || hw * grid.min_pts_per_sd > post_sd_w)
        throw std::invalid_argument("grid too coarse relative to the posterior standard deviation");

    auto trap = [&](int i) { return (i == 0 || i == grid.points - 1) ? 0.5 : 1.0; };
    std::vector<double> log_mass(M), w_mean(M);
    std::vector<double> a(grid.points), b(grid.points);
    for (int m = 0; m < M; ++m) {
        const double cm = model.components[m].mu[0];
        const double cw = model.components[m].w[0];
        for (int i = 0; i < grid.points; ++i) {
            const double mu = mus[i];
            double lx = 0.0;
            for (double x : xs) lx += (x - mu) * (x - mu);
            a[i] = std::log(trap(i)) - (mu - cm) * (mu - cm) / (2.0 * model.sigma_mu * model.sigma_mu) -
                   lx / (2.0 * model.sigma_x * model.sigma_x);
            const double w = wsg[i];
            const double ly = yy - 2.0 * w * xy + w * w * xx;
            b[i] = std::log(trap(i)) - (w - cw) * (w - cw) / (2.0 * model.sigma_w * model.sigma_w) -
                   ly / (2.0 * model.sigma_y * model.sigma_y);
        }
        const double la = log_sum_exp(a);
        const double lb = log_sum_exp(b);
        double num = 0.0;
        for (int i = 0; i < grid.points; ++i) num += wsg[i] * std::exp(b[i] - lb);
        w_mean[m] = num;
        log_mass[m] = std::log(model.components[m].pi) + la + lb;
    }

    const double lse = log_sum_exp(log_mass);
    OracleEstimate est;
    est.weights = Vec::Zero(M);
    est.weights_se = Vec::Zero(M);
    est.w_mean = Vec::Zero(1);
    est.w_mean_se = Vec::Zero(1);
    for (int m = 0; m < M; ++m) {
        est.weights[m] = std::exp(log_mass[m] - lse);
        est.w_mean[0] += est.weights[m] * w_mean[m];
    }
    est.ess = std::numeric_limits<double>::infinity();
    return est;
}

ToyPosterior toy_posterior(const ToyPrior1D& prior, const std::vector<double>& samples)
{
    if (prior.pi.size() != prior.mu.size() || prior.pi.empty()) throw std::invalid_argument("toy prior size mismatch");
    const double k = samples.size();
    double sum = 0.0;
    for (double x : samples) sum += x;
    const double s2 = prior.sigma * prior.sigma;
    const double t2 = prior.tau * prior.tau;
    const double den = t2 + k * s2;

    ToyPosterior out;
    std::vector<double> lw;
    for (std::size_t m = 0; m < prior.pi.size(); ++m) {
        double e = 0.0;
        if (k > 0) {
            const double gap = prior.mu[m] - sum / k;
            e = -k * gap * gap / (2.0 * den);
        }
        lw.push_back(std::log(prior.pi[m]) + e);
        out.mu_tilde.push_back((t2 * prior.mu[m] + s2 * sum) / den);
    }
    const double lse = log_sum_exp(lw);
    for (double v : lw) out.pi_tilde.push_back(std::exp(v - lse));
    out.var = t2 * s2 / den;
    return out;
}

void validate_discrete(const DiscreteModel& m)
{
    if (m.M < 2) throw std::invalid_argument("discrete model needs M >= 2");
    if (m.components.empty()) throw std::invalid_argument("discrete model needs components");
    double total = 0.0;
    for (const auto& c : m.components) {
        if (!(c.pi >= 0.0)) throw std::invalid_argument("discrete weights must be non-negative");
        if (c.mu < 0 || c.mu >= m.M || c.w < 0 || c.w >= m.M) throw std::invalid_argument("discrete task out of range");
        total += c.pi;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("discrete weights do not sum to 1");
    for (double s : {m.sigma_mu, m.sigma_x, m.sigma_y})
        if (!(s >= 0.0) || 1.0 - (m.M - 1) * s < 0.0) throw std::invalid_argument("discrete flip rate out of range");
}

int discrete_flip(int center, int M, double sigma, Stream& rng)
{
    const double keep = 1.0 - (M - 1) * sigma;
    const double u = rng.uniform();
    if (u < keep) return center;
    int j = static_cast<int>((u - keep) / sigma);
    j = std::clamp(j, 0, M - 2);
    return j < center ? j : j + 1;
}

DiscreteTask discrete_sample_task(const DiscreteModel& model, Stream& rng)
{
    std::vector<double> pis;
    for (const auto& c : model.components) pis.push_back(c.pi);
    std::discrete_distribution<int> pick(pis.begin(), pis.end());
    const auto& c = model.components[pick(rng.engine())];
    return {discrete_flip(c.mu, model.M, model.sigma_mu, rng), c.w};
}

DiscreteSequence discrete_sample(const DiscreteModel& model, const DiscreteTask& task, int K, Stream& rng)
{
    DiscreteSequence s;
    for (int i = 0; i < K; ++i) {
        const int x = discrete_flip(task.mu, model.M, model.sigma_x, rng);
        s.xs.push_back(x);
        s.ys.push_back(discrete_flip((x + task.w) % model.M, model.M, model.sigma_y, rng));
    }
    return s;
}

DiscreteSequence discrete_sample(const DiscreteModel& model, int K, Stream& rng)
{
    validate_discrete(model);
    const DiscreteTask t = discrete_sample_task(model, rng);
    return discrete_sample(model, t, K, rng);
}

DiscreteSequence discrete_sample_prompt(const DiscreteSource& source, int M, int k, Stream& rng)
{
    DiscreteSequence s;
    for (int i = 0; i < k; ++i) {
        const int x = discrete_flip(source.task.mu, M, source.sigma_x, rng);
        s.xs.push_back(x);
        s.ys.push_back(discrete_flip((x + source.task.w) % M, M, source.sigma_y, rng));
    }
    return s;
}

DiscretePrediction discrete_bayes_predict(const DiscreteModel& model, const DiscreteSequence& prompt, int query)
{
    validate_discrete(model);
    const int M = model.M;
    if (prompt.xs.size() != prompt.ys.size()) throw std::invalid_argument("prompt xs and ys differ in length");
    if (query < 0 || query >= M) throw std::invalid_argument("query token out of range");
    auto lp = [&](bool hit, double sigma) {
        const double p = hit ? 1.0 - (M - 1) * sigma : sigma;
        return p > 0.0 ? std::log(p) : kNegInf;
    };

    std::vector<double> logp(M * M, kNegInf);
    for (int mu = 0; mu < M; ++mu) {
        for (int w = 0; w < M; ++w) {
            double prior = 0.0;
            for (const auto& c : model.components)
                if (c.w == w) prior += c.pi * (mu == c.mu ? 1.0 - (M - 1) * model.sigma_mu : model.sigma_mu);
            if (!(prior > 0.0)) continue;
            double l = std::log(prior) + lp(query == mu, model.sigma_x);
            for (std::size_t i = 0; i < prompt.xs.size() && l > kNegInf; ++i) {
                l += lp(prompt.xs[i] == mu, model.sigma_x);
                l += lp(prompt.ys[i] == (prompt.xs[i] + w) % M, model.sigma_y);
            }
            logp[mu * M + w] = l;
        }
    }
    const double lse = log_sum_exp(logp);
    if (!std::isfinite(lse)) throw std::runtime_error("prompt has zero probability under the discrete model");

    DiscretePrediction out;
    out.task.resize(M * M);
    out.dist.assign(M, 0.0);
    for (int i = 0; i < M * M; ++i) out.task[i] = std::exp(logp[i] - lse);
    for (int mu = 0; mu < M; ++mu)
        for (int w = 0; w < M; ++w) {
            const double p = out.task[mu * M + w];
            if (p == 0.0) continue;
            for (int y = 0; y < M; ++y)
                out.dist[y] += p * (y == (query + w) % M ? 1.0 - (M - 1) * model.sigma_y : model.sigma_y);
        }
    double total = 0.0;
    for (double p : out.dist) total += p;
    for (double& p : out.dist) p /= total;
    out.argmax = static_cast<int>(std::max_element(out.dist.begin(), out.dist.end()) - out.dist.begin());
    return out;
}

RiskPoint discrete_error(const DiscreteModel& model, const DiscreteSource& source, int k, long n_trials,
                         const McConfig& mc)
{
    validate_discrete(model);
    if (n_trials < 1) throw std::invalid_argument("n_trials must be at least 1");
    std::vector<double> err(n_trials);
    parallel_for(static_cast<std::size_t>(n_trials), mc.workers, [&](std::size_t i) {
        Stream rng(mc.seed, static_cast<std::uint64_t>(k), i);
        const DiscreteSequence p = discrete_sample_prompt(source, model.M, k, rng);
        const int q = discrete_flip(source.task.mu, model.M, source.sigma_x, rng);
        const int clean = (q + source.task.w) % model.M;
        err[i] = discrete_bayes_predict(model, p, q).argmax == clean ? 0.0 : 1.0;
    });
    return summarize(k, err);
}

}  // namespace icl
