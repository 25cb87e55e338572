#include "icl/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace icl {

namespace {

void check_index(const PriorModel& m, int a, int b)
{
    if (a < 0 || b < 0 || a >= m.M() || b >= m.M()) throw std::out_of_range("component index out of range");
    if (a == b) throw std::invalid_argument("alpha and beta must differ");
}

void check_dims(const PriorModel& m, const SufficientStats& s)
{
    if (s.sum_x.size() != m.d || s.gram.rows() != m.d || s.gram.cols() != m.d || s.sum_xy.size() != m.d)
        throw std::invalid_argument("statistics dimension does not match the model");
}

Eigen::LLT<Mat> factor(const PriorModel& m, const SufficientStats& s)
{
    Mat B = Mat::Identity(m.d, m.d);
    if (m.delta_w() > 0.0) B.noalias() += m.delta_w() * s.gram;
    Eigen::LLT<Mat> llt(B);
    if (llt.info() != Eigen::Success) throw std::runtime_error("internal error: I + delta_w * gram is not positive definite");
    return llt;
}

// Evidence exponents in a form that stays finite as sigma_mu or sigma_w -> 0.
// Algebraically identical to
//   -(|mu|^2 - |mu + dm S|^2 / (1 + n dm)) / (2 sigma_mu^2)
//   -(|w|^2 - (w + dw h)^T B^-1 (w + dw h)) / (2 sigma_w^2).
LogWeightParts parts_with(const PriorModel& m, const SufficientStats& s, const Eigen::LLT<Mat>& llt)
{
    LogWeightParts p;
    p.mu = Vec::Zero(m.M());
    p.w = Vec::Zero(m.M());
    if (m.M() == 1) return p;
    if (!(m.sigma_x > 0.0) || !(m.sigma_y > 0.0))
        throw std::invalid_argument("mixture posterior needs positive sigma_x and sigma_y");

    const double n = s.k + 1.0;
    const double dm = m.delta_mu();
    const double dw = m.delta_w();
    const double mu_den = 2.0 * m.sigma_x * m.sigma_x * (1.0 + n * dm);
    const double ss = s.sum_x.squaredNorm();
    const Vec g = llt.solve(s.sum_xy);
    const double hg = s.sum_xy.dot(g);
    for (int c = 0; c < m.M(); ++c) {
        const Vec& mu = m.components[c].mu;
        const Vec& w = m.components[c].w;
        p.mu[c] = -(n * mu.squaredNorm() - 2.0 * s.sum_x.dot(mu) - dm * ss) / mu_den;
        const Vec z = llt.solve(w);
        const Vec gw = s.gram * w;
        p.w[c] = -(z.dot(gw) - 2.0 * s.sum_xy.dot(z) - dw * hg) / (2.0 * m.sigma_y * m.sigma_y);
    }
    return p;
}

}  // namespace

SufficientStats sufficient_stats(const Sequence& prompt, const Vec& query)
{
    const Eigen::Index d = query.size();
    if (prompt.xs.size() != prompt.ys.size()) throw std::invalid_argument("prompt xs and ys differ in length");
    for (const auto& x : prompt.xs)
        if (x.size() != d) throw std::invalid_argument("prompt input dimension mismatch");
    for (std::size_t i = 0; i < prompt.size(); ++i)
        if (!prompt.xs[i].allFinite() || !std::isfinite(prompt.ys[i])) throw std::invalid_argument("non-finite prompt entry");

    std::vector<std::size_t> order(prompt.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& xa = prompt.xs[a];
        const auto& xb = prompt.xs[b];
        for (Eigen::Index j = 0; j < d; ++j)
            if (xa[j] != xb[j]) return xa[j] < xb[j];
        return prompt.ys[a] < prompt.ys[b];
    });

    SufficientStats s;
    s.k = static_cast<int>(prompt.size());
    s.sum_x = Vec::Zero(d);
    s.gram = Mat::Zero(d, d);
    s.sum_xy = Vec::Zero(d);
    for (std::size_t i : order) {
        const Vec& x = prompt.xs[i];
        s.sum_x += x;
        s.gram.noalias() += x * x.transpose();
        s.sum_xy += prompt.ys[i] * x;
    }
    s.sum_x += query;
    return s;
}

LogWeightParts reweight_parts(const PriorModel& model, const SufficientStats& stats)
{
    check_dims(model, stats);
    return parts_with(model, stats, factor(model, stats));
}

Vec reweight_log(const PriorModel& model, const SufficientStats& stats)
{
    const LogWeightParts p = reweight_parts(model, stats);
    Vec l(model.M());
    for (int c = 0; c < model.M(); ++c) l[c] = std::log(model.components[c].pi) + p.mu[c] + p.w[c];
    return l;
}

ShiftedComponents shift_components(const PriorModel& model, const SufficientStats& stats)
{
    check_dims(model, stats);
    const auto llt = factor(model, stats);
    const double n = stats.k + 1.0;
    const double dm = model.delta_mu();
    const double dw = model.delta_w();
    ShiftedComponents out;
    for (const auto& c : model.components) {
        out.mu_tilde.push_back((c.mu + dm * stats.sum_x) / (1.0 + n * dm));
        if (dw > 0.0)
            out.w_tilde.push_back(llt.solve(c.w + dw * stats.sum_xy));
        else
            out.w_tilde.push_back(c.w);
    }
    return out;
}

Vec normalize_log_weights(const Vec& log_w)
{
    const double top = log_w.maxCoeff();
    if (!std::isfinite(top)) throw std::runtime_error("log weights have no finite maximum");
    const double lse = top + std::log((log_w.array() - top).exp().sum());
    return log_w.array() - lse;
}

PosteriorMixture posterior(const PriorModel& model, const SufficientStats& stats)
{
    check_dims(model, stats);
    const auto llt = factor(model, stats);
    const LogWeightParts parts = parts_with(model, stats, llt);
    const double n = stats.k + 1.0;
    const double dm = model.delta_mu();
    const double dw = model.delta_w();

    PosteriorMixture post;
    Vec l(model.M());
    for (int c = 0; c < model.M(); ++c) l[c] = std::log(model.components[c].pi) + parts.mu[c] + parts.w[c];
    post.log_weights = normalize_log_weights(l);
    post.pi_tilde = post.log_weights.array().exp();

    post.w_tilde = Vec::Zero(model.d);
    for (int c = 0; c < model.M(); ++c) {
        const auto& comp = model.components[c];
        post.mu_tilde.push_back((comp.mu + dm * stats.sum_x) / (1.0 + n * dm));
        post.w_tilde_m.push_back(dw > 0.0 ? Vec(llt.solve(comp.w + dw * stats.sum_xy)) : comp.w);
        post.w_tilde += post.pi_tilde[c] * post.w_tilde_m.back();
    }
    post.mu_posterior_var = model.sigma_mu * model.sigma_mu / (1.0 + n * dm);
    post.w_posterior_cov = model.sigma_w * model.sigma_w * llt.solve(Mat::Identity(model.d, model.d));
    return post;
}

PosteriorMixture posterior(const PriorModel& model, const Sequence& prompt, const Vec& query)
{
    return posterior(model, sufficient_stats(prompt, query));
}

double predict(const PriorModel& model, const Sequence& prompt, const Vec& query)
{
    return query.dot(posterior(model, prompt, query).w_tilde);
}

double psi_mu(const PriorModel& model, const SufficientStats& stats, int alpha, int beta)
{
    check_index(model, alpha, beta);
    check_dims(model, stats);
    const Vec& ma = model.components[alpha].mu;
    const Vec& mb = model.components[beta].mu;
    const double n = stats.k + 1.0;
    // sum_i |mb - x_i|^2 - |ma - x_i|^2 expanded over the k + 1 inputs
    const double diff = n * (mb.squaredNorm() - ma.squaredNorm()) - 2.0 * stats.sum_x.dot(mb - ma);
    return diff / (2.0 * model.sigma_x * model.sigma_x * (1.0 + n * model.delta_mu()));
}

double psi_w(const PriorModel& model, const SufficientStats& stats, int alpha, int beta)
{
    check_index(model, alpha, beta);
    check_dims(model, stats);
    const auto llt = factor(model, stats);
    const Vec& wa = model.components[alpha].w;
    const Vec& wb = model.components[beta].w;
    // The h^T B^-1 h term is common to both components and cancels.
    auto q = [&](const Vec& w) {
        const Vec z = llt.solve(w);
        return z.dot(stats.gram * w) - 2.0 * stats.sum_xy.dot(z);
    };
    return (q(wb) - q(wa)) / (2.0 * model.sigma_y * model.sigma_y);
}

double log_ratio(const PriorModel& model, const SufficientStats& stats, int alpha, int beta)
{
    check_index(model, alpha, beta);
    return std::log(model.components[alpha].pi / model.components[beta].pi) + psi_mu(model, stats, alpha, beta) +
           psi_w(model, stats, alpha, beta);
}

double ratio(const PriorModel& model, const SufficientStats& stats, int alpha, int beta)
{
    return std::exp(log_ratio(model, stats, alpha, beta));
}

PsiLimits psi_limits(const PriorModel& model, const InContextSource& source, int alpha, int beta)
{
    check_index(model, alpha, beta);
    const auto& a = model.components[alpha];
    const auto& b = model.components[beta];
    auto lim = [](double gap, double sigma) {
        if (gap == 0.0) return 0.0;
        return gap / (2.0 * sigma * sigma);
    };
    PsiLimits out;
    out.limit_mu = lim((b.mu - source.mu_star).squaredNorm() - (a.mu - source.mu_star).squaredNorm(), model.sigma_mu);
    out.limit_w = lim((b.w - source.w_star).squaredNorm() - (a.w - source.w_star).squaredNorm(), model.sigma_w);
    return out;
}

}  // namespace icl
