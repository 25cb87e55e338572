#include "icl/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "icl/parallel.hpp"
#include "icl/posterior.hpp"

namespace icl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_trials(long n)
{
    if (n < 1) throw std::invalid_argument("n_trials must be at least 1");
}

std::vector<double> run_trials(long n, const McConfig& mc, const auto& trial)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    parallel_for(out.size(), mc.workers, [&](std::size_t i) { out[i] = trial(i); });
    return out;
}

RiskPoint target_risk(const PriorModel& model, const InContextSource& source, const Vec& target, int k, long n,
                      const McConfig& mc)
{
    require_trials(n);
    const auto losses = run_trials(n, mc, [&](std::size_t i) {
        Stream rng(mc.seed, static_cast<std::uint64_t>(k), i);
        const Prompt p = sample_incontext_prompt(source, k, rng);
        const double e = predict(model, p.seq, p.query) - p.query.dot(target);
        return e * e;
    });
    return summarize(k, losses);
}

}  // namespace

RiskPoint summarize(int k, const std::vector<double>& values)
{
    RiskPoint r;
    r.k = k;
    r.n_trials = static_cast<long>(values.size());
    if (values.empty()) return r;
    double sum = 0.0;
    for (double v : values) sum += v;
    r.estimate = sum / values.size();
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.estimate) * (v - r.estimate);
        r.std_error = std::sqrt(ss / (values.size() - 1) / values.size());
    }
    return r;
}

RiskPoint mc_learning_risk(const PriorModel& model, const InContextSource& source, int k, long n_trials,
                           const McConfig& mc)
{
    return target_risk(model, source, source.w_star, k, n_trials, mc);
}

RiskPoint mc_retrieval_risk(const PriorModel& model, const InContextSource& source, int alpha, int k,
                            long n_trials, const McConfig& mc)
{
    if (alpha < 0 || alpha >= model.M()) throw std::out_of_range("alpha out of range");
    return target_risk(model, source, model.components[alpha].w, k, n_trials, mc);
}

CoarseBound coarse_bound(const PriorModel& model, const InContextSource& source, int k)
{
    if (k < 1) throw std::invalid_argument("coarse bound needs k >= 1");
    const double dw = model.delta_w();
    if (!(dw > 0.0)) throw std::invalid_argument("coarse bound undefined for delta_w = 0");
    const double tau = source.tau_x;
    if (!(tau > 0.0)) throw std::invalid_argument("coarse bound needs tau_x > 0");
    const double t2 = tau * tau;
    CoarseBound b;
    b.value = 4.0 * (1.0 + model.d * t2) / (t2 * t2 * dw * dw * double(k) * double(k));
    return b;
}

FineBound finegrained_bound(const PriorModel& model, const InContextSource& source, int k, long n_trials,
                            const McConfig& mc)
{
    require_trials(n_trials);
    if (source.tau_y != 0.0 || (source.zero_labels && source.w_star.norm() != 0.0))
        throw std::invalid_argument("finegrained bound needs noiseless labels y = <x, w*>");
    const int M = model.M();
    const int d = model.d;
    const double dw = model.delta_w();
    std::vector<double> terms(static_cast<std::size_t>(n_trials) * M);

    parallel_for(static_cast<std::size_t>(n_trials), mc.workers, [&](std::size_t i) {
        Stream rng(mc.seed, static_cast<std::uint64_t>(k), i);
        const Prompt p = sample_incontext_prompt(source, k, rng);
        const SufficientStats s = sufficient_stats(p.seq, p.query);
        const PosteriorMixture post = posterior(model, s);

        Eigen::SelfAdjointEigenSolver<Mat> eig(s.gram);
        const Vec& lam = eig.eigenvalues();
        const Mat& V = eig.eigenvectors();
        const double tol = 1e-10 * d * std::max(1.0, lam.maxCoeff());
        // The spanned block of the prompt inputs; A is the identity on its complement.
        double lam_min_span = std::numeric_limits<double>::infinity();
        std::vector<bool> span(d);
        for (int j = 0; j < d; ++j) {
            span[j] = lam[j] > tol;
            if (span[j]) lam_min_span = std::min(lam_min_span, lam[j]);
        }
        const double a_span = std::isfinite(lam_min_span) ? 1.0 / (1.0 + dw * lam_min_span) : 1.0;
        const Vec qc = V.transpose() * p.query;
        double q_in = 0.0, q_out = 0.0;
        for (int j = 0; j < d; ++j) (span[j] ? q_in : q_out) += qc[j] * qc[j];

        for (int m = 0; m < M; ++m) {
            const Vec vc = V.transpose() * (model.components[m].w - source.w_star);
            double v_in = 0.0, v_out = 0.0;
            for (int j = 0; j < d; ++j) (span[j] ? v_in : v_out) += vc[j] * vc[j];
            const double f = a_span * std::sqrt(v_in * q_in) + std::sqrt(v_out * q_out);
            terms[i * M + m] = post.pi_tilde[m] * f * f;
        }
    });

    FineBound b;
    b.n_trials = n_trials;
    b.per_component = Vec::Zero(M);
    std::vector<double> totals(static_cast<std::size_t>(n_trials));
    for (long i = 0; i < n_trials; ++i) {
        double t = 0.0;
        for (int m = 0; m < M; ++m) {
            b.per_component[m] += terms[i * M + m];
            t += terms[i * M + m];
        }
        totals[i] = t;
    }
    b.per_component /= double(n_trials);
    const RiskPoint r = summarize(k, totals);
    b.total = r.estimate;
    b.std_error = r.std_error;
    return b;
}

RetrievalMargins compute_margins(const PriorModel& model, const InContextSource& source, int alpha)
{
    if (model.M() < 2) throw std::invalid_argument("margins need at least two components");
    if (alpha < 0 || alpha >= model.M()) throw std::out_of_range("alpha out of range");
    const double t2 = source.tau_x * source.tau_x;
    const auto& a = model.components[alpha];
    const double ma = (a.mu - source.mu_star).squaredNorm();
    const double wa = (a.w - source.w_star).squaredNorm();
    RetrievalMargins r;
    r.alpha = alpha;
    r.d_mu_sq = r.d_w_sq = r.u_w_sq = std::numeric_limits<double>::infinity();
    for (int b = 0; b < model.M(); ++b) {
        if (b == alpha) continue;
        const auto& c = model.components[b];
        const double wb = (c.w - source.w_star).squaredNorm();
        r.d_mu_sq = std::min(r.d_mu_sq, (c.mu - source.mu_star).squaredNorm() - ma);
        r.d_w_sq = std::min(r.d_w_sq, wb - wa);
        r.u_w_sq = std::min(r.u_w_sq, (t2 * wb - (1.0 + t2) * wa) / t2);
    }
    r.applicable = r.d_mu_sq > 0.0 && r.d_w_sq > 0.0 && r.u_w_sq > 0.0;
    return r;
}

EigenEnvelope eigen_envelope(int d, int k, double t, double tau_x)
{
    if (k < 1) throw std::invalid_argument("envelope needs k >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("envelope needs t > 0");
    EigenEnvelope e;
    e.t = t;
    e.gamma = std::sqrt(double(d) / k);
    const double cross = 2.0 * tau_x * e.gamma * std::sqrt(1.0 + t);
    const double lo = 1.0 - t / 2.0 - e.gamma;
    const double hi = 1.0 + t / 2.0 + e.gamma;
    e.L = tau_x * tau_x * lo * lo - cross;
    e.U = 1.0 + tau_x * tau_x * hi * hi + cross;
    e.fail_prob = 3.0 * std::exp(-k * t * t / 8.0);
    e.mean_norm_bound = tau_x * std::sqrt(e.gamma * (1.0 + t));
    e.vacuous = !(e.L > 0.0);
    return e;
}

double c_k0(const PriorModel& model, const InContextSource& source, int alpha, int beta, int k)
{
    const auto& a = model.components[alpha];
    const auto& b = model.components[beta];
    const double t2 = source.tau_x * source.tau_x;
    const double D = (b.mu - source.mu_star).squaredNorm() - (a.mu - source.mu_star).squaredNorm();
    const double E = 2.0 * model.sigma_x * model.sigma_x * (1.0 + (k + 1.0) * model.delta_mu());
    const double bb = 4.0 * (b.mu - a.mu).squaredNorm();
    return 2.0 * (1.0 + t2 * (model.d + t2 * bb / (E * E))) * std::exp(t2 * bb / (2.0 * E * E) - D / E);
}

RetrievalBound retrieval_bound(const PriorModel& model, const InContextSource& source,
                               const RetrievalMargins& mg, int k)
{
    if (!mg.applicable) throw std::invalid_argument("retrieval bound needs positive margins");
    if (k < 1) throw std::invalid_argument("retrieval bound needs k >= 1");
    const double tau = source.tau_x;
    const double t2 = tau * tau;
    const int d = model.d;
    const double dm = model.delta_mu();
    const double dw = model.delta_w();
    const double r = model.weight_ratio();
    const auto& a = model.components[mg.alpha];
    const double wa = (a.w - source.w_star).squaredNorm();

    double c_sum = 0.0;
    for (int b = 0; b < model.M(); ++b)
        if (b != mg.alpha) c_sum += c_k0(model, source, mg.alpha, b, k);

    RetrievalBound out;
    const double sx2 = model.sigma_x * model.sigma_x;
    const double sy2 = model.sigma_y * model.sigma_y;
    out.t1 = 16.0 * r * c_sum * std::exp(-k * (mg.d_mu_sq / (8.0 * sx2) + mg.u_w_sq * t2 / (8.0 * sy2)));
    out.t2 = 48.0 * (1.0 + d * t2) * std::exp(-std::sqrt(double(k)) / 8.0);
    const double g = 2.0 * k * dw * (1.0 + t2);
    out.t3 = wa * (1.0 + d * t2) * std::min(1.0, g * g);
    out.nonasymptotic = out.t1 + out.t2 + out.t3;

    if (model.sigma_mu > 0.0 && model.sigma_w > 0.0 && dw > 0.0 && tau > 0.0) {
        const double smu2 = 2.0 * model.sigma_mu * model.sigma_mu;
        const double sw2 = 2.0 * model.sigma_w * model.sigma_w;
        out.asymptotic = wa * (1.0 + d * t2) + 8.0 * r * c_sum / (k * dw * t2) *
                                                    std::exp((-mg.d_mu_sq + 4.0 * tau * std::sqrt(double(d) / k)) / smu2) *
                                                    std::exp(-mg.d_w_sq / sw2);
    } else {
        out.asymptotic = kNaN;
    }

    const double tk = std::pow(double(k), -0.25);
    const EigenEnvelope env = eigen_envelope(d, k, tk, tau);
    double cap = std::numeric_limits<double>::infinity();
    if (dm > 0.0) cap = std::min(cap, 1.0 / dm - 1.0);
    if (dw > 0.0 && t2 > 0.0) cap = std::min(cap, 1.0 / (dw * t2));
    out.k_cap_ok = k <= cap;
    out.mu_gap_ok = 4.0 * tau * env.gamma * std::sqrt(1.0 + tk) < mg.d_mu_sq / 2.0;
    out.w_gap_ok = true;
    for (int b = 0; b < model.M(); ++b) {
        if (b == mg.alpha) continue;
        const double wb = (model.components[b].w - source.w_star).squaredNorm();
        if (!(env.L * wb - env.U * wa > t2 * mg.u_w_sq / 2.0)) out.w_gap_ok = false;
    }
    out.u_ok = env.U < 2.0 * (1.0 + t2);
    out.interval_ok = out.k_cap_ok && out.mu_gap_ok && out.w_gap_ok && out.u_ok;
    return out;
}

ZeroShotBound zero_shot_bound(const PriorModel& model, const InContextSource& source, int k)
{
    if (model.M() != 2) throw std::invalid_argument("zero-shot bound needs exactly two components");
    const auto& c0 = model.components[0];
    const auto& c1 = model.components[1];
    if ((c0.mu + c1.mu).norm() > 1e-12 || (c0.w + c1.w).norm() > 1e-12)
        throw std::invalid_argument("zero-shot bound needs antipodal components");
    const bool zero = source.zero_labels || (source.w_star.norm() == 0.0 && source.tau_y == 0.0);
    if (!zero) throw std::invalid_argument("zero-shot bound needs prompt labels y_i = 0");
    if (k < 0) throw std::invalid_argument("k must be non-negative");

    ZeroShotBound out;
    out.alpha = (c0.mu - source.mu_star).squaredNorm() <= (c1.mu - source.mu_star).squaredNorm() ? 0 : 1;
    const int beta = 1 - out.alpha;
    const double tau = source.tau_x;
    const double t2 = tau * tau;
    const int d = model.d;
    const double d_mu_sq = (model.components[beta].mu - source.mu_star).squaredNorm() -
                           (model.components[out.alpha].mu - source.mu_star).squaredNorm();
    const double r = model.weight_ratio();
    out.t1 = 9.0 * r * c_k0(model, source, out.alpha, beta, k) *
             std::exp(-d_mu_sq * k / (8.0 * model.sigma_x * model.sigma_x));
    out.t2 = 12.0 * (1.0 + d * t2) * std::exp(-std::sqrt(double(k)) / 8.0);
    const double g = 2.0 * k * model.delta_w() * (1.0 + t2);
    out.t3 = (1.0 + d * t2) * std::min(1.0, g * g);
    out.total = out.t1 + out.t2 + out.t3;

    if (k >= 1) {
        const double tk = std::pow(double(k), -0.25);
        const EigenEnvelope env = eigen_envelope(d, k, tk, tau);
        const double dm = model.delta_mu();
        const bool cap_ok = dm > 0.0 ? k <= 1.0 / dm - 1.0 : true;
        const bool gap_ok = 4.0 * tau * env.gamma * std::sqrt(1.0 + tk) < d_mu_sq / 2.0;
        out.interval_ok = cap_ok && gap_ok && env.U < 2.0 * (1.0 + t2);
    }
    return out;
}

ViolationRate eigen_violation_rate(const InContextSource& source, int k, double t, long n_trials, const McConfig& mc)
{
    require_trials(n_trials);
    const int d = static_cast<int>(source.mu_star.size());
    const EigenEnvelope env = eigen_envelope(d, k, t, source.tau_x);
    const auto hits = run_trials(n_trials, mc, [&](std::size_t i) {
        Stream rng(mc.seed, static_cast<std::uint64_t>(k), i);
        const Prompt p = sample_incontext_prompt(source, k, rng);
        Mat g = Mat::Zero(d, d);
        Vec mean = Vec::Zero(d);
        for (const auto& x : p.seq.xs) {
            g.noalias() += x * x.transpose();
            mean += x;
        }
        g /= double(k);
        mean /= double(k);
        const Vec lam = Eigen::SelfAdjointEigenSolver<Mat>(g, Eigen::EigenvaluesOnly).eigenvalues();
        const bool inside = lam.minCoeff() > env.L && lam.maxCoeff() < env.U &&
                            (mean - source.mu_star).norm() < env.mean_norm_bound;
        return inside ? 0.0 : 1.0;
    });
    ViolationRate v;
    v.n_trials = n_trials;
    double s = 0.0;
    for (double h : hits) s += h;
    v.rate = s / n_trials;
    v.std_error = std::sqrt(v.rate * (1.0 - v.rate) / n_trials);
    return v;
}

double ridge_predict(const Sequence& prompt, const Vec& query, double lambda)
{
    if (!(lambda > 0.0)) throw std::invalid_argument("ridge needs lambda > 0");
    const SufficientStats s = sufficient_stats(prompt, query);
    Mat A = s.gram;
    A.diagonal().array() += lambda;
    const Vec w = A.ldlt().solve(s.sum_xy);
    return query.dot(w);
}

std::vector<RidgePoint> ridge_vs_icl_curve(const PriorModel& model, const std::vector<int>& ks, double lambda,
                                           long n_trials, const McConfig& mc)
{
    require_trials(n_trials);
    std::vector<RidgePoint> out;
    for (int k : ks) {
        std::vector<double> icl(n_trials), ridge(n_trials), diff(n_trials);
        parallel_for(static_cast<std::size_t>(n_trials), mc.workers, [&](std::size_t i) {
            Stream rng(mc.seed, static_cast<std::uint64_t>(k), i);
            const TaskDraw task = sample_task(model, rng);
            InContextSource src;
            src.mu_star = task.mu;
            src.w_star = task.w;
            src.tau_x = model.sigma_x;
            const Prompt p = sample_incontext_prompt(src, k, rng);
            const double truth = p.query.dot(task.w);
            const double ei = predict(model, p.seq, p.query) - truth;
            const double er = ridge_predict(p.seq, p.query, lambda) - truth;
            icl[i] = ei * ei;
            ridge[i] = er * er;
            diff[i] = ridge[i] - icl[i];
        });
        RidgePoint pt;
        pt.k = k;
        pt.icl = summarize(k, icl);
        pt.ridge = summarize(k, ridge);
        const RiskPoint dp = summarize(k, diff);
        pt.diff = dp.estimate;
        pt.diff_std_error = dp.std_error;
        out.push_back(pt);
    }
    return out;
}

EarlyAscentLimit early_ascent_limit(const PriorModel& model, const InContextSource& source, long n_trials,
                                    const McConfig& mc)
{
    const double t2 = source.tau_x * source.tau_x;
    const double sx2 = 2.0 * model.sigma_x * model.sigma_x;
    const double sy2 = 2.0 * model.sigma_y * model.sigma_y;
    EarlyAscentLimit out;
    double best = std::numeric_limits<double>::infinity();
    for (int m = 0; m < model.M(); ++m) {
        const auto& c = model.components[m];
        const Vec dwv = c.w - source.w_star;
        const double proj = dwv.dot(source.mu_star);
        const double score =
            (c.mu - source.mu_star).squaredNorm() / sx2 + (proj * proj + model.d * t2 * dwv.squaredNorm()) / sy2;
        if (score < best) {
            best = score;
            out.alpha_star = m;
        }
    }
    const Vec dwv = model.components[out.alpha_star].w - source.w_star;
    const double proj = dwv.dot(source.mu_star);
    out.limit_risk = proj * proj + t2 * dwv.squaredNorm();
    out.zero_shot_risk = mc_learning_risk(model, source, 0, n_trials, mc).estimate;
    out.ascent_predicted = out.zero_shot_risk < out.limit_risk;
    return out;
}

}  // namespace icl
