#include "icl/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace icl {

namespace {

bool finite(const Vec& v) { return v.allFinite(); }

void require_finite(double v, const char* name)
{
    if (!std::isfinite(v)) throw std::invalid_argument(std::string("non-finite ") + name);
}

double ratio_sq(double num, double den)
{
    if (num == 0.0) return 0.0;
    return (num * num) / (den * den);
}

}  // namespace

double PriorModel::delta_mu() const { return ratio_sq(sigma_mu, sigma_x); }
double PriorModel::delta_w() const { return ratio_sq(sigma_w, sigma_y); }

double PriorModel::weight_ratio() const
{
    double lo = 1.0, hi = 0.0;
    for (const auto& c : components) {
        lo = std::min(lo, c.pi);
        hi = std::max(hi, c.pi);
    }
    return hi / lo;
}

bool ValidationReport::ok() const
{
    for (const auto& i : issues)
        if (i.severity == Severity::error) return false;
    return true;
}

std::string ValidationReport::str() const
{
    std::ostringstream os;
    for (const auto& i : issues) os << (i.severity == Severity::error ? "error: " : "warning: ") << i.what << '\n';
    return os.str();
}

ValidationReport validate_prior(const PriorModel& m, bool strict)
{
    require_finite(m.sigma_mu, "sigma_mu");
    require_finite(m.sigma_w, "sigma_w");
    require_finite(m.sigma_x, "sigma_x");
    require_finite(m.sigma_y, "sigma_y");
    for (const auto& c : m.components) {
        require_finite(c.pi, "pi");
        if (!finite(c.mu) || !finite(c.w)) throw std::invalid_argument("non-finite component center");
    }

    ValidationReport rep;
    auto err = [&](std::string s) { rep.issues.push_back({Severity::error, std::move(s)}); };
    auto warn = [&](std::string s) { rep.issues.push_back({Severity::warning, std::move(s)}); };

    if (m.d < 1) err("d must be positive");
    if (m.components.empty()) err("at least one component required");

    double total = 0.0;
    for (std::size_t i = 0; i < m.components.size(); ++i) {
        const auto& c = m.components[i];
        const std::string tag = "component " + std::to_string(i + 1);
        if (c.mu.size() != m.d || c.w.size() != m.d) err(tag + ": center dimension mismatch");
        if (!(c.pi > 0.0)) err(tag + ": pi must be positive");
        total += c.pi;
        if (c.mu.size() == m.d && c.w.size() == m.d) {
            const bool unit = std::abs(c.mu.norm() - 1.0) <= 1e-9 && std::abs(c.w.norm() - 1.0) <= 1e-9;
            if (!unit) {
                const std::string s = tag + ": mu/w not unit norm";
                strict ? err(s) : warn(s);
            }
        }
    }
    if (!m.components.empty() && std::abs(total - 1.0) > 1e-12) err("mixture weights do not sum to 1");

    if (m.sigma_mu < 0 || m.sigma_w < 0 || m.sigma_x < 0 || m.sigma_y < 0) err("noise scales must be non-negative");
    if (!std::isfinite(m.delta_mu())) err("delta_mu is not finite (sigma_x = 0 with sigma_mu > 0)");
    if (!std::isfinite(m.delta_w())) err("delta_w is not finite (sigma_y = 0 with sigma_w > 0)");
    if (m.M() > 1 && (m.sigma_x == 0.0 || m.sigma_y == 0.0))
        warn("zero sample noise: mixture posterior undefined for M > 1");
    return rep;
}

ValidationReport validate_source(const InContextSource& s, int d, bool strict)
{
    require_finite(s.tau_x, "tau_x");
    require_finite(s.tau_y, "tau_y");
    if (!finite(s.mu_star) || !finite(s.w_star)) throw std::invalid_argument("non-finite source task");

    ValidationReport rep;
    if (s.mu_star.size() != d || s.w_star.size() != d)
        rep.issues.push_back({Severity::error, "source dimension mismatch"});
    if (s.tau_x < 0 || s.tau_y < 0) rep.issues.push_back({Severity::error, "tau_x and tau_y must be non-negative"});
    if (s.mu_star.size() == d && s.w_star.size() == d) {
        const bool unit = std::abs(s.mu_star.norm() - 1.0) <= 1e-9 && std::abs(s.w_star.norm() - 1.0) <= 1e-9;
        if (!unit)
            rep.issues.push_back({strict ? Severity::error : Severity::warning, "source mu*/w* not unit norm"});
    }
    return rep;
}

TaskDraw sample_task(const PriorModel& model, Stream& rng)
{
    std::vector<double> pis;
    pis.reserve(model.components.size());
    for (const auto& c : model.components) pis.push_back(c.pi);
    std::discrete_distribution<int> pick(pis.begin(), pis.end());

    TaskDraw t;
    t.component = pick(rng.engine());
    const auto& c = model.components[t.component];
    t.mu = c.mu;
    t.w = c.w;
    for (int i = 0; i < model.d; ++i) t.mu[i] += model.sigma_mu * rng.normal();
    for (int i = 0; i < model.d; ++i) t.w[i] += model.sigma_w * rng.normal();
    return t;
}

PretrainingDraw sample_pretraining_sequence(const PriorModel& model, int K, Stream& rng)
{
    if (K < 1) throw std::invalid_argument("K must be at least 1");
    PretrainingDraw out;
    out.task = sample_task(model, rng);
    out.seq.xs.reserve(K);
    out.seq.ys.reserve(K);
    for (int i = 0; i < K; ++i) {
        Vec x = out.task.mu;
        for (int j = 0; j < model.d; ++j) x[j] += model.sigma_x * rng.normal();
        const double y = x.dot(out.task.w) + model.sigma_y * rng.normal();
        out.seq.xs.push_back(std::move(x));
        out.seq.ys.push_back(y);
    }
    return out;
}

Prompt sample_incontext_prompt(const InContextSource& s, int k, Stream& rng)
{
    if (k < 0) throw std::invalid_argument("k must be non-negative");
    const auto d = s.mu_star.size();
    Prompt p;
    p.seq.xs.reserve(k);
    p.seq.ys.reserve(k);
    for (int i = 0; i < k; ++i) {
        Vec x = s.mu_star;
        for (Eigen::Index j = 0; j < d; ++j) x[j] += s.tau_x * rng.normal();
        // The label noise draw is always consumed so tau_y sweeps share inputs.
        const double eps = rng.normal();
        const double y = s.zero_labels ? 0.0 : x.dot(s.w_star) + s.tau_y * eps;
        p.seq.xs.push_back(std::move(x));
        p.seq.ys.push_back(y);
    }
    p.query = s.mu_star;
    for (Eigen::Index j = 0; j < d; ++j) p.query[j] += s.tau_x * rng.normal();
    return p;
}

}  // namespace icl
