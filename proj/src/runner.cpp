#include "icl/runner.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "icl/oracles.hpp"
#include "icl/parallel.hpp"
#include "icl/risk.hpp"
#include "icl/scenarios.hpp"

namespace icl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRidgeLambda = 1e-6;

McConfig mc_of(const ExperimentConfig& cfg) { return {cfg.seed, cfg.workers}; }

CsvRow row(int k, const std::string& metric, double value, double se, std::optional<int> comp = {},
           std::string extra = {})
{
    return {k, metric, value, se, comp, std::move(extra)};
}

CsvRow risk_row(const std::string& metric, const RiskPoint& r, std::string extra = {})
{
    return row(r.k, metric, r.estimate, r.std_error, {}, std::move(extra));
}

CsvRow nan_row(int k, const std::string& metric, std::string why, std::optional<int> comp = {})
{
    return row(k, metric, kNaN, kNaN, comp, std::move(why));
}

Scenario load_scenario(const ExperimentConfig& cfg)
{
    if (is_discrete_scenario(cfg.scenario))
        throw std::invalid_argument("scenario '" + cfg.scenario + "' is only valid with --command discrete-ascent");
    Scenario s = make_scenario(cfg.scenario, {cfg.sigma_mu, cfg.sigma_w, cfg.tau_y});
    const ValidationReport pr = validate_prior(s.prior, cfg.strict);
    if (!pr.ok()) throw std::invalid_argument("scenario prior fails validation:\n" + pr.str());
    const ValidationReport sr = validate_source(s.source, s.prior.d, cfg.strict);
    if (!sr.ok()) throw std::invalid_argument("scenario source fails validation:\n" + sr.str());
    return s;
}

std::string kv(const std::string& key, double v) { return key + "=" + format_number(v); }

RunResult posterior_trace(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    const int M = s.prior.M();
    const int alpha = s.retrieval_alpha.value_or(0);
    const std::size_t n = static_cast<std::size_t>(cfg.n_trials);
    for (int k : cfg.k_grid) {
        // per trial: M weights, M distances, then psi_mu and psi_w per competitor
        const int width = 4 * M;
        std::vector<double> vals(n * width, 0.0);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            Stream rng(cfg.seed, static_cast<std::uint64_t>(k), i);
            const Prompt p = sample_incontext_prompt(s.source, k, rng);
            const SufficientStats st = sufficient_stats(p.seq, p.query);
            const PosteriorMixture post = posterior(s.prior, st);
            double* v = &vals[i * width];
            for (int m = 0; m < M; ++m) {
                v[m] = post.pi_tilde[m];
                v[M + m] = (post.w_tilde_m[m] - s.source.w_star).norm();
                if (m == alpha) continue;
                v[2 * M + m] = psi_mu(s.prior, st, alpha, m);
                v[3 * M + m] = psi_w(s.prior, st, alpha, m);
            }
        });
        auto column = [&](int c) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = vals[i * width + c];
            return summarize(k, col);
        };
        for (int m = 0; m < M; ++m) {
            const RiskPoint r = column(m);
            out.rows.push_back(row(k, "pi_tilde", r.estimate, r.std_error, m));
        }
        for (int m = 0; m < M; ++m) {
            const RiskPoint r = column(M + m);
            out.rows.push_back(row(k, "dist_w_tilde", r.estimate, r.std_error, m));
        }
        for (int m = 0; m < M; ++m) {
            if (m == alpha) continue;
            const PsiLimits lim = psi_limits(s.prior, s.source, alpha, m);
            const std::string a = "alpha=" + std::to_string(alpha + 1) + ";";
            const RiskPoint pm = column(2 * M + m);
            const RiskPoint pw = column(3 * M + m);
            out.rows.push_back(row(k, "psi_mu", pm.estimate, pm.std_error, m, a + kv("limit", lim.limit_mu)));
            out.rows.push_back(row(k, "psi_w", pw.estimate, pw.std_error, m, a + kv("limit", lim.limit_w)));
        }
    }
    return out;
}

void fine_rows(RunResult& out, const ExperimentConfig& cfg, const Scenario& s, int k)
{
    if (s.source.tau_y != 0.0) {
        out.rows.push_back(nan_row(k, "bound_fine", "needs noiseless labels"));
        return;
    }
    const FineBound f = finegrained_bound(s.prior, s.source, k, cfg.n_trials, mc_of(cfg));
    out.rows.push_back(row(k, "bound_fine", f.total, f.std_error));
}

RunResult risk_curve(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    for (int k : cfg.k_grid) {
        out.rows.push_back(risk_row("risk_learning", mc_learning_risk(s.prior, s.source, k, cfg.n_trials, mc_of(cfg))));
        if (s.retrieval_alpha)
            out.rows.push_back(risk_row("risk_retrieval",
                                        mc_retrieval_risk(s.prior, s.source, *s.retrieval_alpha, k, cfg.n_trials, mc_of(cfg)),
                                        "alpha=" + std::to_string(*s.retrieval_alpha + 1)));
        if (k < 1)
            out.rows.push_back(nan_row(k, "bound_coarse", "needs k >= 1"));
        else if (!(s.prior.delta_w() > 0.0) || !(s.source.tau_x > 0.0))
            out.rows.push_back(nan_row(k, "bound_coarse", "needs delta_w > 0 and tau_x > 0"));
        else
            out.rows.push_back(row(k, "bound_coarse", coarse_bound(s.prior, s.source, k).value, 0.0, {},
                                   "remainder_omitted"));
        fine_rows(out, cfg, s, k);
    }
    return out;
}

RunResult early_ascent_cmd(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    const EarlyAscentLimit lim = early_ascent_limit(s.prior, s.source, cfg.n_trials, mc_of(cfg));
    std::ostringstream os;
    os << "most misleading component " << lim.alpha_star + 1 << ", limit risk " << format_number(lim.limit_risk)
       << ", zero-shot risk " << format_number(lim.zero_shot_risk)
       << ", ascent predicted: " << (lim.ascent_predicted ? "yes" : "no");
    out.summary.push_back(os.str());
    out.notes.push_back(os.str());
    double r0 = kNaN, peak = -1.0;
    int peak_k = -1;
    for (int k : cfg.k_grid) {
        const RiskPoint r = mc_learning_risk(s.prior, s.source, k, cfg.n_trials, mc_of(cfg));
        if (k == 0) r0 = r.estimate;
        if (k > 0 && r.estimate > peak) {
            peak = r.estimate;
            peak_k = k;
        }
        out.rows.push_back(risk_row("risk_learning", r));
        fine_rows(out, cfg, s, k);
    }
    if (std::isfinite(r0) && peak_k > 0) {
        out.summary.push_back("risk(0) = " + format_number(r0) + ", max over k >= 1 is " + format_number(peak) +
                              " at k = " + std::to_string(peak_k));
    }
    return out;
}

RunResult bounded_efficacy_cmd(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    const int alpha = s.retrieval_alpha.value_or(0);
    const RetrievalMargins mg = compute_margins(s.prior, s.source, alpha);
    const std::string a = "alpha=" + std::to_string(alpha + 1);
    for (int k : cfg.k_grid) {
        out.rows.push_back(
            risk_row("risk_retrieval", mc_retrieval_risk(s.prior, s.source, alpha, k, cfg.n_trials, mc_of(cfg)), a));
        out.rows.push_back(risk_row("risk_learning", mc_learning_risk(s.prior, s.source, k, cfg.n_trials, mc_of(cfg))));
        const char* names[3] = {"bound_retrieval_t1", "bound_retrieval_t2", "bound_retrieval_t3"};
        if (!mg.applicable || k < 1) {
            const std::string why = !mg.applicable ? "margins not all positive" : "needs k >= 1";
            for (const char* nm : names) out.rows.push_back(nan_row(k, nm, why));
            continue;
        }
        const RetrievalBound b = retrieval_bound(s.prior, s.source, mg, k);
        const std::string ex = a + ";interval_ok=" + (b.interval_ok ? "1" : "0") + ";" + kv("nonasymptotic", b.nonasymptotic) +
                               ";" + kv("asymptotic", b.asymptotic);
        out.rows.push_back(row(k, names[0], b.t1, 0.0, {}, ex));
        out.rows.push_back(row(k, names[1], b.t2, 0.0, {}, ex));
        out.rows.push_back(row(k, names[2], b.t3, 0.0, {}, ex));
    }
    return out;
}

RunResult zero_shot_cmd(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    for (int k : cfg.k_grid) {
        std::optional<ZeroShotBound> b;
        std::string why;
        try {
            b = zero_shot_bound(s.prior, s.source, k);
        } catch (const std::invalid_argument& e) {
            why = e.what();
        }
        const int alpha = b ? b->alpha : s.retrieval_alpha.value_or(0);
        const std::string a = "alpha=" + std::to_string(alpha + 1);
        out.rows.push_back(
            risk_row("risk_retrieval", mc_retrieval_risk(s.prior, s.source, alpha, k, cfg.n_trials, mc_of(cfg)), a));
        if (b)
            out.rows.push_back(row(k, "bound_zeroshot", b->total, 0.0, {},
                                   a + ";interval_ok=" + (b->interval_ok ? "1" : "0") + ";" + kv("t1", b->t1) + ";" +
                                       kv("t2", b->t2) + ";" + kv("t3", b->t3)));
        else
            out.rows.push_back(nan_row(k, "bound_zeroshot", why));
    }
    return out;
}

RunResult ridge_cmd(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    const auto curve = ridge_vs_icl_curve(s.prior, cfg.k_grid, kRidgeLambda, cfg.n_trials, mc_of(cfg));
    for (const auto& p : curve) {
        const std::string ex = kv("diff", p.diff) + ";" + kv("diff_stderr", p.diff_std_error);
        out.rows.push_back(risk_row("risk_learning", p.icl, ex));
        out.rows.push_back(risk_row("ridge_risk", p.ridge, ex));
    }
    return out;
}

RunResult discrete_cmd(const ExperimentConfig& cfg)
{
    if (!is_discrete_scenario(cfg.scenario))
        throw std::invalid_argument("discrete-ascent needs --scenario discrete-ascent");
    const DiscreteScenario s = discrete_ascent();
    RunResult out;
    for (int k : cfg.k_grid)
        out.rows.push_back(
            risk_row("risk_learning", discrete_error(s.model, s.source, k, cfg.n_trials, mc_of(cfg)), "zero_one_error"));
    return out;
}

RunResult envelope_cmd(const ExperimentConfig& cfg, const Scenario& s)
{
    RunResult out;
    for (int k : cfg.k_grid) {
        if (k < 1) {
            for (const char* nm : {"envelope_L", "envelope_U", "violation_rate"}) out.rows.push_back(nan_row(k, nm, "needs k >= 1"));
            continue;
        }
        const double t = std::pow(double(k), -0.25);
        const EigenEnvelope e = eigen_envelope(s.prior.d, k, t, s.source.tau_x);
        const ViolationRate v = eigen_violation_rate(s.source, k, t, cfg.n_trials, mc_of(cfg));
        const std::string ex = kv("t", t) + ";" + kv("fail_prob", e.fail_prob) + (e.vacuous ? ";vacuous" : "");
        out.rows.push_back(row(k, "envelope_L", e.L, 0.0, {}, ex));
        out.rows.push_back(row(k, "envelope_U", e.U, 0.0, {}, ex));
        out.rows.push_back(row(k, "violation_rate", v.rate, v.std_error, {}, ex));
    }
    return out;
}

}  // namespace

PosteriorEngine default_engine()
{
    return [](const PriorModel& m, const Sequence& p, const Vec& q) { return posterior(m, p, q); };
}

std::string format_number(double v)
{
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

RunResult oracle_check(const ExperimentConfig& cfg, const PosteriorEngine& engine)
{
    validate_config(cfg);
    const Scenario s = load_scenario(cfg);
    const int d = s.prior.d;
    const int M = s.prior.M();
    if (d > 2 || M > 3) throw std::invalid_argument("oracle-check needs d <= 2 and M <= 3");
    if (cfg.k_grid.back() > 8) throw std::invalid_argument("oracle-check needs every k <= 8");
    const long prompts = std::min<long>(cfg.n_trials, 20);

    RunResult out;
    bool failed = false, unsure = false;
    double worst_grid = 0.0, worst_sigma = 0.0, worst_toy = 0.0;
    for (int k : cfg.k_grid) {
        std::vector<double> dev_w(M, 0.0), se_w(M, 0.0);
        double dev_mean = 0.0, se_mean = 0.0;
        for (long j = 0; j < prompts; ++j) {
            Stream rng(cfg.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j));
            const Prompt p = sample_incontext_prompt(s.source, k, rng);
            const PosteriorMixture post = engine(s.prior, p.seq, p.query);
            OracleEstimate o;
            if (d == 1) {
                o = grid_posterior_1d(s.prior, p.seq, p.query);
            } else {
                const McConfig mc{derive_key(cfg.seed, 1000 + k, j), cfg.workers};
                o = importance_posterior(s.prior, p.seq, p.query, cfg.n_particles, mc);
                if (o.unreliable) {
                    unsure = true;
                    continue;
                }
            }
            for (int m = 0; m < M; ++m) {
                const double dev = std::abs(post.pi_tilde[m] - o.weights[m]);
                dev_w[m] = std::max(dev_w[m], dev);
                se_w[m] = std::max(se_w[m], o.weights_se[m]);
                if (d == 1) {
                    worst_grid = std::max(worst_grid, dev);
                    failed |= dev > 1e-3;
                } else {
                    worst_sigma = std::max(worst_sigma, dev / std::max(o.weights_se[m], 1e-300));
                    failed |= dev > 3.0 * o.weights_se[m] + 1e-12;
                }
            }
            for (int c = 0; c < d; ++c) {
                const double dev = std::abs(post.w_tilde[c] - o.w_mean[c]);
                dev_mean = std::max(dev_mean, dev);
                se_mean = std::max(se_mean, o.w_mean_se[c]);
                if (d == 1) {
                    worst_grid = std::max(worst_grid, dev);
                    failed |= dev > 1e-3;
                } else {
                    worst_sigma = std::max(worst_sigma, dev / std::max(o.w_mean_se[c], 1e-300));
                    failed |= dev > 3.0 * o.w_mean_se[c] + 1e-12;
                }
            }

            if (d == 1) {
                // With every w_m equal the evidence is the scalar toy model over the k+1 inputs.
                PriorModel flat = s.prior;
                for (auto& c : flat.components) c.w = Vec::Zero(1);
                ToyPrior1D toy;
                for (const auto& c : flat.components) {
                    toy.pi.push_back(c.pi);
                    toy.mu.push_back(c.mu[0]);
                }
                toy.sigma = flat.sigma_mu;
                toy.tau = flat.sigma_x;
                std::vector<double> xs;
                for (const auto& x : p.seq.xs) xs.push_back(x[0]);
                xs.push_back(p.query[0]);
                const ToyPosterior tp = toy_posterior(toy, xs);
                const PosteriorMixture fp = engine(flat, p.seq, p.query);
                for (int m = 0; m < M; ++m) {
                    const double dev =
                        std::max(std::abs(fp.pi_tilde[m] - tp.pi_tilde[m]), std::abs(fp.mu_tilde[m][0] - tp.mu_tilde[m]));
                    worst_toy = std::max(worst_toy, dev);
                    failed |= dev > 1e-9;
                }
            }
        }
        const std::string src = d == 1 ? "oracle=grid" : "oracle=importance";
        for (int m = 0; m < M; ++m) out.rows.push_back(row(k, "pi_tilde", dev_w[m], se_w[m], m, src + ";max_abs_dev"));
        out.rows.push_back(row(k, "dist_w_tilde", dev_mean, se_mean, {}, src + ";max_abs_dev_posterior_mean_w"));
    }

    out.status = failed ? CheckStatus::fail : unsure ? CheckStatus::inconclusive : CheckStatus::pass;
    std::ostringstream os;
    os << "oracle-check " << (failed ? "FAIL" : unsure ? "INCONCLUSIVE" : "PASS") << ": ";
    if (d == 1)
        os << "max grid deviation " << format_number(worst_grid) << " (tol 1e-3), max toy deviation "
           << format_number(worst_toy) << " (tol 1e-9)";
    else
        os << "max deviation " << format_number(worst_sigma) << " oracle stderr (tol 3)";
    out.summary.push_back(os.str());
    out.notes.push_back(os.str());
    return out;
}

RunResult run_command(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    if (cfg.command == "discrete-ascent") return discrete_cmd(cfg);
    if (cfg.command == "oracle-check") return oracle_check(cfg, default_engine());
    const Scenario s = load_scenario(cfg);
    if (cfg.command == "posterior-trace") return posterior_trace(cfg, s);
    if (cfg.command == "risk-curve") return risk_curve(cfg, s);
    if (cfg.command == "early-ascent") return early_ascent_cmd(cfg, s);
    if (cfg.command == "bounded-efficacy") return bounded_efficacy_cmd(cfg, s);
    if (cfg.command == "zero-shot") return zero_shot_cmd(cfg, s);
    if (cfg.command == "ridge-compare") return ridge_cmd(cfg, s);
    if (cfg.command == "envelope-check") return envelope_cmd(cfg, s);
    throw std::invalid_argument("unknown command '" + cfg.command + "'");
}

std::string format_csv(const ExperimentConfig& cfg, const RunResult& result)
{
    std::ostringstream os;
    os << "# icl_lab " << cfg.command << '\n';
    os << "# config: " << config_to_json(cfg) << '\n';
    os << "# seed: " << cfg.seed << '\n';
    for (const auto& n : result.notes) os << "# " << n << '\n';
    os << "k,metric,value,stderr,component,extra\n";
    for (const auto& r : result.rows) {
        os << r.k << ',' << r.metric << ',' << format_number(r.value) << ',' << format_number(r.std_error) << ',';
        if (r.component) os << *r.component + 1;
        os << ',' << r.extra << '\n';
    }
    return os.str();
}

int run(const ExperimentConfig& cfg, std::ostream& log)
{
    RunResult res;
    try {
        res = run_command(cfg);
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        log << "error: " << e.what() << '\n';
        return 2;
    }
    const std::string csv = format_csv(cfg, res);
    if (cfg.out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream f(cfg.out, std::ios::binary);
        f << csv;
        f.close();
        if (!f) {
            log << "error: cannot write " << cfg.out << '\n';
            return 4;
        }
        log << "wrote " << res.rows.size() << " rows to " << cfg.out << '\n';
    }
    for (const auto& s : res.summary) log << s << '\n';
    return static_cast<int>(res.status);
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    LoadResult lr;
    try {
        lr = load_config(args);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    if (lr.help) {
        out << lr.help_text;
        return 0;
    }
    return run(lr.config, lr.config.out.empty() ? err : out);
}

}  // namespace icl
