#include "icl/scenarios.hpp"

#include <cmath>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace icl {

namespace {

using json = nlohmann::json;

Vec v3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

Vec filled(int d, double head, double tail)
{
    Vec v = Vec::Constant(d, tail);
    v[0] = head;
    return v;
}

Vec unit(int d, int i)
{
    Vec v = Vec::Zero(d);
    v[i] = 1.0;
    return v;
}

PriorModel shared_centers(const std::vector<Vec>& centers, double sigma_mu, double sigma_w)
{
    PriorModel p;
    p.d = static_cast<int>(centers.front().size());
    for (const auto& c : centers) p.components.push_back({1.0 / centers.size(), c, c});
    p.sigma_mu = sigma_mu;
    p.sigma_w = sigma_w;
    p.sigma_x = 1.0;
    p.sigma_y = 1.0;
    return p;
}

std::vector<Vec> tetra_vertices()
{
    return {v3(0, 0, -1), v3(std::sqrt(8.0 / 9.0), 0, 1.0 / 3.0), v3(-std::sqrt(2.0 / 9.0), std::sqrt(2.0 / 3.0), 1.0 / 3.0),
            v3(-std::sqrt(2.0 / 9.0), -std::sqrt(2.0 / 3.0), 1.0 / 3.0)};
}

std::vector<Vec> polyhedron_vertices(int M)
{
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const double s[2] = {1.0, -1.0};
    std::vector<Vec> v;
    switch (M) {
    case 4:
        return tetra_vertices();
    case 6:
        for (int i = 0; i < 3; ++i)
            for (double a : s) v.push_back(a * unit(3, i));
        break;
    case 8:
        for (double a : s)
            for (double b : s)
                for (double c : s) v.push_back(v3(a, b, c));
        break;
    case 12:
        for (double a : s)
            for (double b : s) v.push_back(v3(0, a, b * phi));
        for (double a : s)
            for (double b : s) v.push_back(v3(a, b * phi, 0));
        for (double a : s)
            for (double b : s) v.push_back(v3(a * phi, 0, b));
        break;
    case 20:
        for (double a : s)
            for (double b : s)
                for (double c : s) v.push_back(v3(a, b, c));
        for (double a : s)
            for (double b : s) v.push_back(v3(0, a / phi, b * phi));
        for (double a : s)
            for (double b : s) v.push_back(v3(a / phi, b * phi, 0));
        for (double a : s)
            for (double b : s) v.push_back(v3(a * phi, 0, b / phi));
        break;
    default:
        throw std::invalid_argument("regular polyhedron needs M in {4, 6, 8, 12, 20}");
    }
    for (auto& x : v) x.normalize();
    return v;
}

void annotate(Scenario& s)
{
    const ValidationReport rep = validate_prior(s.prior, false);
    std::ostringstream os;
    if (!s.notes.empty()) os << s.notes;
    for (const auto& i : rep.issues) os << (os.tellp() > 0 ? "; " : "") << i.what;
    if (s.retrieval_alpha) {
        const RetrievalMargins m = compute_margins(s.prior, s.source, *s.retrieval_alpha);
        os << (os.tellp() > 0 ? "; " : "") << "margins for alpha=" << *s.retrieval_alpha + 1
           << (m.applicable ? " positive" : " not all positive");
    }
    s.notes = os.str();
}

int parse_suffix(const std::string& name, const std::string& prefix)
{
    const std::string tail = name.substr(prefix.size());
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(tail, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != tail.size()) throw std::invalid_argument("bad scenario parameter in '" + name + "'");
    return v;
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j)
{
    const auto xs = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace

int nearest_neighbor(const std::vector<Vec>& centers, int i)
{
    int best = -1;
    double bd = 0.0;
    for (int j = 0; j < static_cast<int>(centers.size()); ++j) {
        if (j == i) continue;
        const double dist = (centers[j] - centers[i]).squaredNorm();
        if (best < 0 || dist < bd - 1e-12) {
            best = j;
            bd = dist;
        }
    }
    return best;
}

Scenario tetrahedron(double sigma_mu, double sigma_w, bool shifted)
{
    const auto c = tetra_vertices();
    Scenario s;
    s.name = shifted ? "tetrahedron" : "tetrahedron-plain";
    s.prior = shared_centers(c, sigma_mu, sigma_w);
    const Vec target = (shifted ? Vec(2.0 * c[0] + c[1] + 0.2 * c[2]) : Vec(2.0 * c[0] + c[1])).normalized();
    s.source.mu_star = target;
    s.source.w_star = target;
    s.source.tau_x = 1.0;
    s.retrieval_alpha = 0;
    annotate(s);
    return s;
}

Scenario regular_polyhedron(int M, double sigma_mu, double sigma_w)
{
    const auto c = polyhedron_vertices(M);
    Scenario s;
    s.name = "polyhedron-" + std::to_string(M);
    s.prior = shared_centers(c, sigma_mu, sigma_w);
    const Vec target = (2.0 * c[0] + c[nearest_neighbor(c, 0)]).normalized();
    s.source.mu_star = target;
    s.source.w_star = target;
    s.source.tau_x = 1.0;
    s.retrieval_alpha = 0;
    annotate(s);
    return s;
}

Scenario basis_setting(int d)
{
    if (d < 2) throw std::invalid_argument("basis setting needs d >= 2");
    std::vector<Vec> c;
    for (int i = 0; i < d; ++i) c.push_back(unit(d, i));
    Scenario s;
    s.name = "basis-" + std::to_string(d);
    s.prior = shared_centers(c, 0.25, 0.25);
    const Vec target = (2.0 * c[0] + c[1]).normalized();
    s.source.mu_star = target;
    s.source.w_star = target;
    s.source.tau_x = 1.0;
    s.retrieval_alpha = 0;
    if (d != 2 && d != 4 && d != 8 && d != 16 && d != 32) s.notes = "d outside {2,4,8,16,32}";
    annotate(s);
    return s;
}

Scenario early_ascent(int d)
{
    if (d < 1) throw std::invalid_argument("early ascent needs d >= 1");
    Scenario s;
    s.name = "early-ascent-" + std::to_string(d);
    PriorModel& p = s.prior;
    p.d = d;
    if (d == 1) {
        p.components = {{0.5, filled(1, 1, 1), filled(1, -1, -1)}, {0.5, filled(1, -1, -1), filled(1, 1, 1)}};
    } else {
        p.components = {{1.0 / 3.0, filled(d, 1, 1), filled(d, -1, -1)},
                        {1.0 / 3.0, filled(d, -1, -1), filled(d, 1, 1)},
                        {1.0 / 3.0, filled(d, 1, -1), filled(d, -1, 1)}};
    }
    p.sigma_mu = p.sigma_w = 0.05;
    p.sigma_x = 1.0;
    p.sigma_y = 2.0;
    s.source.mu_star = Vec::Ones(d);
    s.source.w_star = Vec::Ones(d);
    s.source.tau_x = 1.0;
    annotate(s);
    return s;
}

Scenario zero_shot_setting(int d, double sigma)
{
    if (d < 1) throw std::invalid_argument("zero-shot setting needs d >= 1");
    Scenario s;
    s.name = "zero-shot-" + std::to_string(d);
    const Vec e = unit(d, 0);
    s.prior.d = d;
    s.prior.components = {{0.5, e, e}, {0.5, -e, -e}};
    s.prior.sigma_mu = s.prior.sigma_w = sigma;
    s.prior.sigma_x = s.prior.sigma_y = 1.0;
    s.source.mu_star = e;
    s.source.w_star = Vec::Zero(d);
    s.source.tau_x = 1.0;
    s.source.zero_labels = true;
    s.retrieval_alpha = 0;
    s.notes = "prompt labels forced to 0";
    return s;
}

Scenario bounded_efficacy()
{
    Scenario s = tetrahedron(0.05, 0.05, false);
    s.name = "bounded-efficacy";
    return s;
}

Scenario retrieval_antipodal()
{
    Scenario s;
    s.name = "retrieval-antipodal";
    const Vec e1 = unit(2, 0);
    s.prior.d = 2;
    s.prior.components = {{0.5, e1, e1}, {0.5, -e1, -e1}};
    s.prior.sigma_mu = s.prior.sigma_w = 0.025;
    s.prior.sigma_x = s.prior.sigma_y = 1.0;
    s.source.mu_star = e1;
    s.source.w_star = (2.0 * e1 + unit(2, 1)).normalized();
    s.source.tau_x = 1.0;
    s.retrieval_alpha = 0;
    annotate(s);
    return s;
}

Scenario ridge_compare()
{
    std::vector<Vec> c;
    for (int i = 0; i < 6; ++i) c.push_back(unit(6, i));
    Scenario s;
    s.name = "ridge-d6";
    s.prior = shared_centers(c, 0.05, 0.05);
    s.source.mu_star = c[0];
    s.source.w_star = c[0];
    s.source.tau_x = 1.0;
    s.notes = "ridge comparison draws each task from the prior";
    annotate(s);
    return s;
}

DiscreteScenario discrete_ascent()
{
    DiscreteScenario s;
    s.name = "discrete-ascent";
    s.model.M = 6;
    s.model.components = {{0.04, 1, 1}, {0.481, 3, 3}, {0.479, 5, 5}};
    s.model.sigma_mu = 0.05;
    s.model.sigma_x = 0.04;
    s.model.sigma_y = 0.13;
    s.source.task = {1, 3};
    s.source.sigma_x = 0.04;
    s.source.sigma_y = 0.13;
    return s;
}

RetrievalMargins compute_margins(const Scenario& s, int alpha) { return compute_margins(s.prior, s.source, alpha); }

std::vector<std::string> scenario_names()
{
    return {"tetrahedron",    "tetrahedron-plain", "polyhedron-<4|6|8|12|20>", "basis-<d>",
            "early-ascent-<d>", "zero-shot-<d>",   "bounded-efficacy",        "retrieval-antipodal",
            "ridge-d6",       "discrete-ascent"};
}

bool is_discrete_scenario(const std::string& name) { return name == "discrete-ascent"; }

Scenario make_scenario(const std::string& name, const ScenarioOverrides& ov)
{
    auto starts = [&](const std::string& p) { return name.rfind(p, 0) == 0; };
    Scenario s;
    if (name == "tetrahedron")
        s = tetrahedron();
    else if (name == "tetrahedron-plain")
        s = tetrahedron(0.25, 0.25, false);
    else if (name == "bounded-efficacy")
        s = bounded_efficacy();
    else if (name == "retrieval-antipodal")
        s = retrieval_antipodal();
    else if (name == "ridge-d6")
        s = ridge_compare();
    else if (starts("polyhedron-"))
        s = regular_polyhedron(parse_suffix(name, "polyhedron-"));
    else if (starts("basis-"))
        s = basis_setting(parse_suffix(name, "basis-"));
    else if (starts("early-ascent-"))
        s = early_ascent(parse_suffix(name, "early-ascent-"));
    else if (starts("zero-shot-"))
        s = zero_shot_setting(parse_suffix(name, "zero-shot-"));
    else {
        std::string all;
        for (const auto& n : scenario_names()) all += (all.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown scenario '" + name + "' (known: " + all + ")");
    }
    if (ov.sigma_mu) s.prior.sigma_mu = *ov.sigma_mu;
    if (ov.sigma_w) s.prior.sigma_w = *ov.sigma_w;
    if (ov.tau_y) s.source.tau_y = *ov.tau_y;
    return s;
}

std::string scenario_to_json(const Scenario& s)
{
    json j;
    j["name"] = s.name;
    j["notes"] = s.notes;
    j["retrieval_alpha"] = s.retrieval_alpha ? json(*s.retrieval_alpha) : json(nullptr);
    json p;
    p["d"] = s.prior.d;
    p["sigma_mu"] = s.prior.sigma_mu;
    p["sigma_w"] = s.prior.sigma_w;
    p["sigma_x"] = s.prior.sigma_x;
    p["sigma_y"] = s.prior.sigma_y;
    p["components"] = json::array();
    for (const auto& c : s.prior.components) p["components"].push_back({{"pi", c.pi}, {"mu", vec_json(c.mu)}, {"w", vec_json(c.w)}});
    j["prior"] = p;
    j["source"] = {{"mu_star", vec_json(s.source.mu_star)},
                   {"w_star", vec_json(s.source.w_star)},
                   {"tau_x", s.source.tau_x},
                   {"tau_y", s.source.tau_y},
                   {"zero_labels", s.source.zero_labels}};
    return j.dump(2);
}

Scenario scenario_from_json(const std::string& text)
{
    const json j = json::parse(text);
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.notes = j.at("notes").get<std::string>();
    if (!j.at("retrieval_alpha").is_null()) s.retrieval_alpha = j.at("retrieval_alpha").get<int>();
    const json& p = j.at("prior");
    s.prior.d = p.at("d").get<int>();
    s.prior.sigma_mu = p.at("sigma_mu").get<double>();
    s.prior.sigma_w = p.at("sigma_w").get<double>();
    s.prior.sigma_x = p.at("sigma_x").get<double>();
    s.prior.sigma_y = p.at("sigma_y").get<double>();
    for (const auto& c : p.at("components"))
        s.prior.components.push_back({c.at("pi").get<double>(), json_vec(c.at("mu")), json_vec(c.at("w"))});
    const json& src = j.at("source");
    s.source.mu_star = json_vec(src.at("mu_star"));
    s.source.w_star = json_vec(src.at("w_star"));
    s.source.tau_x = src.at("tau_x").get<double>();
    s.source.tau_y = src.at("tau_y").get<double>();
    s.source.zero_labels = src.at("zero_labels").get<bool>();
    return s;
}

}  // namespace icl
