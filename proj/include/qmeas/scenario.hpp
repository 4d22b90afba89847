#pragma once

// Declarative scenario runner. A scenario is one JSON document naming a
// model, the object and probe preparations, and the checks to run; the
// result is a Report whose JSON and text renderings are deterministic.

#include "qmeas/cascade.hpp"
#include "qmeas/grid.hpp"
#include "qmeas/measurement.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmeas::scenario {

using Json = nlohmann::ordered_json;

/// Invalid scenario document; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { von_neumann, ozawa, custom };

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> checks{
        "propagation", "verdict",     "tradeoff",      "robertson",      "repeatability",
        "realization", "limit_sweep", "grid_crosscheck", "born_sampling"};
    return checks;
}

struct Tolerances {
    double exact = 1e-12;          // closed-form and exact-arithmetic comparisons
    double equality = 1e-9;        // minimum-uncertainty equality case
    double grid = 1e-4;            // grid epsilon / eta vs the moment engine
    double grid_moments = 1e-6;    // grid moments vs symplectic evolution
    double total_variation = 1e-3; // output histogram vs object marginal
};

struct GridConfig {
    std::size_t n = 1024;
    std::optional<double> half_width;  // fitted from the states when absent
    double sigmas = 12.0;
    std::string object_shape = "gaussian";  // or "bimodal"
    double separation = 4.0;
    std::size_t bins = 128;
    double boundary_threshold = grid::kDefaultBoundaryThreshold;
    std::size_t random_cases = 0;
};

struct Scenario {
    std::string name;
    std::string description;
    double hbar = 1.0;
    ModelKind model = ModelKind::ozawa;
    double coupling = 1.0;
    std::vector<QuadraticTerm> terms;  // custom models only
    ModeSpec object;
    ModeSpec probe;
    std::vector<std::string> checks;
    int sweep_k_min = 0;
    int sweep_k_max = 10;
    std::optional<double> alpha;
    GridConfig grid;
    std::size_t samples = 100000;
    std::uint64_t seed = 1;
    Tolerances tol;
};

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

inline const Json& require(const Json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) {
        throw ConfigError("missing required key '" + (path.empty() ? std::string(key) : path + "." + key) + "'");
    }
    return obj.at(key);
}

inline std::string join(const std::string& path, const char* key) {
    return path.empty() ? std::string(key) : path + "." + key;
}

inline double number(const Json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError("key '" + where + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError("key '" + where + "' must be finite");
    return d;
}

inline double number_or(const Json& obj, const char* key, const std::string& path, double fallback) {
    return obj.contains(key) ? number(obj.at(key), join(path, key)) : fallback;
}

inline std::uint64_t unsigned_int(const Json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError("key '" + where + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

inline std::string text(const Json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError("key '" + where + "' must be a string");
    return v.get<std::string>();
}

inline const Json& object(const Json& v, const std::string& where) {
    if (!v.is_object()) throw ConfigError("key '" + where + "' must be an object");
    return v;
}

inline ModeSpec parse_mode(const Json& v, const std::string& path) {
    object(v, path);
    reject_unknown(v, path, {"mean_x", "mean_p", "sigma_x", "sigma_p", "correlation"});
    ModeSpec m;
    m.sigma_x = number(require(v, "sigma_x", path), join(path, "sigma_x"));
    m.sigma_p = number(require(v, "sigma_p", path), join(path, "sigma_p"));
    m.mean_x = number_or(v, "mean_x", path, 0.0);
    m.mean_p = number_or(v, "mean_p", path, 0.0);
    m.correlation = number_or(v, "correlation", path, 0.0);
    return m;
}

}  // namespace detail

/// Without `seed_supplied` the document must carry its own seed.
inline Scenario parse_scenario(const Json& doc, bool seed_supplied = false) {
    using namespace detail;
    if (!doc.is_object()) throw ConfigError("scenario document must be a JSON object");
    reject_unknown(doc, "", {"name", "description", "hbar", "model", "object", "probe", "checks", "sweep",
                             "repeatability", "grid", "sampling", "seed", "tolerances"});
    Scenario s;
    s.name = text(require(doc, "name", ""), "name");
    if (s.name.empty()) throw ConfigError("key 'name' must be non-empty");
    if (doc.contains("description")) s.description = text(doc.at("description"), "description");
    s.hbar = number_or(doc, "hbar", "", 1.0);
    if (!(s.hbar > 0.0)) throw ConfigError("key 'hbar' must be positive");

    const Json& model = object(require(doc, "model", ""), "model");
    reject_unknown(model, "model", {"type", "coupling", "terms"});
    const std::string type = text(require(model, "type", "model"), "model.type");
    if (type == "von_neumann") {
        s.model = ModelKind::von_neumann;
    } else if (type == "ozawa") {
        s.model = ModelKind::ozawa;
    } else if (type == "custom") {
        s.model = ModelKind::custom;
    } else {
        throw ConfigError("key 'model.type' must be one of von_neumann, ozawa, custom (got '" + type + "')");
    }
    s.coupling = number_or(model, "coupling", "model", 1.0);
    if (!(s.coupling > 0.0)) throw ConfigError("key 'model.coupling' must be positive");
    if (model.contains("terms")) {
        if (s.model != ModelKind::custom) throw ConfigError("key 'model.terms' is only valid for custom models");
        const Json& terms = model.at("terms");
        if (!terms.is_array()) throw ConfigError("key 'model.terms' must be an array");
        for (std::size_t i = 0; i < terms.size(); ++i) {
            const std::string where = "model.terms[" + std::to_string(i) + "]";
            const Json& t = terms[i];
            if (!t.is_array() || t.size() != 3) {
                throw ConfigError("key '" + where + "' must be [coefficient, index, index]");
            }
            s.terms.push_back({number(t[0], where + "[0]"), static_cast<std::size_t>(unsigned_int(t[1], where + "[1]")),
                               static_cast<std::size_t>(unsigned_int(t[2], where + "[2]"))});
        }
    } else if (s.model == ModelKind::custom) {
        throw ConfigError("missing required key 'model.terms'");
    }

    s.object = parse_mode(require(doc, "object", ""), "object");
    s.probe = parse_mode(require(doc, "probe", ""), "probe");

    const Json& checks = require(doc, "checks", "");
    if (!checks.is_array() || checks.empty()) throw ConfigError("key 'checks' must be a non-empty array");
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const std::string c = text(checks[i], "checks[" + std::to_string(i) + "]");
        const auto& known = known_checks();
        if (std::find(known.begin(), known.end(), c) == known.end()) {
            throw ConfigError("key 'checks[" + std::to_string(i) + "]' names unknown check '" + c + "'");
        }
        s.checks.push_back(c);
    }

    if (doc.contains("sweep")) {
        const Json& sw = object(doc.at("sweep"), "sweep");
        reject_unknown(sw, "sweep", {"k_min", "k_max"});
        if (sw.contains("k_min")) s.sweep_k_min = static_cast<int>(unsigned_int(sw.at("k_min"), "sweep.k_min"));
        if (sw.contains("k_max")) s.sweep_k_max = static_cast<int>(unsigned_int(sw.at("k_max"), "sweep.k_max"));
        if (s.sweep_k_max < s.sweep_k_min || s.sweep_k_max > 40) {
            throw ConfigError("key 'sweep.k_max' must satisfy k_min <= k_max <= 40");
        }
    }
    if (doc.contains("repeatability")) {
        const Json& rep = object(doc.at("repeatability"), "repeatability");
        reject_unknown(rep, "repeatability", {"alpha"});
        if (rep.contains("alpha")) s.alpha = number(rep.at("alpha"), "repeatability.alpha");
    }
    if (doc.contains("grid")) {
        const Json& g = object(doc.at("grid"), "grid");
        reject_unknown(g, "grid", {"n", "half_width", "sigmas", "object_shape", "separation", "bins",
                                   "boundary_threshold", "random_cases"});
        if (g.contains("n")) s.grid.n = unsigned_int(g.at("n"), "grid.n");
        if (g.contains("half_width")) s.grid.half_width = number(g.at("half_width"), "grid.half_width");
        s.grid.sigmas = number_or(g, "sigmas", "grid", s.grid.sigmas);
        if (g.contains("object_shape")) {
            s.grid.object_shape = text(g.at("object_shape"), "grid.object_shape");
            if (s.grid.object_shape != "gaussian" && s.grid.object_shape != "bimodal") {
                throw ConfigError("key 'grid.object_shape' must be gaussian or bimodal");
            }
        }
        s.grid.separation = number_or(g, "separation", "grid", s.grid.separation);
        if (g.contains("bins")) s.grid.bins = unsigned_int(g.at("bins"), "grid.bins");
        s.grid.boundary_threshold = number_or(g, "boundary_threshold", "grid", s.grid.boundary_threshold);
        if (g.contains("random_cases")) s.grid.random_cases = unsigned_int(g.at("random_cases"), "grid.random_cases");
    }
    if (doc.contains("sampling")) {
        const Json& sm = object(doc.at("sampling"), "sampling");
        reject_unknown(sm, "sampling", {"count"});
        if (sm.contains("count")) s.samples = unsigned_int(sm.at("count"), "sampling.count");
        if (s.samples == 0) throw ConfigError("key 'sampling.count' must be positive");
    }
    if (doc.contains("seed")) {
        s.seed = unsigned_int(doc.at("seed"), "seed");
    } else if (!seed_supplied) {
        throw ConfigError("missing required key 'seed'");
    }
    if (doc.contains("tolerances")) {
        const Json& t = object(doc.at("tolerances"), "tolerances");
        reject_unknown(t, "tolerances", {"exact", "equality", "grid", "grid_moments", "total_variation"});
        s.tol.exact = number_or(t, "exact", "tolerances", s.tol.exact);
        s.tol.equality = number_or(t, "equality", "tolerances", s.tol.equality);
        s.tol.grid = number_or(t, "grid", "tolerances", s.tol.grid);
        s.tol.grid_moments = number_or(t, "grid_moments", "tolerances", s.tol.grid_moments);
        s.tol.total_variation = number_or(t, "total_variation", "tolerances", s.tol.total_variation);
    }
    return s;
}

inline Scenario load_scenario(const std::string& path, bool seed_supplied = false) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(doc, seed_supplied);
}

/// Applies a "key=value" tolerance override from the command line.
inline void override_tolerance(Tolerances& t, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("tolerance override '" + assignment + "' must be key=value");
    const std::string key = assignment.substr(0, eq);
    double value = 0.0;
    try {
        std::size_t used = 0;
        value = std::stod(assignment.substr(eq + 1), &used);
        if (used != assignment.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("tolerance override '" + assignment + "' has a non-numeric value");
    }
    if (!(value > 0.0)) throw ConfigError("tolerance override '" + assignment + "' must be positive");
    if (key == "exact") t.exact = value;
    else if (key == "equality") t.equality = value;
    else if (key == "grid") t.grid = value;
    else if (key == "grid_moments") t.grid_moments = value;
    else if (key == "total_variation") t.total_variation = value;
    else throw ConfigError("unknown tolerance '" + key + "'");
}

// ---------------------------------------------------------------------------
// Reports

struct Quantity {
    std::string check;
    std::string name;
    double value = 0.0;
    std::optional<double> expected;
    std::string criterion;  // human-readable pass rule
    bool pass = true;
};

struct Table {
    std::string name;  // file stem suffix, e.g. "sweep"
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct Report {
    std::string scenario;
    std::string description;
    std::string model;
    double hbar = 1.0;
    std::uint64_t seed = 0;
    std::vector<Quantity> quantities;
    std::vector<std::string> notes;
    std::vector<Table> tables;

    [[nodiscard]] bool pass() const {
        return std::all_of(quantities.begin(), quantities.end(), [](const Quantity& q) { return q.pass; });
    }
};

namespace detail {

class Recorder {
public:
    Recorder(Report& r, std::string check) : r_(r), check_(std::move(check)) {}

    void info(const std::string& name, double value) { r_.quantities.push_back({check_, name, value, std::nullopt, "report", true}); }

    void equals(const std::string& name, double value, double expected, double tol) {
        r_.quantities.push_back({check_, name, value, expected, "|value - expected| <= " + fmt(tol),
                                 std::abs(value - expected) <= tol});
    }
    void at_least(const std::string& name, double value, double bound, double tol) {
        r_.quantities.push_back({check_, name, value, bound, ">= expected - " + fmt(tol), value >= bound - tol});
    }
    void at_most(const std::string& name, double value, double bound) {
        r_.quantities.push_back({check_, name, value, bound, "<= expected", value <= bound});
    }
    void above(const std::string& name, double value, double bound) {
        r_.quantities.push_back({check_, name, value, bound, "> expected", value > bound});
    }
    void flag(const std::string& name, bool value, bool expected) {
        r_.quantities.push_back({check_, name, value ? 1.0 : 0.0, expected ? 1.0 : 0.0, "== expected", value == expected});
    }

    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

private:
    Report& r_;
    std::string check_;
};

inline MeasurementModel build_model(const Scenario& s) {
    switch (s.model) {
        case ModelKind::von_neumann: return von_neumann_model(s.coupling, s.hbar);
        case ModelKind::ozawa: return ozawa_model(s.coupling, s.hbar);
        case ModelKind::custom: break;
    }
    try {
        return custom_model("custom", s.coupling, s.terms, s.hbar);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("key 'model.terms': ") + e.what());
    }
}

inline const char* model_name(ModelKind k) {
    switch (k) {
        case ModelKind::von_neumann: return "von_neumann";
        case ModelKind::ozawa: return "ozawa";
        case ModelKind::custom: return "custom";
    }
    return "custom";
}

inline bool is_min_uncertainty(const ModeSpec& m, double hbar) {
    return m.correlation == 0.0 && std::abs(m.sigma_x * m.sigma_p - 0.5 * hbar) <= 1e-12 * hbar;
}

inline void run_propagation(const Scenario& s, const MeasurementModel& m, Report& r) {
    Recorder rec(r, "propagation");
    const SymplecticPropagation end = m.endpoint();
    rec.at_most("symplectic_defect", end.symplectic_defect(), s.tol.exact);
    rec.equals("determinant", end.matrix().determinant(), 1.0, s.tol.exact);
    if (s.model == ModelKind::custom) return;
    const bool oz = s.model == ModelKind::ozawa;
    auto closed = [&](double kt) { return oz ? ozawa_closed_form(kt) : von_neumann_closed_form(kt); };
    rec.equals("endpoint_max_error", max_abs_difference(end.matrix(), closed(1.0)), 0.0, s.tol.exact);
    for (double kt : {0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0}) {
        char name[48];
        std::snprintf(name, sizeof name, "max_error_at_Ktau_%.4f", kt);
        rec.equals(name, max_abs_difference(m.propagation(kt / s.coupling).matrix(), closed(kt)), 0.0, s.tol.exact);
    }
}

inline void run_verdict(const Scenario& s, const MeasurementModel& m, const MomentState& composite, Report& r) {
    Recorder rec(r, "verdict");
    const NoiseReport v = heisenberg_verdict(m, composite, s.tol.exact);
    const double half = 0.5 * s.hbar;
    switch (s.model) {
        case ModelKind::ozawa: {
            rec.equals("epsilon", v.epsilon, 0.0, s.tol.exact);
            const double eta2 = s.object.sigma_p * s.object.sigma_p + s.probe.sigma_p * s.probe.sigma_p +
                                std::pow(s.object.mean_p + s.probe.mean_p, 2);
            rec.equals("eta", v.eta, std::sqrt(eta2), s.tol.exact * std::max(1.0, std::sqrt(eta2)));
            rec.equals("epsilon_times_eta", v.product, 0.0, s.tol.exact * std::max(1.0, v.eta));
            rec.flag("heisenberg_satisfied", v.satisfied, false);
            break;
        }
        case ModelKind::von_neumann: {
            const double eps = std::hypot(s.probe.sigma_x, s.probe.mean_x);
            const double eta = std::hypot(s.probe.sigma_p, s.probe.mean_p);
            rec.equals("epsilon", v.epsilon, eps, s.tol.exact * std::max(1.0, eps));
            rec.equals("eta", v.eta, eta, s.tol.exact * std::max(1.0, eta));
            rec.at_least("epsilon_times_eta", v.product, s.probe.sigma_x * s.probe.sigma_p, s.tol.exact * s.hbar);
            if (is_min_uncertainty(s.probe, s.hbar) && s.probe.mean_x == 0.0 && s.probe.mean_p == 0.0) {
                rec.equals("epsilon_times_eta_equality", v.product, half, s.tol.equality * s.hbar);
            }
            rec.flag("heisenberg_satisfied", v.satisfied, true);
            break;
        }
        case ModelKind::custom:
            rec.info("epsilon", v.epsilon);
            rec.info("eta", v.eta);
            rec.info("epsilon_times_eta", v.product);
            rec.info("heisenberg_satisfied", v.satisfied ? 1.0 : 0.0);
            break;
    }
    rec.info("product_over_half_hbar", v.product / half);
    r.notes.push_back(std::string("verdict: Heisenberg relation ") + (v.satisfied ? "satisfied" : "violated") +
                      " (epsilon*eta = " + Recorder::fmt(v.product) + ", hbar/2 = " + Recorder::fmt(half) + ")");
}

inline void run_tradeoff(const Scenario& s, const MeasurementModel& m, const MomentState& composite, Report& r) {
    Recorder rec(r, "tradeoff");
    const NoiseReport v = heisenberg_verdict(m, composite, s.tol.exact);
    const auto x = LinearObservable::position(m.system(), 0);
    const auto d = disturbance_operator(m, LinearObservable::momentum(m.system(), 0));
    const double bound = 0.5 * std::abs(commutator_constant(x, d));
    if (s.model == ModelKind::ozawa) {
        rec.equals("commutator_x_D_px", commutator_constant(x, d), -s.hbar, s.tol.exact * s.hbar);
    }
    rec.at_least("sigma_x_times_eta", v.tradeoff_product, bound, s.tol.exact * s.hbar);
    rec.info("tradeoff_over_half_hbar", v.tradeoff_product / (0.5 * s.hbar));
}

inline void run_robertson(const Scenario& s, const MeasurementModel& m, const MomentState& composite, Report& r) {
    Recorder rec(r, "robertson");
    const ModeSystem& sys = m.system();
    const auto x = LinearObservable::position(sys, 0);
    const auto px = LinearObservable::momentum(sys, 0);
    const auto y = LinearObservable::position(sys, 1);
    const auto py = LinearObservable::momentum(sys, 1);
    const auto d = disturbance_operator(m, px);
    const std::vector<std::pair<std::string, std::pair<LinearObservable, LinearObservable>>> pairs{
        {"object_x_px", {x, px}}, {"probe_y_py", {y, py}}, {"x_and_D_px", {x, d}}};
    for (const auto& [name, ab] : pairs) {
        const RobertsonResult res = robertson_check(composite, ab.first, ab.second, s.tol.exact * s.hbar);
        rec.at_least(name, res.lhs, res.bound, s.tol.exact * s.hbar);
    }
}

inline void run_repeatability(const Scenario& s, const MeasurementModel& m, Report& r) {
    Recorder rec(r, "repeatability");
    const CascadeScenario sc{m, from_gaussian(s.object, "object", s.hbar), from_gaussian(s.probe, "probe", s.hbar),
                             std::nullopt};
    const double dev = repeatability_deviation(sc);
    if (s.model == ModelKind::ozawa) {
        const double expected = std::hypot(s.probe.sigma_x, s.probe.mean_x);
        rec.equals("deviation", dev, expected, s.tol.exact * std::max(1.0, expected));
        // Same probes, a different object preparation.
        ModeSpec other{s.object.mean_x + 1.0, s.object.mean_p - 0.5, 2.0 * s.object.sigma_x, s.object.sigma_p, 0.0};
        const CascadeScenario moved{m, from_gaussian(other, "object", s.hbar), sc.probe_state, std::nullopt};
        rec.equals("object_dependence", std::abs(repeatability_deviation(moved) - dev), 0.0,
                   s.tol.exact);
    } else {
        rec.info("deviation", dev);
    }
    if (s.alpha) {
        rec.info("alpha", *s.alpha);
        if (s.model == ModelKind::ozawa) {
            rec.flag("alpha_repeatable", is_alpha_repeatable(sc, *s.alpha),
                     std::hypot(s.probe.sigma_x, s.probe.mean_x) <= *s.alpha);
        } else {
            rec.info("alpha_repeatable", is_alpha_repeatable(sc, *s.alpha) ? 1.0 : 0.0);
        }
    }
}

inline void run_realization(const Scenario& s, Report& r) {
    Recorder rec(r, "realization");
    rec.at_most("residual", realization_check(s.coupling, false, s.hbar), s.tol.exact);
    rec.above("swapped_order_residual", realization_check(s.coupling, true, s.hbar), 0.5);
    const RealizationFactors f = realization_factors(s.hbar);
    rec.at_most("x_py_factor_defect", f.x_py.symplectic_defect(), s.tol.exact);
    rec.at_most("px_y_factor_defect", f.px_y.symplectic_defect(), s.tol.exact);
}

inline void run_limit_sweep(const Scenario& s, const MeasurementModel& m, Report& r) {
    Recorder rec(r, "limit_sweep");
    const auto rows = limit_sweep(m, dyadic_schedule(s.sweep_k_min, s.sweep_k_max));
    Table t{"sweep", {"k", "sigma_p", "sigma_x", "epsilon", "eta", "epsilon_times_eta", "post_sigma_x"}, {}};
    bool eta_decreasing = true;
    bool post_increasing = true;
    bool post_floor = true;
    double max_eps = 0.0;
    double max_eta_error = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const int k = s.sweep_k_min + static_cast<int>(i);
        t.rows.push_back({static_cast<double>(k), row.sigma_p, row.sigma_x, row.report.epsilon, row.report.eta,
                          row.report.product, row.post_sigma_x});
        max_eps = std::max(max_eps, row.report.epsilon / row.sigma_x);
        if (i > 0) {
            eta_decreasing = eta_decreasing && row.report.eta < rows[i - 1].report.eta;
            post_increasing = post_increasing && row.post_sigma_x > rows[i - 1].post_sigma_x;
        }
        post_floor = post_floor && row.post_sigma_x >= s.hbar * std::ldexp(1.0, k - 1);
        if (s.model == ModelKind::ozawa) {
            max_eta_error = std::max(max_eta_error, std::abs(row.report.eta - std::sqrt(2.0) * row.sigma_p) / row.sigma_p);
        }
    }
    r.tables.push_back(std::move(t));
    if (s.model != ModelKind::ozawa) {
        rec.info("final_eta", rows.back().report.eta);
        rec.info("final_post_sigma_x", rows.back().post_sigma_x);
        return;
    }
    rec.equals("max_epsilon_over_sigma_x", max_eps, 0.0, s.tol.exact);
    rec.equals("max_relative_eta_error", max_eta_error, 0.0, s.tol.exact);
    rec.flag("eta_monotone_decreasing", eta_decreasing, true);
    rec.flag("post_sigma_x_monotone_increasing", post_increasing, true);
    rec.flag("post_sigma_x_at_least_hbar_2^(k-1)", post_floor, true);
    rec.at_most("final_eta", rows.back().report.eta, std::sqrt(2.0) * std::ldexp(1.0, -(s.sweep_k_max - 1)));
    rec.info("final_post_sigma_x", rows.back().post_sigma_x);
}

inline grid::GridModel grid_model(const Scenario& s) {
    if (s.model == ModelKind::custom) {
        throw ConfigError("key 'checks': grid_crosscheck supports only von_neumann and ozawa models");
    }
    return s.model == ModelKind::ozawa ? grid::GridModel::ozawa : grid::GridModel::von_neumann;
}

inline grid::GridSpec grid_spec_for(const Scenario& s, const ModeSpec& obj, const ModeSpec& prb, grid::GridModel gm) {
    grid::GridSpec g;
    if (s.grid.half_width) {
        g = {s.grid.n, s.grid.n, *s.grid.half_width, *s.grid.half_width, s.grid.boundary_threshold};
    } else {
        ModeSpec fit_obj = obj;
        if (s.grid.object_shape == "bimodal") {
            // Cover the outer packet: shift the mean outward by half the separation.
            fit_obj.mean_x = std::abs(obj.mean_x) + 0.5 * s.grid.separation;
        }
        g = grid::fit_grid(fit_obj, prb, gm, s.grid.n, s.grid.sigmas);
        g.boundary_threshold = s.grid.boundary_threshold;
    }
    g.validate();
    return g;
}

// Random pure Gaussian object/probe pairs for the oracle comparison.
inline std::pair<ModeSpec, ModeSpec> random_pure_pair(CounterRng& rng) {
    auto draw = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
    auto mode = [&](double smin, double smax, double mean_range) {
        ModeSpec m;
        m.sigma_x = draw(smin, smax);
        m.correlation = draw(-0.6, 0.6);
        m.sigma_p = 1.0 / (2.0 * m.sigma_x * std::sqrt(1.0 - m.correlation * m.correlation));
        m.mean_x = draw(-mean_range, mean_range);
        m.mean_p = draw(-mean_range, mean_range);
        return m;
    };
    ModeSpec obj = mode(0.5, 1.5, 1.0);
    ModeSpec prb = mode(0.3, 1.2, 0.5);
    return {obj, prb};
}

struct GridComparison {
    double eps_grid, eps_moment, eta_grid, eta_moment, moment_error;
};

inline GridComparison compare_on_grid(const ModeSpec& obj, const ModeSpec& prb, grid::GridModel gm,
                                      const grid::GridSpec& g) {
    const MeasurementModel m = gm == grid::GridModel::ozawa ? ozawa_model() : von_neumann_model();
    const MomentState composite = from_gaussian(GaussianSpec{obj, prb}, object_probe_system());
    const auto px = LinearObservable::momentum(composite.system(), 0);
    const grid::GridState psi = grid::init_gaussian_grid(obj, prb, g);
    const auto nd = grid::grid_noise_disturbance(psi, gm);
    const MomentState after = grid::grid_moments(grid::apply_unitary(psi, gm));
    const MomentState expected = evolve(composite, m.endpoint());
    const double moment_error = std::max((after.mean() - expected.mean()).cwiseAbs().maxCoeff(),
                                         (after.cov() - expected.cov()).cwiseAbs().maxCoeff());
    return {nd.epsilon, noise(m, composite), nd.eta, disturbance(m, composite, px), moment_error};
}

inline void run_grid_crosscheck(const Scenario& s, const MeasurementModel& m, Report& r) {
    Recorder rec(r, "grid_crosscheck");
    const grid::GridModel gm = grid_model(s);
    // The oracle runs at hbar = 1; momenta are rescaled on the way in and out.
    const ModeSpec obj = grid::to_unit_hbar(s.object, s.hbar);
    const ModeSpec prb = grid::to_unit_hbar(s.probe, s.hbar);
    const grid::GridSpec g = grid_spec_for(s, obj, prb, gm);
    rec.info("grid_n", static_cast<double>(g.nx));
    rec.info("half_width", g.lx);

    const auto px = LinearObservable::momentum(m.system(), 0);
    if (s.grid.object_shape == "bimodal") {
        const grid::GridState psi =
            grid::init_product_grid(grid::bimodal_wavefunction(obj, s.grid.separation), grid::gaussian_wavefunction(prb), g);
        const auto nd = grid::grid_noise_disturbance(psi, gm);
        const MomentState unit = grid::grid_moments(psi);
        const MeasurementModel unit_model = gm == grid::GridModel::ozawa ? ozawa_model() : von_neumann_model();
        const auto unit_px = LinearObservable::momentum(unit.system(), 0);
        rec.equals("epsilon_grid_vs_moment", nd.epsilon, noise(unit_model, unit), s.tol.grid);
        rec.equals("eta_grid_vs_moment", nd.eta * s.hbar, disturbance(unit_model, unit, unit_px) * s.hbar,
                   s.tol.grid * s.hbar);
        if (gm == grid::GridModel::ozawa) rec.at_most("epsilon_grid", nd.epsilon, 1e-6);
    } else {
        const GridComparison c = compare_on_grid(obj, prb, gm, g);
        rec.equals("epsilon_grid_vs_moment", c.eps_grid, c.eps_moment, s.tol.grid);
        rec.equals("eta_grid_vs_moment", c.eta_grid * s.hbar, c.eta_moment * s.hbar, s.tol.grid * s.hbar);
        rec.at_most("moment_evolution_error", c.moment_error, s.tol.grid_moments);
        if (gm == grid::GridModel::ozawa) rec.at_most("epsilon_grid", c.eps_grid, 1e-8);
        (void)m;
        (void)px;
    }

    // Output statistics: readout histogram vs the object position marginal.
    const grid::GridState psi0 =
        s.grid.object_shape == "bimodal"
            ? grid::init_product_grid(grid::bimodal_wavefunction(obj, s.grid.separation), grid::gaussian_wavefunction(prb), g)
            : grid::init_gaussian_grid(obj, prb, g);
    const auto out = grid::output_histogram(psi0, gm, s.grid.bins);
    const auto in = grid::position_histogram(psi0, grid::Coordinate::x, s.grid.bins);
    Table t{"histogram", {"bin_lo", "bin_hi", "object_x_marginal", "output_y"}, {}};
    for (std::size_t b = 0; b < out.probabilities.size(); ++b) {
        const double lo = out.lo + static_cast<double>(b) * out.bin_width();
        t.rows.push_back({lo, lo + out.bin_width(), in.probabilities[b], out.probabilities[b]});
    }
    r.tables.push_back(std::move(t));
    rec.equals("output_total_mass", out.total(), 1.0, 1e-10);
    const double tv = grid::total_variation(out, in);
    if (gm == grid::GridModel::ozawa) {
        rec.at_most("output_vs_object_total_variation", tv, s.tol.total_variation);
    } else {
        rec.info("output_vs_object_total_variation", tv);
    }

    if (s.grid.random_cases > 0) {
        CounterRng rng(s.seed);
        double worst_eps = 0.0, worst_eta = 0.0, worst_mom = 0.0;
        for (std::size_t i = 0; i < s.grid.random_cases; ++i) {
            const auto [o, p] = random_pure_pair(rng);
            const grid::GridSpec gi = grid::fit_grid(o, p, gm, s.grid.n, s.grid.sigmas);
            const GridComparison c = compare_on_grid(o, p, gm, gi);
            worst_eps = std::max(worst_eps, std::abs(c.eps_grid - c.eps_moment));
            worst_eta = std::max(worst_eta, std::abs(c.eta_grid - c.eta_moment));
            worst_mom = std::max(worst_mom, c.moment_error);
        }
        rec.info("random_cases", static_cast<double>(s.grid.random_cases));
        rec.at_most("random_max_epsilon_error", worst_eps, s.tol.grid);
        rec.at_most("random_max_eta_error", worst_eta, s.tol.grid);
        rec.at_most("random_max_moment_error", worst_mom, s.tol.grid_moments);
    }
}

inline void run_born_sampling(const Scenario& s, const MeasurementModel& m, const MomentState& composite, Report& r) {
    Recorder rec(r, "born_sampling");
    const auto x = LinearObservable::position(m.system(), 0);
    const ScalarDistribution output = observable_distribution(evolve(composite, m.endpoint()), m.probe_obs());
    const ScalarDistribution born = observable_distribution(composite, x);
    const auto samples = sample_outcomes(output, s.samples, s.seed);
    const double crit = ks_critical_1pct(s.samples);
    rec.info("sample_count", static_cast<double>(s.samples));
    rec.info("ks_critical_1pct", crit);
    rec.at_most("ks_vs_output_law", ks_statistic(samples, output), crit);
    const double ks_born = ks_statistic(samples, born);
    if (s.model == ModelKind::ozawa) {
        rec.at_most("ks_vs_object_position_law", ks_born, crit);
    } else {
        rec.info("ks_vs_object_position_law", ks_born);
    }
    rec.flag("deterministic_under_seed", sample_outcomes(output, s.samples, s.seed) == samples, true);
}

}  // namespace detail

/// Runs every requested check. Physicality and grid aliasing errors propagate.
inline Report run(const Scenario& s) {
    Report r;
    r.scenario = s.name;
    r.description = s.description;
    r.model = detail::model_name(s.model);
    r.hbar = s.hbar;
    r.seed = s.seed;

    const MeasurementModel m = detail::build_model(s);
    const MomentState composite =
        product(from_gaussian(s.object, "object", s.hbar), from_gaussian(s.probe, "probe", s.hbar));

    for (const auto& c : s.checks) {
        if (c == "propagation") detail::run_propagation(s, m, r);
        else if (c == "verdict") detail::run_verdict(s, m, composite, r);
        else if (c == "tradeoff") detail::run_tradeoff(s, m, composite, r);
        else if (c == "robertson") detail::run_robertson(s, m, composite, r);
        else if (c == "repeatability") detail::run_repeatability(s, m, r);
        else if (c == "realization") detail::run_realization(s, r);
        else if (c == "limit_sweep") detail::run_limit_sweep(s, m, r);
        else if (c == "grid_crosscheck") detail::run_grid_crosscheck(s, m, r);
        else if (c == "born_sampling") detail::run_born_sampling(s, m, composite, r);
    }
    return r;
}

inline Json to_json(const Report& r) {
    Json j;
    j["scenario"] = r.scenario;
    if (!r.description.empty()) j["description"] = r.description;
    j["model"] = r.model;
    j["hbar"] = r.hbar;
    j["seed"] = r.seed;
    j["pass"] = r.pass();
    Json qs = Json::array();
    for (const auto& q : r.quantities) {
        Json e;
        e["check"] = q.check;
        e["name"] = q.name;
        e["value"] = q.value;
        e["expected"] = q.expected ? Json(*q.expected) : Json(nullptr);
        e["criterion"] = q.criterion;
        e["pass"] = q.pass;
        qs.push_back(std::move(e));
    }
    j["quantities"] = std::move(qs);
    j["notes"] = r.notes;
    Json tables = Json::object();
    for (const auto& t : r.tables) tables[t.name] = {{"columns", t.columns}, {"rows", t.rows}};
    j["tables"] = std::move(tables);
    return j;
}

inline std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

/// Aligned plain-text table, one line per quantity.
inline std::string to_text(const Report& r) {
    std::vector<std::array<std::string, 6>> lines;
    lines.push_back({"check", "quantity", "value", "expected", "criterion", "status"});
    for (const auto& q : r.quantities) {
        lines.push_back({q.check, q.name, format_value(q.value), q.expected ? format_value(*q.expected) : "-",
                         q.criterion, q.pass ? "PASS" : "FAIL"});
    }
    std::array<std::size_t, 6> width{};
    for (const auto& l : lines)
        for (std::size_t c = 0; c < 6; ++c) width[c] = std::max(width[c], l[c].size());

    std::ostringstream os;
    os << "scenario: " << r.scenario << "  (model " << r.model << ", hbar " << r.hbar << ", seed " << r.seed << ")\n";
    if (!r.description.empty()) os << r.description << "\n";
    for (const auto& l : lines) {
        for (std::size_t c = 0; c < 6; ++c) {
            os << l[c];
            if (c + 1 < 6) os << std::string(width[c] - l[c].size() + 2, ' ');
        }
        os << "\n";
    }
    for (const auto& n : r.notes) os << n << "\n";
    os << "result: " << (r.pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

inline std::string to_csv(const Table& t) {
    std::ostringstream os;
    for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
    os << "\n";
    char buf[32];
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", row[c]);
            os << (c ? "," : "") << buf;
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace qmeas::scenario
