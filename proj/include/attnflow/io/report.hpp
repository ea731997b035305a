#pragma once
// report.json and lyapunov.json builders behind the analyze and lyapunov
// commands. Every check carries a status: "pass" or "fail" for assertions,
// "info" for measurements without a guarantee behind them, "skipped" when the
// check does not apply to the trajectory's dynamics.

#include "attnflow/diagnostics.hpp"
#include "attnflow/io/config.hpp"
#include "attnflow/lyapunov.hpp"

#include <optional>
#include <string>
#include <vector>

namespace attnflow::io {

/// Command-line overrides; they take precedence over per-analysis params.
struct AnalysisOptions {
    std::optional<double> epsilon;
    std::optional<double> gamma;
    std::optional<double> window;
    std::uint64_t terminal_seed = 1;
};

struct AnalysisOutcome {
    Json report;
    bool passed = true;
};

inline constexpr double kLimitEpsilon = 0.05;
inline constexpr double kDefaultWindow = 0.25;
/// gamma used when delta is zero at the window start (hardmax).
inline constexpr double kZeroDeltaGamma = 0.01;
inline constexpr std::size_t kMaxListed = 50;

namespace detail {

inline Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

inline std::optional<double> param(const AnalysisSpec& spec, const std::optional<double>& override_value,
                                   const std::string& key) {
    if (override_value) return override_value;
    const auto it = spec.params.find(key);
    if (it != spec.params.end()) return it->second;
    return std::nullopt;
}

inline bool has_neighborhoods(const Trajectory& traj) { return traj.params.kind() != DynamicsKind::softmax; }

/// Quiescence radius used for per-vertex checks, or nullopt if the theorem
/// does not supply one.
inline std::optional<double> theorem_radius(const Trajectory& traj) {
    if (traj.params.kind() != DynamicsKind::localmax || !traj.schedule.is_constant()) return std::nullopt;
    const double delta = traj.schedule.at(0);
    if (!(delta > 0.0)) return std::nullopt;
    return quiescence_radius(traj.params, delta);
}

template <class T, class F>
Json listed(const std::vector<T>& items, F&& to_json) {
    Json a = Json::array();
    for (std::size_t k = 0; k < items.size() && k < kMaxListed; ++k) a.push_back(to_json(items[k]));
    return a;
}

inline Json status(bool ok) { return ok ? "pass" : "fail"; }

} // namespace detail

inline TailClassification tail_classification_for(const Trajectory& traj, std::optional<double> gamma,
                                                  std::optional<double> window) {
    const Window w = tail_window(traj, window.value_or(kDefaultWindow));
    double g = gamma.value_or(default_gamma(traj, w));
    if (!gamma && !(g > 0.0)) g = kZeroDeltaGamma;
    if (!(g > 0.0)) throw ConfigError("gamma", "must be positive");
    return classify_tail(traj, g, w);
}

inline Json classification_json(const TailClassification& c) {
    Json j;
    j["gamma"] = c.gamma;
    j["window"] = {c.window.start, c.window.end};
    j["s1"] = c.s1;
    j["s2"] = c.s2;
    j["min_diameter"] = c.min_diameter;
    j["max_diameter"] = c.max_diameter;
    return j;
}

/// Runs `analyses` on a trajectory. Geometric checks need d = 2 and throw
/// std::domain_error otherwise; lyapunov_bounds throws MissingDataError
/// without retained matrices.
inline AnalysisOutcome analyze(const Trajectory& traj, const std::vector<AnalysisSpec>& analyses,
                               const AnalysisOptions& opt = {}) {
    using namespace detail;
    require_planar(traj.initial());
    AnalysisOutcome out;
    Json checks = Json::array();
    const Polygon hull = hull2d(traj.last());
    const auto& before = traj.configs.size() > 1 ? traj.configs[traj.configs.size() - 2] : traj.last();
    const double eta_gap = eta(before, hull);
    const AlignmentSet s = alignment_candidates(hull);
    const std::optional<double> q_radius = theorem_radius(traj);

    for (const auto& spec : analyses) {
        Json c{{"name", spec.name}};
        bool ok = true;
        if (spec.name == "hull_monotonicity") {
            const auto v = hull_monotonicity(traj);
            ok = v.empty();
            c["status"] = status(ok);
            c["tolerance"] = 1e-9;
            c["violation_count"] = v.size();
            c["violations"] = listed(v, [](const HullViolation& h) {
                return Json{{"t", h.t}, {"token", h.token}, {"depth", h.depth}};
            });
        } else if (spec.name == "alignment_set") {
            c["status"] = "info";
            Json verts = Json::array();
            for (const auto& v : hull.vertices()) verts.push_back(vec2_json(v));
            c["hull"] = verts;
            c["eta_horizon"] = eta_gap;
            Json pts = Json::array();
            for (const auto& p : s.points)
                pts.push_back({{"position", vec2_json(p.position)},
                               {"kind", p.kind == AlignmentPoint::Kind::vertex ? "vertex" : "face_projection"},
                               {"face", p.face},
                               {"index_set", p.index_set},
                               {"residual", p.residual}});
            c["points"] = pts;
        } else if (spec.name == "limit_classification") {
            const double eps = param(spec, opt.epsilon, "epsilon").value_or(kLimitEpsilon);
            const LimitReport r = limit_classification(traj, s, eps);
            // Convergence into S is guaranteed only when delta vanishes.
            const bool asserted = traj.params.kind() == DynamicsKind::localmax && !traj.schedule.is_constant();
            ok = !asserted || r.outside_count() == 0;
            c["status"] = asserted ? status(ok) : Json("info");
            c["epsilon"] = eps;
            c["outside_count"] = r.outside_count();
            c["max_distance"] = r.max_distance();
            Json tokens = Json::array();
            for (const auto& e : r.tokens)
                tokens.push_back({{"token", e.token},
                                  {"position", vec2_json(e.position)},
                                  {"nearest", e.nearest},
                                  {"distance", e.distance},
                                  {"outside_s", e.outside_s}});
            c["tokens"] = tokens;
        } else if (spec.name == "quiescence") {
            const auto eps = param(spec, opt.epsilon, "epsilon");
            const std::optional<double> radius = eps ? eps : q_radius;
            if (!radius) {
                c["status"] = "skipped";
                c["reason"] = "no quiescence radius: needs localmax with constant delta > 0, or --epsilon";
            } else {
                Json vs = Json::array();
                for (const auto& v : hull.vertices()) {
                    const QuiescenceReport q = quiescence(traj, v, *radius);
                    // Only occupied vertex balls are expected to settle.
                    if (!q.members.empty() && !q.settling_time) ok = false;
                    vs.push_back({{"vertex", vec2_json(v)},
                                  {"settling_time", q.settling_time ? Json(*q.settling_time) : Json(nullptr)},
                                  {"members", q.members},
                                  {"crossings", q.crossings},
                                  {"violations", listed(q.violations, [](const Crossing& x) {
                                       return Json{{"t", x.t},
                                                   {"token", x.token},
                                                   {"direction", x.direction == Crossing::Direction::in ? "in" : "out"}};
                                   })}});
                }
                const bool asserted = !eps && q_radius;
                if (!asserted) ok = true;
                c["status"] = asserted ? status(ok) : Json("info");
                c["epsilon"] = *radius;
                c["theorem_mode"] = asserted;
                c["vertices"] = vs;
            }
        } else if (spec.name == "contraction") {
            const double radius = param(spec, opt.epsilon, "epsilon").value_or(q_radius.value_or(kLimitEpsilon));
            Json vs = Json::array();
            for (const auto& v : hull.vertices()) {
                const QuiescenceReport q = quiescence(traj, v, radius);
                if (q.members.empty()) continue;
                const ContractionFit f = contraction_rate(traj, q.members, q.settling_time.value_or(0));
                vs.push_back({{"vertex", vec2_json(v)},
                              {"cluster", q.members},
                              {"from_t", q.settling_time.value_or(0)},
                              {"collapsed", f.collapsed},
                              {"ratio", f.collapsed ? Json(nullptr) : Json(f.ratio)},
                              {"max_rel_residual", f.max_rel_residual},
                              {"samples", f.samples},
                              {"mean_drift", f.mean_drift},
                              {"mean_constant", f.mean_constant}});
            }
            c["status"] = "info";
            c["epsilon"] = radius;
            c["expected_ratio"] = 1.0 / (1.0 + traj.params.alpha());
            c["clusters"] = vs;
        } else if (spec.name == "tail_classification") {
            if (!has_neighborhoods(traj)) {
                c["status"] = "skipped";
                c["reason"] = "softmax dynamics has no neighborhoods";
            } else {
                const TailClassification tc = tail_classification_for(traj, param(spec, opt.gamma, "gamma"),
                                                                      param(spec, opt.window, "window"));
                const InfluenceReport inf = influence_structure(traj, tc);
                const double eps = param(spec, opt.epsilon, "epsilon").value_or(kLimitEpsilon);
                Json prox = Json::array();
                bool consistent = true;
                for (const auto& p : tc.s1_vertices) {
                    consistent = consistent && p.distance <= eps;
                    prox.push_back({{"token", p.token}, {"vertex", vec2_json(p.vertex)}, {"distance", p.distance}});
                }
                ok = inf.violations.empty() && consistent;
                c = Json{{"name", spec.name}};
                c.update(classification_json(tc));
                c["status"] = status(ok);
                c["s1_vertex_epsilon"] = eps;
                c["s1_vertices"] = prox;
                c["s1_vertex_convergence"] = consistent ? "consistent" : "inconsistent";
                c["influence_violation_count"] = inf.violations.size();
                c["influence_violations"] = listed(inf.violations, [](const InfluenceViolation& x) {
                    return Json{{"t", x.t},
                                {"token", x.token},
                                {"kind", x.kind == InfluenceViolation::Kind::no_s1_neighbor ? "no_s1_neighbor"
                                                                                           : "s1_sees_s2"}};
                });
                c["s2_s2_events"] = inf.s2_s2_events;
            }
        } else if (spec.name == "diff_max") {
            if (!has_neighborhoods(traj)) {
                c["status"] = "skipped";
                c["reason"] = "the bound concerns localmax dynamics";
            } else {
                const Window w = tail_window(traj, param(spec, opt.window, "window").value_or(kDefaultWindow));
                const auto v = diff_max_check(traj, hull, w.start);
                ok = v.empty();
                c["status"] = status(ok);
                c["window"] = {w.start, w.end};
                c["slack"] = 1e-7;
                c["violation_count"] = v.size();
                c["violations"] = listed(v, [](const DiffMaxViolation& x) {
                    return Json{{"t", x.t}, {"token", x.token}, {"gap", x.gap}, {"bound", x.bound}};
                });
            }
        } else if (spec.name == "norm_growth") {
            if (!has_neighborhoods(traj)) {
                c["status"] = "skipped";
                c["reason"] = "the bound concerns localmax dynamics";
            } else {
                const NormGrowthReport r = norm_growth_check(traj, hull, eta_gap);
                ok = r.violations.empty();
                c["margin"] = eta_gap;
                c["checked"] = r.checked;
                c["violation_count"] = r.violations.size();
                c["violations"] = listed(r.violations, [](const NormGrowthViolation& x) {
                    return Json{{"t", x.t}, {"token", x.token}, {"increase", x.increase}, {"bound", x.bound}};
                });
                if (traj.params.kind() == DynamicsKind::localmax && traj.schedule.is_constant()) {
                    const CenterClearing cc = center_clearing_check(traj, hull, traj.schedule.at(0));
                    ok = ok && cc.violations.empty();
                    c["center_clearing"] = {{"applicable", cc.applicable},
                                            {"c_star", cc.c_star},
                                            {"t_lim", cc.t_lim},
                                            {"reached", cc.reached},
                                            {"violation_count", cc.violations.size()}};
                }
                c["status"] = status(ok);
            }
        } else if (spec.name == "lyapunov_bounds") {
            if (traj.matrices.size() != traj.steps())
                throw MissingDataError("matrices", "lyapunov_bounds needs the transition matrix of every step");
            const TailClassification tc =
                tail_classification_for(traj, param(spec, opt.gamma, "gamma"), param(spec, opt.window, "window"));
            const LyapunovReport r = lyapunov_report(traj, std::nullopt, tc);
            ok = r.lower_bound_violations.empty();
            c["status"] = status(ok);
            c["gamma"] = tc.gamma;
            c["window"] = {tc.window.start, tc.window.end};
            c["violation_count"] = r.lower_bound_violations.size();
        } else {
            throw ConfigError("analyses", "unknown analysis '" + spec.name + "'");
        }
        out.passed = out.passed && ok;
        checks.push_back(std::move(c));
    }
    out.report = {{"steps", traj.steps()},
                  {"n", traj.n()},
                  {"dynamics", std::string(to_string(traj.params.kind()))},
                  {"proxy", "final hull"},
                  {"eta_horizon", eta_gap},
                  {"passed", out.passed},
                  {"checks", checks}};
    return out;
}

/// lyapunov.json: APS from a uniform terminal, V and decrement residuals, the
/// S1/S2 mass split, both lower bounds, and the same relations for an APS
/// from a random terminal.
inline AnalysisOutcome lyapunov_analysis(const Trajectory& traj, const AnalysisOptions& opt = {}) {
    if (traj.params.kind() == DynamicsKind::softmax || traj.matrices.size() != traj.steps() || traj.steps() == 0)
        throw MissingDataError("matrices", "lyapunov analysis needs the transition matrix of every step");
    const TailClassification tc = tail_classification_for(traj, opt.gamma, opt.window);
    const LyapunovReport r = lyapunov_report(traj, std::nullopt, tc);
    const LyapunovReport alt = lyapunov_report(traj, ProbabilityVector::random(traj.n(), opt.terminal_seed));

    AnalysisOutcome out;
    const bool alt_ok = alt.aps_residual <= 1e-12 && alt.decrement.nonincreasing && alt.decrement.within_tolerance;
    out.passed = r.passed() && alt_ok;
    Json aps = Json::array();
    for (const auto& p : r.aps.vectors) aps.push_back(vector_json(p.weights()));
    Json& j = out.report;
    j["passed"] = out.passed;
    j["terminal"] = "uniform";
    j["aps"] = aps;
    j["aps_residual"] = r.aps_residual;
    j["renormalizations"] = r.aps.renormalizations;
    j["V"] = r.decrement.V;
    j["decrement_residuals"] = r.decrement.residual;
    j["max_residual"] = r.decrement.max_residual;
    j["residual_tolerance"] = "1e-10 * (1 + |V(t)|)";
    j["V_nonincreasing"] = r.decrement.nonincreasing;
    j["classification"] = classification_json(tc);
    j["W1"] = r.mass->w1;
    j["W2"] = r.mass->w2;
    j["s2_mass_tail"] = r.mass->s2_mass_tail;
    j["s2_mass_below_1e-6"] = r.mass->s2_mass_vanished;
    j["w2_increase_violations"] = r.w2_increase_violations;
    j["lower_bound_violations"] = detail::listed(r.lower_bound_violations, [](const LowerBoundViolation& v) {
        return Json{{"t", v.t},
                    {"bound", v.bound == LowerBoundViolation::Bound::diameter ? "diameter" : "gamma"},
                    {"decrease", v.decrease},
                    {"required", v.required}};
    });
    j["random_terminal"] = {{"seed", opt.terminal_seed},
                            {"aps_residual", alt.aps_residual},
                            {"max_residual", alt.decrement.max_residual},
                            {"V_nonincreasing", alt.decrement.nonincreasing},
                            {"V_initial", alt.decrement.V.front()},
                            {"V_final", alt.decrement.V.back()}};
    return out;
}

} // namespace attnflow::io
