#pragma once
// Trajectory-level checks of the structural properties of localmax
// dynamics: nested hulls, quiescent balls around vertices, geometric
// contraction of vertex clusters, zones of influence, the S1/S2 split of
// tokens by neighborhood diameter, and limit classification against the
// maximal alignment set.
//
// Statements that hold "after some finite time" are evaluated on a
// caller-chosen tail window. The limiting polytope is not observable; checks
// take a polygon proxy (normally the final hull), which contains it.

#include "attnflow/dynamics.hpp"
#include "attnflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace attnflow {

/// Inclusive range [start, end] of trajectory steps.
struct Window {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t length() const noexcept { return end - start + 1; }
    bool operator==(const Window&) const = default;
};

/// The last `fraction` of the trajectory's steps.
inline Window tail_window(const Trajectory& traj, double fraction = 0.25) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("window fraction must lie in (0, 1]");
    const std::size_t steps = traj.steps();
    const auto skip = static_cast<std::size_t>(std::floor(static_cast<double>(steps) * (1.0 - fraction)));
    return {std::min(skip, steps), steps};
}

/// Neighborhoods at step t: the retained ones when available, otherwise
/// recomputed from the state and the schedule.
inline std::vector<IndexSet> neighborhoods_at(const Trajectory& traj, std::size_t t) {
    if (t < traj.neighborhoods.size()) return traj.neighborhoods[t];
    return step_neighborhoods(traj.configs.at(t), traj.params, traj.schedule.at(t));
}

// ---------------------------------------------------------------------------
// Hull monotonicity

struct HullViolation {
    std::size_t t; // x_token(t+1) leaves hull(t)
    std::size_t token;
    double depth;
};

inline std::vector<HullViolation> hull_monotonicity(const Trajectory& traj, double tol = 1e-9) {
    std::vector<HullViolation> out;
    for (std::size_t t = 0; t + 1 < traj.configs.size(); ++t) {
        require_planar(traj.configs[t]);
        const Polygon hull = hull2d(traj.configs[t]);
        const auto& next = traj.configs[t + 1];
        for (std::size_t i = 0; i < next.n(); ++i) {
            const double depth = distance_to_polygon(as_vec2(next, i), hull);
            if (depth > tol) out.push_back({t, i, depth});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Neighborhood diameters and the S1/S2 split

/// d_i = max_{k,l in C} ||x_k - x_l||, zero for a singleton.
inline double neighborhood_diameter(const IndexSet& hood, const TokenConfiguration& config) {
    const Matrix& x = config.states();
    double best = 0.0;
    for (std::size_t a = 0; a < hood.size(); ++a)
        for (std::size_t b = a + 1; b < hood.size(); ++b)
            best = std::max(best, (x.row(static_cast<Eigen::Index>(hood[a])) -
                                   x.row(static_cast<Eigen::Index>(hood[b])))
                                      .norm());
    return best;
}

inline double neighbor_diameter(std::size_t i, const TokenConfiguration& config, const ModelParams& params,
                                double delta) {
    return neighborhood_diameter(neighborhood(i, config, params, delta), config);
}

struct VertexProximity {
    std::size_t token;
    Vec2 vertex;
    double distance;
};

struct TailClassification {
    IndexSet s1;
    IndexSet s2;
    double gamma = 0.0;
    Window window;
    std::vector<double> min_diameter; // per token over the window
    std::vector<double> max_diameter;
    std::vector<VertexProximity> s1_vertices; // nearest final-hull vertex of each S1 token

    bool in_s2(std::size_t i) const { return std::binary_search(s2.begin(), s2.end(), i); }
};

/// S2 holds the tokens whose neighborhood diameter stays >= gamma over the
/// whole window; S1 is the rest.
inline TailClassification classify_tail(const Trajectory& traj, double gamma, Window window) {
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    if (window.start > window.end || window.end > traj.steps()) throw std::invalid_argument("empty or out-of-range window");
    const std::size_t n = traj.n();
    TailClassification c;
    c.gamma = gamma;
    c.window = window;
    c.min_diameter.assign(n, std::numeric_limits<double>::infinity());
    c.max_diameter.assign(n, 0.0);
    for (std::size_t t = window.start; t <= window.end; ++t) {
        const auto hoods = neighborhoods_at(traj, t);
        for (std::size_t i = 0; i < n; ++i) {
            const double di = neighborhood_diameter(hoods[i], traj.configs[t]);
            c.min_diameter[i] = std::min(c.min_diameter[i], di);
            c.max_diameter[i] = std::max(c.max_diameter[i], di);
        }
    }
    for (std::size_t i = 0; i < n; ++i) (c.min_diameter[i] >= gamma ? c.s2 : c.s1).push_back(i);
    if (traj.d() == 2) {
        const Polygon hull = hull2d(traj.last());
        for (std::size_t i : c.s1) {
            const Vec2 x = as_vec2(traj.last(), i);
            VertexProximity best{i, hull.vertex(0), (x - hull.vertex(0)).norm()};
            for (const auto& v : hull.vertices())
                if ((x - v).norm() < best.distance) best = {i, v, (x - v).norm()};
            c.s1_vertices.push_back(best);
        }
    }
    return c;
}

/// Default gamma: one tenth of delta at the start of the window.
inline double default_gamma(const Trajectory& traj, const Window& window) {
    return 0.1 * traj.schedule.at(window.start);
}

struct InfluenceViolation {
    enum class Kind { no_s1_neighbor, s1_sees_s2 };
    std::size_t t;
    std::size_t token;
    Kind kind;
};

struct InfluenceReport {
    std::vector<InfluenceViolation> violations;
    std::size_t s2_s2_events = 0; // S2 token with an S2 neighbor other than itself
};

/// Over the classification window: every neighborhood meets S1, and S1
/// neighborhoods avoid S2. S2-to-S2 influence is only counted.
inline InfluenceReport influence_structure(const Trajectory& traj, const TailClassification& c) {
    InfluenceReport r;
    for (std::size_t t = c.window.start; t <= c.window.end; ++t) {
        const auto hoods = neighborhoods_at(traj, t);
        for (std::size_t i = 0; i < hoods.size(); ++i) {
            bool meets_s1 = false, meets_s2 = false, s2_other = false;
            for (std::size_t j : hoods[i]) {
                if (c.in_s2(j)) {
                    meets_s2 = true;
                    s2_other = s2_other || j != i;
                } else {
                    meets_s1 = true;
                }
            }
            if (!meets_s1) r.violations.push_back({t, i, InfluenceViolation::Kind::no_s1_neighbor});
            if (!c.in_s2(i) && meets_s2) r.violations.push_back({t, i, InfluenceViolation::Kind::s1_sees_s2});
            if (c.in_s2(i) && s2_other) ++r.s2_s2_events;
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Quiescent balls

struct Crossing {
    enum class Direction { in, out };
    std::size_t t; // first step with the new membership
    std::size_t token;
    Direction direction;
};

struct QuiescenceReport {
    Vec2 vertex;
    double epsilon = 0.0;
    std::optional<std::size_t> settling_time;
    std::vector<Crossing> violations; // crossings after settling; every crossing when unsettled
    std::size_t crossings = 0;
    IndexSet members; // tokens in the ball at the last step
};

/// Settling time of the closed ball B(v, epsilon): the least T after which no
/// token enters or leaves, within the recorded horizon. It is reported absent
/// when membership still changes at the final step.
inline QuiescenceReport quiescence(const Trajectory& traj, const Vec2& v, double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
    require_planar(traj.initial());
    QuiescenceReport r;
    r.vertex = v;
    r.epsilon = epsilon;
    const std::size_t n = traj.n();
    std::vector<Crossing> crossings;
    std::vector<bool> inside(n);
    for (std::size_t i = 0; i < n; ++i) inside[i] = (as_vec2(traj.initial(), i) - v).norm() <= epsilon;
    for (std::size_t t = 1; t < traj.configs.size(); ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            const bool now = (as_vec2(traj.configs[t], i) - v).norm() <= epsilon;
            if (now != inside[i])
                crossings.push_back({t, i, now ? Crossing::Direction::in : Crossing::Direction::out});
            inside[i] = now;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (inside[i]) r.members.push_back(i);
    r.crossings = crossings.size();
    const std::size_t settle = crossings.empty() ? 0 : crossings.back().t;
    if (settle < traj.steps() || traj.steps() == 0) r.settling_time = settle;
    else r.violations = std::move(crossings);
    return r;
}

/// The ball radius delta / (2 + 2 alpha) below which vertex balls are quiescent.
inline double quiescence_radius(const ModelParams& params, double delta) {
    return delta / (2.0 + 2.0 * params.alpha());
}

/// quiescence() with epsilon = delta / (2 + 2 alpha); needs a constant schedule.
inline QuiescenceReport quiescence_theorem_mode(const Trajectory& traj, const Vec2& v) {
    if (!traj.schedule.is_constant()) throw std::invalid_argument("theorem-mode quiescence needs a constant delta");
    return quiescence(traj, v, quiescence_radius(traj.params, traj.schedule.at(0)));
}

// ---------------------------------------------------------------------------
// Cluster contraction

struct ContractionFit {
    bool collapsed = false;     // fewer than two usable samples
    double ratio = 0.0;         // fitted D(t+1)/D(t)
    double max_rel_residual = 0.0;
    double mean_drift = 0.0;    // max_t ||m(t) - m(from_t)||
    bool mean_constant = false; // mean_drift <= 1e-9
    std::size_t samples = 0;
    std::vector<double> spread; // D(t) for t >= from_t
};

/// D(t) = max_{j in cluster} ||x_j(t) - m(t)|| with m the cluster mean, fitted
/// as D(t) ~ c * ratio^t by least squares on log D. Samples with D below
/// `floor_rel * max(1, ||m||)` are left out; they are at rounding level.
inline ContractionFit contraction_rate(const Trajectory& traj, const IndexSet& cluster, std::size_t from_t,
                                       double floor_rel = 1e-7) {
    if (cluster.empty()) throw std::invalid_argument("cluster must be non-empty");
    if (from_t >= traj.configs.size()) throw std::invalid_argument("from_t beyond the trajectory");
    ContractionFit fit;
    const auto mean_at = [&](std::size_t t) {
        Vector m = Vector::Zero(static_cast<Eigen::Index>(traj.d()));
        for (std::size_t j : cluster) m += traj.configs[t].token(j);
        return Vector(m / static_cast<double>(cluster.size()));
    };
    const Vector m0 = mean_at(from_t);
    const double floor = floor_rel * std::max(1.0, m0.norm());
    std::vector<double> ts, logs;
    for (std::size_t t = from_t; t < traj.configs.size(); ++t) {
        const Vector m = mean_at(t);
        fit.mean_drift = std::max(fit.mean_drift, (m - m0).norm());
        double spread = 0.0;
        for (std::size_t j : cluster) spread = std::max(spread, (traj.configs[t].token(j) - m).norm());
        fit.spread.push_back(spread);
        if (spread > floor) {
            ts.push_back(static_cast<double>(t));
            logs.push_back(std::log(spread));
        }
    }
    fit.mean_constant = fit.mean_drift <= 1e-9;
    fit.samples = ts.size();
    if (ts.size() < 2) {
        fit.collapsed = true;
        return fit;
    }
    const double k = static_cast<double>(ts.size());
    double tm = 0.0, lm = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s) tm += ts[s], lm += logs[s];
    tm /= k;
    lm /= k;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t s = 0; s < ts.size(); ++s) {
        sxy += (ts[s] - tm) * (logs[s] - lm);
        sxx += (ts[s] - tm) * (ts[s] - tm);
    }
    const double slope = sxy / sxx;
    fit.ratio = std::exp(slope);
    for (std::size_t s = 0; s < ts.size(); ++s) {
        const double predicted = std::exp(lm + slope * (ts[s] - tm));
        fit.max_rel_residual = std::max(fit.max_rel_residual, std::abs(std::exp(logs[s]) / predicted - 1.0));
    }
    return fit;
}

// ---------------------------------------------------------------------------
// Zone of influence

/// Tokens within eta_bound of K lying in the half-space <v - x, v> <= delta ||v||.
inline IndexSet zone_of_influence(const Vec2& v, const TokenConfiguration& config, const Polygon& k,
                                  double eta_bound, double delta) {
    require_planar(config);
    if (v.isZero(0.0)) throw std::invalid_argument("zone of influence needs a non-zero vertex");
    IndexSet out;
    for (std::size_t i = 0; i < config.n(); ++i) {
        const Vec2 x = as_vec2(config, i);
        if (distance_to_polygon(x, k) <= eta_bound && (v - x).dot(v) <= delta * v.norm()) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Limit classification

struct LimitEntry {
    std::size_t token;
    Vec2 position;
    std::size_t nearest; // index into the alignment set
    double distance;
    bool outside_s;
};

struct LimitReport {
    double epsilon = 0.0;
    std::vector<LimitEntry> tokens;

    std::size_t outside_count() const {
        return static_cast<std::size_t>(
            std::count_if(tokens.begin(), tokens.end(), [](const LimitEntry& e) { return e.outside_s; }));
    }
    double max_distance() const {
        double m = 0.0;
        for (const auto& e : tokens) m = std::max(m, e.distance);
        return m;
    }
};

/// Final positions against S; a token is outside S when its distance to every
/// element exceeds epsilon.
inline LimitReport limit_classification(const Trajectory& traj, const AlignmentSet& s, double epsilon) {
    require_planar(traj.last());
    LimitReport r;
    r.epsilon = epsilon;
    for (std::size_t i = 0; i < traj.n(); ++i) {
        const Vec2 x = as_vec2(traj.last(), i);
        const auto [idx, dist] = s.nearest(x);
        r.tokens.push_back({i, x, idx, dist, dist > epsilon});
    }
    return r;
}

// ---------------------------------------------------------------------------
// Norm growth of deep-interior tokens

struct NormGrowthViolation {
    std::size_t t;
    std::size_t token;
    double increase; // ||x(t+1)||^2 - ||x(t)||^2
    double bound;
};

/// For tokens in K, non-zero, at distance >= delta(t) + margin from the
/// boundary: ||x(t+1)||^2 - ||x(t)||^2 >= 2 c (delta/n) ||x|| + c^2 (delta/n)^2
/// with c = alpha / (1 + alpha). `margin` absorbs the gap between a polygon
/// proxy and K. Returns violations beyond `slack` and counts the steps where
/// the premise held.
struct NormGrowthReport {
    std::vector<NormGrowthViolation> violations;
    std::size_t checked = 0;
};

inline NormGrowthReport norm_growth_check(const Trajectory& traj, const Polygon& k, double margin = 0.0,
                                          double slack = 1e-9) {
    require_planar(traj.initial());
    NormGrowthReport r;
    if (k.degenerate()) return r;
    const double c = traj.params.alpha() / (1.0 + traj.params.alpha());
    const double n = static_cast<double>(traj.n());
    for (std::size_t t = 0; t + 1 < traj.configs.size(); ++t) {
        const double delta = traj.params.kind() == DynamicsKind::hardmax ? 0.0 : traj.schedule.at(t);
        for (std::size_t i = 0; i < traj.n(); ++i) {
            const Vec2 x = as_vec2(traj.configs[t], i);
            if (x.isZero(0.0) || !in_halfplanes(x, k) || distance_to_boundary(x, k) < delta + margin) continue;
            ++r.checked;
            const double increase = as_vec2(traj.configs[t + 1], i).squaredNorm() - x.squaredNorm();
            const double bound = 2.0 * c * (delta / n) * x.norm() + c * c * (delta / n) * (delta / n);
            if (increase < bound - slack) r.violations.push_back({t, i, increase, bound});
        }
    }
    return r;
}

/// Clearing of the central region: when 0 lies in K at distance >= delta from
/// the boundary and no initial token is at the origin, every token has norm
/// greater than c* = dist(0, dK) - delta from t_lim = floor(2 c* (M + nu) /
/// (m nu)) + 1 on, with nu = (c delta / n)^2, M the largest token norm along
/// the trajectory and m the smallest initial norm.
struct CenterClearing {
    bool applicable = false;
    double c_star = 0.0;
    double nu = 0.0;
    double big_m = 0.0;
    double small_m = 0.0;
    std::size_t t_lim = 0;
    bool reached = false; // trajectory extends to t_lim
    std::vector<std::pair<std::size_t, std::size_t>> violations; // (t, token) with ||x|| <= c*
};

inline CenterClearing center_clearing_check(const Trajectory& traj, const Polygon& k, double delta) {
    require_planar(traj.initial());
    CenterClearing r;
    const Vec2 origin = Vec2::Zero();
    if (k.degenerate() || !in_halfplanes(origin, k)) return r;
    const double boundary = distance_to_boundary(origin, k);
    if (boundary < delta) return r;
    const Matrix& x0 = traj.initial().states();
    r.small_m = x0.rowwise().norm().minCoeff();
    if (!(r.small_m > 0.0) || !(delta > 0.0)) return r;
    r.applicable = true;
    const double c = traj.params.alpha() / (1.0 + traj.params.alpha());
    const double n = static_cast<double>(traj.n());
    r.c_star = boundary - delta;
    r.nu = c * c * delta * delta / (n * n);
    for (const auto& cfg : traj.configs) r.big_m = std::max(r.big_m, cfg.states().rowwise().norm().maxCoeff());
    r.t_lim = static_cast<std::size_t>(std::floor(2.0 * r.c_star * (r.big_m + r.nu) / (r.small_m * r.nu))) + 1;
    r.reached = r.t_lim < traj.configs.size();
    for (std::size_t t = r.t_lim; t < traj.configs.size(); ++t)
        for (std::size_t i = 0; i < traj.n(); ++i)
            if (!(as_vec2(traj.configs[t], i).norm() > r.c_star)) r.violations.emplace_back(t, i);
    return r;
}

// ---------------------------------------------------------------------------
// Alignment gap against the polytope proxy

struct DiffMaxViolation {
    std::size_t t;
    std::size_t token;
    double gap;   // max_l <x_i, x_l> - max_k <x_i, v_k>
    double bound; // eta(t) ||x_i||
};

/// 0 <= max_l <x_i, x_l> - max_k <x_i, v_k> <= eta(t) ||x_i|| with eta measured
/// against K, checked on steps [from_t, end] with `slack`.
inline std::vector<DiffMaxViolation> diff_max_check(const Trajectory& traj, const Polygon& k, std::size_t from_t = 0,
                                                    double slack = 1e-7) {
    require_planar(traj.initial());
    std::vector<DiffMaxViolation> out;
    for (std::size_t t = from_t; t < traj.configs.size(); ++t) {
        const auto& cfg = traj.configs[t];
        const double e = eta(cfg, k);
        for (std::size_t i = 0; i < cfg.n(); ++i) {
            const Vec2 x = as_vec2(cfg, i);
            const double token_max = (cfg.states() * x).maxCoeff();
            const double gap = token_max - max_vertex_alignment(x, k);
            const double bound = e * x.norm();
            if (gap < -slack || gap > bound + slack) out.push_back({t, i, gap, bound});
        }
    }
    return out;
}

} // namespace attnflow
