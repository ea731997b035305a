#pragma once
// Planar convex-polygon geometry: hulls, distances, and the maximal
// alignment set S = { x in K : ||x||^2 = max_k <x, v_k> } of a polygon K.
//
// Everything here is two-dimensional. Callers holding d != 2 data get a
// std::domain_error.

#include "attnflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace attnflow {

/// Turns whose sine is at or below this value count as collinear in hull2d.
inline constexpr double kCollinearTol = 1e-12;
/// Default absolute tolerance of alignment-set membership and deduplication.
inline constexpr double kAlignmentTol = 1e-9;

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

enum class PolygonKind { point, segment, polygon };

/// Convex polygon with counterclockwise vertices, starting at the
/// lexicographically smallest one. Fewer than three vertices means the
/// polygon is degenerate (a point or a segment).
class Polygon {
public:
    const std::vector<Vec2>& vertices() const noexcept { return vertices_; }
    std::size_t size() const noexcept { return vertices_.size(); }
    const Vec2& vertex(std::size_t k) const { return vertices_.at(k); }
    PolygonKind kind() const noexcept {
        return vertices_.size() == 1 ? PolygonKind::point
               : vertices_.size() == 2 ? PolygonKind::segment
                                       : PolygonKind::polygon;
    }
    bool degenerate() const noexcept { return vertices_.size() < 3; }

    bool operator==(const Polygon& o) const { return vertices_ == o.vertices_; }

private:
    friend Polygon hull2d(std::span<const Vec2> points);
    explicit Polygon(std::vector<Vec2> v) : vertices_(std::move(v)) {}
    std::vector<Vec2> vertices_;
};

/// Andrew's monotone chain. Collinear and coincident points are dropped.
inline Polygon hull2d(std::span<const Vec2> points) {
    if (points.empty()) throw std::invalid_argument("hull of an empty point set");
    for (const auto& p : points)
        if (!p.allFinite()) throw std::invalid_argument("hull input has non-finite coordinates");
    std::vector<Vec2> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return Polygon(pts);

    const auto straight = [](const Vec2& a, const Vec2& b, const Vec2& p) {
        const Vec2 u = b - a, w = p - b;
        return cross(u, w) <= kCollinearTol * u.norm() * w.norm();
    };
    std::vector<Vec2> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && straight(h[k - 2], h[k - 1], p)) --k;
        h[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        const auto& p = pts[i];
        while (k >= lower && straight(h[k - 2], h[k - 1], p)) --k;
        h[k++] = p;
    }
    h.resize(k - 1);
    if (h.size() < 3) {
        // All (nearly) collinear: keep the two extreme points.
        h = {pts.front(), pts.back()};
        if (h[0] == h[1]) h.pop_back();
    }
    return Polygon(std::move(h));
}

inline Polygon hull2d(const Matrix& rows) {
    if (rows.cols() != 2) throw std::domain_error("planar geometry requires d = 2");
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) pts.emplace_back(rows(i, 0), rows(i, 1));
    return hull2d(std::span<const Vec2>(pts));
}

inline Polygon hull2d(const TokenConfiguration& config) { return hull2d(config.states()); }

inline double point_segment_distance(const Vec2& x, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (x - a).norm();
    const double s = std::clamp((x - a).dot(ab) / len2, 0.0, 1.0);
    return (x - (a + s * ab)).norm();
}

/// True when x satisfies every edge half-plane inequality up to `tol`.
inline bool in_halfplanes(const Vec2& x, const Polygon& k, double tol = 0.0) {
    if (k.degenerate()) return false;
    const auto& v = k.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2& a = v[i];
        const Vec2& b = v[(i + 1) % v.size()];
        if (cross(b - a, x - a) < -tol) return false;
    }
    return true;
}

/// Distance from x to the nearest point of the boundary of K.
inline double distance_to_boundary(const Vec2& x, const Polygon& k) {
    const auto& v = k.vertices();
    if (v.size() == 1) return (x - v[0]).norm();
    double best = std::numeric_limits<double>::infinity();
    const std::size_t edges = v.size() == 2 ? 1 : v.size();
    for (std::size_t i = 0; i < edges; ++i)
        best = std::min(best, point_segment_distance(x, v[i], v[(i + 1) % v.size()]));
    return best;
}

/// dist(x, K): zero inside or on the boundary.
inline double distance_to_polygon(const Vec2& x, const Polygon& k) {
    if (!k.degenerate() && in_halfplanes(x, k)) return 0.0;
    return distance_to_boundary(x, k);
}

inline Vec2 as_vec2(const TokenConfiguration& config, std::size_t i) {
    return {config.states()(static_cast<Eigen::Index>(i), 0), config.states()(static_cast<Eigen::Index>(i), 1)};
}

inline void require_planar(const TokenConfiguration& config) {
    if (config.d() != 2) throw std::domain_error("planar geometry requires d = 2");
}

/// eta = max_i dist(x_i, K).
inline double eta(const TokenConfiguration& config, const Polygon& k) {
    require_planar(config);
    double worst = 0.0;
    for (std::size_t i = 0; i < config.n(); ++i) worst = std::max(worst, distance_to_polygon(as_vec2(config, i), k));
    return worst;
}

/// max_k <x, v_k> over the vertices of K.
inline double max_vertex_alignment(const Vec2& x, const Polygon& k) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : k.vertices()) best = std::max(best, x.dot(v));
    return best;
}

/// ||x||^2 - max_k <x, v_k>; zero exactly on S, non-positive on K.
inline double alignment_residual(const Vec2& x, const Polygon& k) {
    return x.squaredNorm() - max_vertex_alignment(x, k);
}

/// I_x: vertices maximizing <x, v_k>, grouped at 1e-12 relative tolerance.
inline IndexSet index_set(const Vec2& x, const Polygon& k) {
    const auto& v = k.vertices();
    std::vector<double> vals(v.size());
    double best = -std::numeric_limits<double>::infinity();
    double scale = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        vals[i] = x.dot(v[i]);
        best = std::max(best, vals[i]);
        scale = std::max(scale, std::abs(vals[i]));
    }
    const double tol = 1e-12 * scale;
    IndexSet out;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (vals[i] >= best - tol) out.push_back(i);
    return out;
}

/// Orthogonal projection of the origin onto the line through a and b, kept
/// only when it falls on the closed segment.
inline std::optional<Vec2> project_origin_to_edge(const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) throw std::invalid_argument("zero-length edge");
    const double s = -a.dot(ab) / len2;
    if (s < 0.0 || s > 1.0) return std::nullopt;
    return Vec2(a - (a.dot(ab) / len2) * ab);
}

struct AlignmentPoint {
    enum class Kind { vertex, face_projection };
    Vec2 position;
    Kind kind;
    IndexSet face;      // vertex indices spanning the generating face
    IndexSet index_set; // I_x
    double residual;    // ||x||^2 - max_k <x, v_k>
};

struct AlignmentSet {
    std::vector<AlignmentPoint> points;

    std::size_t size() const noexcept { return points.size(); }

    /// Nearest element and its distance.
    std::pair<std::size_t, double> nearest(const Vec2& x) const {
        if (points.empty()) throw std::logic_error("empty alignment set");
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double dd = (points[i].position - x).norm();
            if (dd < dist) dist = dd, best = i;
        }
        return {best, dist};
    }
};

namespace detail {

inline void push_unique(AlignmentSet& s, AlignmentPoint p, double tol) {
    for (const auto& q : s.points)
        if ((q.position - p.position).norm() <= tol) return;
    s.points.push_back(std::move(p));
}

} // namespace detail

/// S for a non-degenerate polygon: every vertex, every origin projection onto
/// an edge that passes the ||x||^2 = max_k <x, v_k> test, and the origin when
/// it lies in K and passes the same test. Vertices are included
/// unconditionally; on a limiting polytope of the dynamics they always pass
/// the test, on an arbitrary polygon their `residual` shows whether they do.
inline AlignmentSet maximal_alignment_set(const Polygon& k, double tol = kAlignmentTol) {
    if (k.degenerate()) throw std::invalid_argument("maximal alignment set needs a non-degenerate polygon");
    const auto& v = k.vertices();
    const std::size_t r = v.size();
    AlignmentSet s;
    for (std::size_t i = 0; i < r; ++i)
        s.points.push_back({v[i], AlignmentPoint::Kind::vertex, {i}, index_set(v[i], k), alignment_residual(v[i], k)});
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t j = (i + 1) % r;
        const auto p = project_origin_to_edge(v[i], v[j]);
        if (!p) continue;
        const double res = alignment_residual(*p, k);
        if (std::abs(res) > tol) continue;
        detail::push_unique(s, {*p, AlignmentPoint::Kind::face_projection, {std::min(i, j), std::max(i, j)},
                                index_set(*p, k), res},
                            tol);
    }
    const Vec2 origin = Vec2::Zero();
    if (in_halfplanes(origin, k)) {
        const double res = alignment_residual(origin, k);
        if (std::abs(res) <= tol) {
            IndexSet all(r);
            for (std::size_t i = 0; i < r; ++i) all[i] = i;
            detail::push_unique(s, {origin, AlignmentPoint::Kind::face_projection, all, index_set(origin, k), res},
                                tol);
        }
    }
    return s;
}

/// Alignment set of any polygon, including degenerate ones: a point is its
/// own S; a segment contributes both endpoints and the origin projection
/// when that passes the membership test.
inline AlignmentSet alignment_candidates(const Polygon& k, double tol = kAlignmentTol) {
    if (!k.degenerate()) return maximal_alignment_set(k, tol);
    const auto& v = k.vertices();
    AlignmentSet s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s.points.push_back({v[i], AlignmentPoint::Kind::vertex, {i}, index_set(v[i], k), alignment_residual(v[i], k)});
    if (v.size() == 2) {
        if (const auto p = project_origin_to_edge(v[0], v[1])) {
            const double res = alignment_residual(*p, k);
            if (std::abs(res) <= tol)
                detail::push_unique(s, {*p, AlignmentPoint::Kind::face_projection, {0, 1}, index_set(*p, k), res}, tol);
        }
    }
    return s;
}

} // namespace attnflow
