#pragma once
// Static SVG 1.1 plots of planar trajectories. Coordinates are written at 6
// significant digits, so identical inputs give identical bytes.

#include "attnflow/geometry.hpp"
#include "attnflow/io/json_io.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attnflow::io {

enum class PlotKind { trails, initial, final };

inline PlotKind plot_kind_from_string(std::string_view s) {
    if (s == "trails") return PlotKind::trails;
    if (s == "initial") return PlotKind::initial;
    if (s == "final") return PlotKind::final;
    throw ConfigError("kind", "unknown plot kind '" + std::string(s) + "' (trails, initial, final)");
}

/// Points taken from an analysis report.
struct PlotOverlay {
    std::vector<Vec2> s_points;
    std::vector<Vec2> outside;
};

/// Reads the alignment_set and limit_classification checks of a report.json.
inline PlotOverlay overlay_from_report(const Json& report) {
    PlotOverlay o;
    if (!report.is_object() || !report.contains("checks") || !report["checks"].is_array())
        throw ConfigError("checks", "report has no checks array");
    const auto point = [](const Json& p, const std::string& path) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ConfigError(path, "expected a 2-vector");
        return Vec2(p[0].get<double>(), p[1].get<double>());
    };
    for (std::size_t k = 0; k < report["checks"].size(); ++k) {
        const Json& c = report["checks"][k];
        const std::string path = "checks[" + std::to_string(k) + "]";
        const std::string name = c.value("name", "");
        if (name == "alignment_set" && c.contains("points"))
            for (std::size_t i = 0; i < c["points"].size(); ++i)
                o.s_points.push_back(point(c["points"][i].value("position", Json()), path + ".points[" + std::to_string(i) + "].position"));
        if (name == "limit_classification" && c.contains("tokens"))
            for (std::size_t i = 0; i < c["tokens"].size(); ++i)
                if (c["tokens"][i].value("outside_s", false))
                    o.outside.push_back(point(c["tokens"][i].value("position", Json()), path + ".tokens[" + std::to_string(i) + "].position"));
    }
    return o;
}

namespace detail {

class SvgCanvas {
public:
    SvgCanvas(double xmin, double xmax, double ymin, double ymax) {
        const double span = std::max({xmax - xmin, ymax - ymin, 1e-9});
        scale_ = (kSize - 2 * kMargin) / span;
        cx_ = 0.5 * (xmin + xmax);
        cy_ = 0.5 * (ymin + ymax);
    }

    double px(double v) const { return kSize / 2 + (v - cx_) * scale_; }
    double py(double v) const { return kSize / 2 - (v - cy_) * scale_; }
    std::string x(double v) const { return num(px(v)); }
    std::string y(double v) const { return num(py(v)); }
    static std::string num(double v) { return format_double(v, 6); }

    std::string points(const std::vector<Vec2>& pts) const {
        std::string s;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (k) s += ' ';
            s += x(pts[k].x()) + "," + y(pts[k].y());
        }
        return s;
    }

    static constexpr double kSize = 600.0;
    static constexpr double kMargin = 30.0;

private:
    double scale_ = 1.0;
    double cx_ = 0.0;
    double cy_ = 0.0;
};

inline std::string hull_svg(const SvgCanvas& cv, const Polygon& hull, std::string_view style) {
    const auto& v = hull.vertices();
    if (v.size() == 1)
        return "<circle cx=\"" + cv.x(v[0].x()) + "\" cy=\"" + cv.y(v[0].y()) + "\" r=\"6\" fill=\"none\" " +
               std::string(style) + "/>\n";
    if (v.size() == 2)
        return "<line x1=\"" + cv.x(v[0].x()) + "\" y1=\"" + cv.y(v[0].y()) + "\" x2=\"" + cv.x(v[1].x()) + "\" y2=\"" +
               cv.y(v[1].y()) + "\" " + std::string(style) + "/>\n";
    return "<polygon points=\"" + cv.points(v) + "\" fill=\"none\" " + std::string(style) + "/>\n";
}

inline std::vector<Vec2> positions(const TokenConfiguration& c) {
    std::vector<Vec2> p;
    for (std::size_t i = 0; i < c.n(); ++i) p.push_back(as_vec2(c, i));
    return p;
}

} // namespace detail

/// trails: every token's path with the initial (dashed) and final hulls.
/// initial / final: token positions with the hull at that time.
inline std::string render_svg(const Trajectory& traj, PlotKind kind, const std::optional<PlotOverlay>& overlay = {}) {
    using detail::SvgCanvas;
    require_planar(traj.initial());
    std::vector<const TokenConfiguration*> shown;
    if (kind == PlotKind::trails)
        for (const auto& c : traj.configs) shown.push_back(&c);
    else shown.push_back(kind == PlotKind::initial ? &traj.initial() : &traj.last());

    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin, xmax = -xmin, ymax = -xmin;
    const auto grow = [&](const Vec2& p) {
        xmin = std::min(xmin, p.x()), xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y()), ymax = std::max(ymax, p.y());
    };
    for (const auto* c : shown)
        for (std::size_t i = 0; i < c->n(); ++i) grow(as_vec2(*c, i));
    if (overlay) {
        for (const auto& p : overlay->s_points) grow(p);
        for (const auto& p : overlay->outside) grow(p);
    }
    const SvgCanvas cv(xmin, xmax, ymin, ymax);
    const std::string size = SvgCanvas::num(SvgCanvas::kSize);

    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + size + "\" height=\"" + size +
         "\" viewBox=\"0 0 " + size + " " + size + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const Polygon first = hull2d(traj.initial());
    const Polygon last = hull2d(traj.last());
    if (kind == PlotKind::trails) {
        s += "<g stroke=\"#7f7f7f\" stroke-width=\"0.8\" fill=\"none\" stroke-opacity=\"0.7\">\n";
        for (std::size_t i = 0; i < traj.n(); ++i) {
            std::vector<Vec2> path;
            for (const auto& c : traj.configs) path.push_back(as_vec2(c, i));
            s += "<polyline points=\"" + cv.points(path) + "\"/>\n";
        }
        s += "</g>\n";
        s += detail::hull_svg(cv, first, "stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"");
        s += detail::hull_svg(cv, last, "stroke=\"#d62728\" stroke-width=\"1.5\"");
    } else {
        s += detail::hull_svg(cv, kind == PlotKind::initial ? first : last,
                              kind == PlotKind::initial ? "stroke=\"#1f77b4\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\""
                                                        : "stroke=\"#d62728\" stroke-width=\"1.5\"");
    }
    const auto dots = detail::positions(kind == PlotKind::initial ? traj.initial() : traj.last());
    s += "<g fill=\"#000000\">\n";
    for (const auto& p : dots) s += "<circle cx=\"" + cv.x(p.x()) + "\" cy=\"" + cv.y(p.y()) + "\" r=\"2.5\"/>\n";
    s += "</g>\n";
    if (overlay) {
        s += "<g fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"1.5\">\n";
        for (const auto& p : overlay->s_points)
            s += "<rect x=\"" + SvgCanvas::num(cv.px(p.x()) - 5) + "\" y=\"" + SvgCanvas::num(cv.py(p.y()) - 5) +
                 "\" width=\"10\" height=\"10\"/>\n";
        s += "</g>\n<g stroke=\"#d62728\" stroke-width=\"2\">\n";
        for (const auto& p : overlay->outside) {
            const double px = cv.px(p.x()), py = cv.py(p.y());
            s += "<line x1=\"" + SvgCanvas::num(px - 6) + "\" y1=\"" + SvgCanvas::num(py - 6) + "\" x2=\"" +
                 SvgCanvas::num(px + 6) + "\" y2=\"" + SvgCanvas::num(py + 6) + "\"/>\n";
            s += "<line x1=\"" + SvgCanvas::num(px - 6) + "\" y1=\"" + SvgCanvas::num(py + 6) + "\" x2=\"" +
                 SvgCanvas::num(px + 6) + "\" y2=\"" + SvgCanvas::num(py - 6) + "\"/>\n";
        }
        s += "</g>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace attnflow::io
