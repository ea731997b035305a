#pragma once
// Run configuration: model, schedule, initial data, horizon, retention and
// requested analyses. Parsed from and serialized to JSON; parse errors carry
// the JSON path of the offending field.

#include "attnflow/dynamics.hpp"
#include "attnflow/io/json_io.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace attnflow::io {

inline bool same_matrix(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

/// `count` tokens drawn uniformly from the box [lo, hi).
struct BoxPart {
    std::size_t count = 0;
    Vector lo;
    Vector hi;
    bool operator==(const BoxPart& o) const { return count == o.count && same_matrix(lo, o.lo) && same_matrix(hi, o.hi); }
};

/// Explicit token positions, one per row.
struct PointsPart {
    Matrix points;
    bool operator==(const PointsPart& o) const { return same_matrix(points, o.points); }
};

using InitPart = std::variant<BoxPart, PointsPart>;

struct AnalysisSpec {
    std::string name;
    std::map<std::string, double> params;
    bool operator==(const AnalysisSpec&) const = default;
};

inline const std::vector<std::string>& known_analyses() {
    static const std::vector<std::string> names{"hull_monotonicity", "alignment_set",      "limit_classification",
                                                "quiescence",        "contraction",        "tail_classification",
                                                "diff_max",          "norm_growth",        "lyapunov_bounds"};
    return names;
}

inline std::vector<AnalysisSpec> default_analyses() {
    return {{"hull_monotonicity", {}}, {"alignment_set", {}},       {"limit_classification", {}},
            {"quiescence", {}},        {"contraction", {}},         {"tail_classification", {}},
            {"diff_max", {}},          {"norm_growth", {}}};
}

struct RunConfig {
    std::string name;
    std::size_t n = 0;
    std::size_t d = 0;
    double alpha = 0.0;
    DynamicsKind kind = DynamicsKind::localmax;
    SoftmaxOptions softmax;
    DeltaSchedule schedule = DeltaSchedule::constant(0.0);
    std::optional<Matrix> interaction; // identity when absent
    std::vector<InitPart> init;
    std::uint64_t seed = 0;
    std::size_t horizon = 1;
    double stop_tol = 0.0;
    RetainFlags retain;
    std::vector<AnalysisSpec> analyses;

    bool uses_seed() const {
        return std::any_of(init.begin(), init.end(), [](const InitPart& p) { return std::holds_alternative<BoxPart>(p); });
    }

    ModelParams params() const {
        try {
            Matrix a = interaction ? *interaction : Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
            return ModelParams(alpha, std::move(a), kind, softmax);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(interaction ? "interaction" : "alpha", e.what());
        }
    }

    /// Initial configuration. Box parts consume the generator's counter in
    /// order, so a single box reproduces sample_uniform_box exactly.
    TokenConfiguration initial() const {
        Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        const CounterRng rng(seed);
        std::uint64_t counter = 0;
        Eigen::Index row = 0;
        for (const auto& part : init) {
            if (const auto* box = std::get_if<BoxPart>(&part)) {
                for (std::size_t i = 0; i < box->count; ++i, ++row)
                    for (Eigen::Index k = 0; k < x.cols(); ++k)
                        x(row, k) = box->lo[k] + (box->hi[k] - box->lo[k]) * rng.uniform_at(counter++);
            } else {
                const Matrix& p = std::get<PointsPart>(part).points;
                x.middleRows(row, p.rows()) = p;
                row += p.rows();
            }
        }
        return TokenConfiguration(std::move(x));
    }

    bool operator==(const RunConfig& o) const {
        const bool same_interaction = interaction.has_value() == o.interaction.has_value() &&
                                      (!interaction || same_matrix(*interaction, *o.interaction));
        return name == o.name && n == o.n && d == o.d && alpha == o.alpha && kind == o.kind && softmax == o.softmax &&
               schedule == o.schedule && same_interaction && init == o.init && seed == o.seed &&
               horizon == o.horizon && stop_tol == o.stop_tol && retain == o.retain && analyses == o.analyses;
    }
};

// ---------------------------------------------------------------------------
// Serialization

inline Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
}

inline Json matrix_json(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
    return a;
}

inline Json schedule_json(const DeltaSchedule& s) {
    return std::visit(
        [](const auto& v) -> Json {
            using S = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<S, DeltaSchedule::Constant>) return {{"kind", "constant"}, {"delta0", v.delta0}};
            else if constexpr (std::is_same_v<S, DeltaSchedule::Geometric>)
                return {{"kind", "geometric"}, {"delta0", v.delta0}, {"ratio", v.ratio}};
            else if constexpr (std::is_same_v<S, DeltaSchedule::Power>)
                return {{"kind", "power"}, {"delta0", v.delta0}, {"exponent", v.exponent}};
            else return {{"kind", "table"}, {"values", v.values}};
        },
        s.variant());
}

inline Json softmax_json(const SoftmaxOptions& s) {
    return {{"h", s.h},
            {"beta_schedule", s.beta_kind == SoftmaxOptions::Beta::constant ? "constant" : "exp2t"},
            {"beta", s.beta},
            {"beta_cap", s.beta_cap}};
}

inline Json to_json(const RunConfig& c) {
    Json j;
    j["name"] = c.name;
    j["n"] = c.n;
    j["d"] = c.d;
    j["alpha"] = c.alpha;
    j["dynamics"] = std::string(to_string(c.kind));
    j["softmax"] = softmax_json(c.softmax);
    j["schedule"] = schedule_json(c.schedule);
    j["interaction"] = c.interaction ? matrix_json(*c.interaction) : Json("identity");
    Json init = Json::array();
    for (const auto& part : c.init) {
        if (const auto* box = std::get_if<BoxPart>(&part))
            init.push_back({{"box", {{"count", box->count}, {"lo", vector_json(box->lo)}, {"hi", vector_json(box->hi)}}}});
        else init.push_back({{"points", matrix_json(std::get<PointsPart>(part).points)}});
    }
    j["init"] = init;
    j["seed"] = c.seed;
    j["horizon"] = c.horizon;
    j["stop_tol"] = c.stop_tol;
    j["retain"] = {{"neighborhoods", c.retain.neighborhoods}, {"matrices", c.retain.matrices}};
    Json analyses = Json::array();
    for (const auto& a : c.analyses) {
        Json e{{"name", a.name}};
        if (!a.params.empty()) e["params"] = a.params;
        analyses.push_back(e);
    }
    j["analyses"] = analyses;
    return j;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}
inline std::string join(const std::string& path, std::size_t index) { return path + "[" + std::to_string(index) + "]"; }

inline void expect_object(const Json& j, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    const std::set<std::string_view> keys(allowed);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError(join(path, it.key()), "unknown field");
}

inline const Json& field(const Json& j, std::string_view key, const std::string& path) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) throw ConfigError(join(path, key), "missing required field");
    return *it;
}

inline double as_double(const Json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
    return v;
}

inline std::uint64_t as_u64(const Json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(j.get<std::int64_t>());
    throw ConfigError(path, "expected a non-negative integer");
}

inline std::size_t as_size(const Json& j, const std::string& path) {
    return static_cast<std::size_t>(as_u64(j, path));
}

inline bool as_bool(const Json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

inline std::string as_string(const Json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

inline Vector as_vector(const Json& j, const std::string& path, std::size_t len) {
    if (!j.is_array() || j.size() != len)
        throw ConfigError(path, "expected an array of " + std::to_string(len) + " numbers");
    Vector v(static_cast<Eigen::Index>(len));
    for (std::size_t k = 0; k < len; ++k) v[static_cast<Eigen::Index>(k)] = as_double(j[k], join(path, k));
    return v;
}

inline Matrix as_matrix(const Json& j, const std::string& path, std::size_t cols) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = as_vector(j[i], join(path, i), cols);
    return m;
}

} // namespace detail

inline DeltaSchedule parse_schedule(const Json& j, const std::string& path) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    const std::string kind = as_string(field(j, "kind", path), join(path, "kind"));
    try {
        if (kind == "constant") {
            expect_object(j, path, {"kind", "delta0"});
            return DeltaSchedule::constant(as_double(field(j, "delta0", path), join(path, "delta0")));
        }
        if (kind == "geometric") {
            expect_object(j, path, {"kind", "delta0", "ratio"});
            return DeltaSchedule::geometric(as_double(field(j, "delta0", path), join(path, "delta0")),
                                            as_double(field(j, "ratio", path), join(path, "ratio")));
        }
        if (kind == "power") {
            expect_object(j, path, {"kind", "delta0", "exponent"});
            return DeltaSchedule::power(as_double(field(j, "delta0", path), join(path, "delta0")),
                                        as_double(field(j, "exponent", path), join(path, "exponent")));
        }
        if (kind == "table") {
            expect_object(j, path, {"kind", "values"});
            const Json& vals = field(j, "values", path);
            if (!vals.is_array()) throw ConfigError(join(path, "values"), "expected an array of numbers");
            std::vector<double> v;
            for (std::size_t k = 0; k < vals.size(); ++k) v.push_back(as_double(vals[k], join(join(path, "values"), k)));
            return DeltaSchedule::table(std::move(v));
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(join(path, "kind"), "unknown schedule kind '" + kind + "'");
}

inline SoftmaxOptions parse_softmax(const Json& j, const std::string& path) {
    using namespace detail;
    expect_object(j, path, {"h", "beta_schedule", "beta", "beta_cap"});
    SoftmaxOptions s;
    if (j.contains("h")) s.h = as_double(j["h"], join(path, "h"));
    if (j.contains("beta")) s.beta = as_double(j["beta"], join(path, "beta"));
    if (j.contains("beta_cap")) s.beta_cap = as_double(j["beta_cap"], join(path, "beta_cap"));
    if (j.contains("beta_schedule")) {
        const std::string b = as_string(j["beta_schedule"], join(path, "beta_schedule"));
        if (b == "constant") s.beta_kind = SoftmaxOptions::Beta::constant;
        else if (b == "exp2t") s.beta_kind = SoftmaxOptions::Beta::exp2t;
        else throw ConfigError(join(path, "beta_schedule"), "expected 'constant' or 'exp2t'");
    }
    if (!(s.h > 0.0)) throw ConfigError(join(path, "h"), "must be positive");
    if (!(s.beta > 0.0)) throw ConfigError(join(path, "beta"), "must be positive");
    if (!(s.beta_cap > 0.0)) throw ConfigError(join(path, "beta_cap"), "must be positive");
    return s;
}

inline RunConfig parse_config(const Json& j) {
    using namespace detail;
    expect_object(j, "", {"name", "n", "d", "alpha", "dynamics", "softmax", "schedule", "interaction", "init", "seed",
                          "horizon", "stop_tol", "retain", "analyses"});
    RunConfig c;
    if (j.contains("name")) c.name = as_string(j["name"], "name");
    c.d = as_size(field(j, "d", ""), "d");
    if (c.d < 1) throw ConfigError("d", "must be >= 1");
    c.alpha = as_double(field(j, "alpha", ""), "alpha");
    if (!(c.alpha > 0.0)) throw ConfigError("alpha", "must be positive");
    if (j.contains("dynamics")) {
        try {
            c.kind = dynamics_kind_from_string(as_string(j["dynamics"], "dynamics"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError("dynamics", e.what());
        }
    }
    if (j.contains("softmax")) c.softmax = parse_softmax(j["softmax"], "softmax");
    c.schedule = parse_schedule(field(j, "schedule", ""), "schedule");
    if (j.contains("interaction")) {
        const Json& a = j["interaction"];
        if (a.is_string()) {
            if (a.get<std::string>() != "identity") throw ConfigError("interaction", "expected 'identity' or a matrix");
        } else {
            c.interaction = as_matrix(a, "interaction", c.d);
            if (static_cast<std::size_t>(c.interaction->rows()) != c.d)
                throw ConfigError("interaction", "expected a " + std::to_string(c.d) + "x" + std::to_string(c.d) + " matrix");
        }
    }
    const Json& init = field(j, "init", "");
    if (!init.is_array() || init.empty()) throw ConfigError("init", "expected a non-empty array of parts");
    std::size_t total = 0;
    for (std::size_t k = 0; k < init.size(); ++k) {
        const std::string p = join("init", k);
        if (!init[k].is_object() || init[k].size() != 1)
            throw ConfigError(p, "expected an object with exactly one of 'box' or 'points'");
        if (init[k].contains("box")) {
            const std::string bp = join(p, "box");
            const Json& b = init[k]["box"];
            expect_object(b, bp, {"count", "lo", "hi"});
            BoxPart box{as_size(field(b, "count", bp), join(bp, "count")), as_vector(field(b, "lo", bp), join(bp, "lo"), c.d),
                        as_vector(field(b, "hi", bp), join(bp, "hi"), c.d)};
            if (box.count < 1) throw ConfigError(join(bp, "count"), "must be >= 1");
            if (((box.hi - box.lo).array() < 0.0).any()) throw ConfigError(bp, "lo must not exceed hi");
            total += box.count;
            c.init.emplace_back(std::move(box));
        } else if (init[k].contains("points")) {
            PointsPart pts{as_matrix(init[k]["points"], join(p, "points"), c.d)};
            total += static_cast<std::size_t>(pts.points.rows());
            c.init.emplace_back(std::move(pts));
        } else {
            throw ConfigError(p, "expected an object with exactly one of 'box' or 'points'");
        }
    }
    c.n = j.contains("n") ? as_size(j["n"], "n") : total;
    if (c.n != total)
        throw ConfigError("n", "is " + std::to_string(c.n) + " but init provides " + std::to_string(total) + " tokens");
    if (j.contains("seed")) c.seed = as_u64(j["seed"], "seed");
    c.horizon = as_size(field(j, "horizon", ""), "horizon");
    if (c.horizon < 1) throw ConfigError("horizon", "must be >= 1");
    if (j.contains("stop_tol")) c.stop_tol = as_double(j["stop_tol"], "stop_tol");
    if (c.stop_tol < 0.0) throw ConfigError("stop_tol", "must be >= 0");
    if (j.contains("retain")) {
        expect_object(j["retain"], "retain", {"neighborhoods", "matrices"});
        if (j["retain"].contains("neighborhoods"))
            c.retain.neighborhoods = as_bool(j["retain"]["neighborhoods"], "retain.neighborhoods");
        if (j["retain"].contains("matrices")) c.retain.matrices = as_bool(j["retain"]["matrices"], "retain.matrices");
    }
    if (j.contains("analyses")) {
        const Json& a = j["analyses"];
        if (!a.is_array()) throw ConfigError("analyses", "expected an array");
        for (std::size_t k = 0; k < a.size(); ++k) {
            const std::string p = join("analyses", k);
            expect_object(a[k], p, {"name", "params"});
            AnalysisSpec spec{as_string(field(a[k], "name", p), join(p, "name")), {}};
            const auto& names = known_analyses();
            if (std::find(names.begin(), names.end(), spec.name) == names.end())
                throw ConfigError(join(p, "name"), "unknown analysis '" + spec.name + "'");
            if (a[k].contains("params")) {
                const Json& ps = a[k]["params"];
                if (!ps.is_object()) throw ConfigError(join(p, "params"), "expected an object");
                for (auto it = ps.begin(); it != ps.end(); ++it)
                    spec.params[it.key()] = as_double(it.value(), join(join(p, "params"), it.key()));
            }
            c.analyses.push_back(std::move(spec));
        }
    }
    c.params(); // validates alpha and the interaction matrix together
    return c;
}

inline RunConfig parse_config_text(const std::string& text) { return parse_config(parse_json(text, "config")); }

/// An unreadable config is reported as bad input, not as an I/O failure.
inline std::string read_config_file(const std::filesystem::path& path) {
    try {
        return read_file(path);
    } catch (const IoError& e) {
        throw ConfigError("", e.what());
    }
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline RunConfig box_preset(std::string name, std::size_t n, double alpha, DynamicsKind kind, DeltaSchedule schedule,
                            std::size_t horizon) {
    RunConfig c;
    c.name = std::move(name);
    c.n = n;
    c.d = 2;
    c.alpha = alpha;
    c.kind = kind;
    c.schedule = std::move(schedule);
    c.init = {BoxPart{n, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)}};
    c.horizon = horizon;
    c.analyses = default_analyses();
    return c;
}

} // namespace detail

inline std::vector<std::string> preset_names() {
    return {"figure2-localmax", "figure2-hardmax", "figure2-softmax", "figure56", "remark33", "vanishing-delta"};
}

/// Frozen scenario configurations. Changing any value here changes the
/// outputs of every run that names the preset.
inline RunConfig preset(std::string_view name) {
    using detail::box_preset;
    if (name == "figure2-localmax") {
        auto c = box_preset("figure2-localmax", 30, 0.2, DynamicsKind::localmax, DeltaSchedule::constant(0.3), 100);
        c.retain.matrices = true;
        return c;
    }
    if (name == "figure2-hardmax") {
        auto c = box_preset("figure2-hardmax", 30, 0.2, DynamicsKind::hardmax, DeltaSchedule::constant(0.0), 100);
        c.retain.matrices = true;
        return c;
    }
    if (name == "figure2-softmax") {
        auto c = box_preset("figure2-softmax", 30, 0.2, DynamicsKind::softmax, DeltaSchedule::constant(0.0), 100);
        c.softmax = SoftmaxOptions{0.1, SoftmaxOptions::Beta::exp2t, 1.0, 1e8};
        c.analyses = {{"hull_monotonicity", {}}, {"alignment_set", {}}, {"limit_classification", {}}};
        return c;
    }
    if (name == "figure56")
        return box_preset("figure56", 25, 0.1, DynamicsKind::localmax, DeltaSchedule::constant(0.4), 1000);
    if (name == "vanishing-delta")
        return box_preset("vanishing-delta", 25, 0.1, DynamicsKind::localmax, DeltaSchedule::geometric(0.4, 0.95), 2000);
    if (name == "remark33") {
        RunConfig c;
        c.name = "remark33";
        c.n = 13;
        c.d = 2;
        c.alpha = 0.2;
        c.schedule = DeltaSchedule::constant(8.0);
        Matrix corners(3, 2);
        corners << -10.0, 1.0, 11.0, 1.0, 0.0, -15.0;
        Matrix lone(1, 2);
        lone << -0.9, 1.1;
        Vector lo(2), hi(2);
        lo << -0.05, 0.95;
        hi << 0.05, 1.05;
        c.init = {PointsPart{corners}, BoxPart{9, lo, hi}, PointsPart{lone}};
        c.horizon = 10000;
        c.analyses = {{"hull_monotonicity", {}}, {"alignment_set", {}}, {"limit_classification", {}}};
        return c;
    }
    throw ConfigError("preset", "unknown preset '" + std::string(name) + "'");
}

} // namespace attnflow::io
