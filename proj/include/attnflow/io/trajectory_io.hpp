#pragma once
// trajectory.json, positions.csv and summary.json.

#include "attnflow/geometry.hpp"
#include "attnflow/io/config.hpp"

#include <optional>
#include <sstream>
#include <string>

namespace attnflow::io {

inline constexpr const char* kTrajectoryFormat = "attnflow-trajectory";
inline constexpr int kTrajectoryVersion = 1;

inline Json params_json(const ModelParams& p) {
    return {{"alpha", p.alpha()},
            {"dynamics", std::string(to_string(p.kind()))},
            {"interaction", p.interaction_is_identity() ? Json("identity") : matrix_json(p.interaction())},
            {"softmax", softmax_json(p.softmax())}};
}

/// Full per-step states plus whatever was retained. `config` is embedded when
/// the run came from one.
inline Json trajectory_json(const Trajectory& traj, const std::optional<RunConfig>& config = {}) {
    Json j;
    j["format"] = kTrajectoryFormat;
    j["version"] = kTrajectoryVersion;
    j["n"] = traj.n();
    j["d"] = traj.d();
    j["start_time"] = traj.initial().time();
    j["params"] = params_json(traj.params);
    j["schedule"] = schedule_json(traj.schedule);
    j["seed"] = traj.seed ? Json(*traj.seed) : Json(nullptr);
    j["stopped_early"] = traj.stopped_early;
    Json states = Json::array();
    for (const auto& c : traj.configs) states.push_back(matrix_json(c.states()));
    j["states"] = states;
    j["displacement"] = traj.displacement;
    if (!traj.neighborhoods.empty()) j["neighborhoods"] = traj.neighborhoods;
    if (!traj.matrices.empty()) {
        Json m = Json::array();
        for (const auto& a : traj.matrices) m.push_back(matrix_json(a.entries()));
        j["matrices"] = m;
    }
    if (config) j["config"] = to_json(*config);
    return j;
}

struct LoadedTrajectory {
    Trajectory trajectory;
    std::optional<RunConfig> config;
};

inline LoadedTrajectory parse_trajectory(const Json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("", "trajectory file must hold a JSON object");
    if (as_string(field(j, "format", ""), "format") != kTrajectoryFormat)
        throw ConfigError("format", "not an attnflow trajectory");
    if (as_u64(field(j, "version", ""), "version") != static_cast<std::uint64_t>(kTrajectoryVersion))
        throw ConfigError("version", "unsupported trajectory version");
    const std::size_t n = as_size(field(j, "n", ""), "n");
    const std::size_t d = as_size(field(j, "d", ""), "d");
    const std::size_t start = j.contains("start_time") ? as_size(j["start_time"], "start_time") : 0;

    const Json& pj = field(j, "params", "");
    expect_object(pj, "params", {"alpha", "dynamics", "interaction", "softmax"});
    const double alpha = as_double(field(pj, "alpha", "params"), "params.alpha");
    DynamicsKind kind;
    try {
        kind = dynamics_kind_from_string(as_string(field(pj, "dynamics", "params"), "params.dynamics"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError("params.dynamics", e.what());
    }
    Matrix a = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    const Json& ij = field(pj, "interaction", "params");
    if (!ij.is_string()) a = as_matrix(ij, "params.interaction", d);
    const SoftmaxOptions soft = pj.contains("softmax") ? parse_softmax(pj["softmax"], "params.softmax") : SoftmaxOptions{};
    std::optional<ModelParams> params;
    try {
        params.emplace(alpha, a, kind, soft);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("params", e.what());
    }
    DeltaSchedule schedule = parse_schedule(field(j, "schedule", ""), "schedule");

    Trajectory traj{{}, *params, schedule, std::nullopt, {}, {}, {}, false};
    if (j.contains("seed") && !j["seed"].is_null()) traj.seed = as_u64(j["seed"], "seed");
    if (j.contains("stopped_early")) traj.stopped_early = as_bool(j["stopped_early"], "stopped_early");

    const Json& states = field(j, "states", "");
    if (!states.is_array() || states.empty()) throw ConfigError("states", "expected a non-empty array");
    for (std::size_t t = 0; t < states.size(); ++t) {
        const std::string p = join("states", t);
        Matrix m = as_matrix(states[t], p, d);
        if (static_cast<std::size_t>(m.rows()) != n) throw ConfigError(p, "expected " + std::to_string(n) + " rows");
        traj.configs.emplace_back(std::move(m), start + t);
    }
    const std::size_t steps = traj.steps();
    const Json& disp = field(j, "displacement", "");
    if (!disp.is_array() || disp.size() != steps)
        throw ConfigError("displacement", "expected one entry per step");
    for (std::size_t t = 0; t < steps; ++t) traj.displacement.push_back(as_double(disp[t], join("displacement", t)));

    if (j.contains("neighborhoods")) {
        const Json& hs = j["neighborhoods"];
        if (!hs.is_array() || hs.size() != steps) throw ConfigError("neighborhoods", "expected one entry per step");
        for (std::size_t t = 0; t < steps; ++t) {
            const std::string p = join("neighborhoods", t);
            if (!hs[t].is_array() || hs[t].size() != n) throw ConfigError(p, "expected one set per token");
            std::vector<IndexSet> step;
            for (std::size_t i = 0; i < n; ++i) {
                const std::string q = join(p, i);
                if (!hs[t][i].is_array() || hs[t][i].empty()) throw ConfigError(q, "expected a non-empty index array");
                IndexSet c;
                for (std::size_t k = 0; k < hs[t][i].size(); ++k) {
                    const std::size_t idx = as_size(hs[t][i][k], join(q, k));
                    if (idx >= n) throw ConfigError(join(q, k), "token index out of range");
                    c.push_back(idx);
                }
                step.push_back(std::move(c));
            }
            traj.neighborhoods.push_back(std::move(step));
        }
    }
    if (j.contains("matrices")) {
        const Json& ms = j["matrices"];
        if (!ms.is_array() || ms.size() != steps) throw ConfigError("matrices", "expected one entry per step");
        for (std::size_t t = 0; t < steps; ++t) {
            const std::string p = join("matrices", t);
            Matrix m = as_matrix(ms[t], p, n);
            if (static_cast<std::size_t>(m.rows()) != n) throw ConfigError(p, "expected an n x n matrix");
            try {
                traj.matrices.emplace_back(std::move(m), start + t);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(p, e.what());
            }
        }
    }
    LoadedTrajectory out{std::move(traj), std::nullopt};
    if (j.contains("config")) out.config = parse_config(j["config"]);
    return out;
}

inline LoadedTrajectory load_trajectory(const std::filesystem::path& path) {
    return parse_trajectory(parse_json(read_file(path), path.string()));
}

/// RFC 4180 CSV, header "t,token,x0,...", coordinates at 17 significant digits.
inline std::string positions_csv(const Trajectory& traj) {
    std::string out = "t,token";
    for (std::size_t k = 0; k < traj.d(); ++k) out += ",x" + std::to_string(k);
    out += "\r\n";
    for (const auto& c : traj.configs) {
        for (std::size_t i = 0; i < c.n(); ++i) {
            out += std::to_string(c.time()) + "," + std::to_string(i);
            for (std::size_t k = 0; k < c.d(); ++k)
                out += "," + format_double(c.states()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)), 17);
            out += "\r\n";
        }
    }
    return out;
}

/// Final hull, the proxy gap, displacement series, seed and parameters.
/// "eta_horizon" is max_i dist(x_i(T-1), hull(T)): the distance the last
/// step still moved tokens relative to the final-hull proxy of K.
inline Json summary_json(const Trajectory& traj, const std::optional<RunConfig>& config = {}) {
    Json j;
    if (config) j["name"] = config->name;
    j["n"] = traj.n();
    j["d"] = traj.d();
    j["steps"] = traj.steps();
    j["params"] = params_json(traj.params);
    j["schedule"] = schedule_json(traj.schedule);
    j["seed"] = traj.seed ? Json(*traj.seed) : Json(nullptr);
    j["displacement"] = traj.displacement;
    j["final_displacement"] = traj.displacement.empty() ? 0.0 : traj.displacement.back();
    j["status"] = traj.stopped_early ? "numerically settled" : "horizon reached";
    if (traj.params.kind() == DynamicsKind::softmax)
        j["softmax"] = {{"integrator", "explicit Euler"},
                        {"h", traj.params.softmax().h},
                        {"beta_schedule", traj.params.softmax().beta_kind == SoftmaxOptions::Beta::constant ? "constant" : "exp2t"},
                        {"beta_cap", traj.params.softmax().beta_cap}};
    if (traj.d() == 2) {
        const Polygon hull = hull2d(traj.last());
        Json verts = Json::array();
        for (const auto& v : hull.vertices()) verts.push_back({v.x(), v.y()});
        j["final_hull"] = verts;
        const auto& before = traj.configs.size() > 1 ? traj.configs[traj.configs.size() - 2] : traj.last();
        j["eta_horizon"] = eta(before, hull);
    } else {
        j["final_hull"] = nullptr;
        j["eta_horizon"] = nullptr;
    }
    return j;
}

} // namespace attnflow::io
