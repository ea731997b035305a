#pragma once
// Token update rules: localmax (delta-relaxed argmax neighborhoods), hardmax
// (exact argmax neighborhoods) and an explicit-Euler softmax reference, plus
// the row-stochastic matrix form of the localmax step and the trajectory
// runner.

#include "attnflow/model.hpp"
#include "attnflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace attnflow {

namespace detail {

inline void check_token_index(std::size_t i, const TokenConfiguration& config) {
    if (i >= config.n()) throw std::out_of_range("token index out of range");
}

inline void check_dimensions(const TokenConfiguration& config, const ModelParams& params) {
    if (config.d() != params.d())
        throw std::invalid_argument("configuration dimension does not match the interaction matrix");
}

inline Vector apply_interaction(const ModelParams& params, const Vector& x) {
    if (params.interaction_is_identity()) return x;
    return params.interaction() * x;
}

} // namespace detail

/// Alignment scores <A x_i, x_k> for every token k, together with A x_i.
struct AlignmentScores {
    Vector query;  // A x_i
    Vector scores; // <A x_i, x_k>
    double max_score;
};

inline AlignmentScores alignment_scores(std::size_t i, const TokenConfiguration& config,
                                        const ModelParams& params) {
    detail::check_token_index(i, config);
    detail::check_dimensions(config, params);
    AlignmentScores out;
    out.query = detail::apply_interaction(params, config.token(i));
    out.scores = config.states() * out.query;
    out.max_score = out.scores.maxCoeff();
    return out;
}

/// C_i^delta: tokens j with max_k <A x_i, x_k> - <A x_i, x_j> <= delta ||A x_i||.
/// The comparison is an exact floating-point <=, so delta = 0 gives the
/// argmax set. The argmax always qualifies, hence the result is non-empty.
inline IndexSet neighborhood(std::size_t i, const TokenConfiguration& config, const ModelParams& params,
                             double delta) {
    if (!(delta >= 0.0)) throw std::invalid_argument("delta must be >= 0");
    const auto a = alignment_scores(i, config, params);
    const double threshold = delta * a.query.norm();
    IndexSet out;
    for (Eigen::Index j = 0; j < a.scores.size(); ++j)
        if (a.max_score - a.scores[j] <= threshold) out.push_back(static_cast<std::size_t>(j));
    return out;
}

/// Hardmax neighborhood: the exact argmax set of <A x_i, x_k>.
inline IndexSet argmax_neighborhood(std::size_t i, const TokenConfiguration& config, const ModelParams& params) {
    const auto a = alignment_scores(i, config, params);
    IndexSet out;
    for (Eigen::Index j = 0; j < a.scores.size(); ++j)
        if (a.scores[j] == a.max_score) out.push_back(static_cast<std::size_t>(j));
    return out;
}

inline std::vector<IndexSet> neighborhoods(const TokenConfiguration& config, const ModelParams& params,
                                           double delta) {
    std::vector<IndexSet> out(config.n());
    for (std::size_t i = 0; i < config.n(); ++i) out[i] = neighborhood(i, config, params, delta);
    return out;
}

inline std::vector<IndexSet> argmax_neighborhoods(const TokenConfiguration& config, const ModelParams& params) {
    std::vector<IndexSet> out(config.n());
    for (std::size_t i = 0; i < config.n(); ++i) out[i] = argmax_neighborhood(i, config, params);
    return out;
}

/// Neighborhoods used by one step of `params.kind()` at schedule value delta.
inline std::vector<IndexSet> step_neighborhoods(const TokenConfiguration& config, const ModelParams& params,
                                                double delta) {
    switch (params.kind()) {
    case DynamicsKind::localmax: return neighborhoods(config, params, delta);
    case DynamicsKind::hardmax: return argmax_neighborhoods(config, params);
    case DynamicsKind::softmax: break;
    }
    throw std::invalid_argument("softmax dynamics has no neighborhoods");
}

/// x_i + alpha/(1+alpha) * mean_{j in C_i}(x_j - x_i), all rows from the same
/// input. Each coordinate sum runs over the differences in ascending order,
/// so the result does not depend on how tokens are indexed.
inline TokenConfiguration apply_neighborhoods(const TokenConfiguration& config, const ModelParams& params,
                                              const std::vector<IndexSet>& hoods) {
    if (hoods.size() != config.n()) throw std::invalid_argument("one neighborhood per token is required");
    const Matrix& x = config.states();
    const double coef = params.alpha() / (1.0 + params.alpha());
    Matrix next(x.rows(), x.cols());
    std::vector<double> diffs;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const IndexSet& c = hoods[static_cast<std::size_t>(i)];
        if (c.empty()) throw std::invalid_argument("empty neighborhood");
        const double size = static_cast<double>(c.size());
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            diffs.clear();
            for (std::size_t j : c) diffs.push_back(x(static_cast<Eigen::Index>(j), k) - x(i, k));
            std::sort(diffs.begin(), diffs.end());
            double sum = 0.0;
            for (double v : diffs) sum += v;
            next(i, k) = x(i, k) + coef * (sum / size);
        }
    }
    if (!next.allFinite()) throw std::logic_error("localmax update produced a non-finite state");
    return TokenConfiguration(std::move(next), config.time() + 1);
}

inline TokenConfiguration localmax_step(const TokenConfiguration& config, const ModelParams& params, double delta) {
    return apply_neighborhoods(config, params, neighborhoods(config, params, delta));
}

inline TokenConfiguration hardmax_step(const TokenConfiguration& config, const ModelParams& params) {
    return apply_neighborhoods(config, params, argmax_neighborhoods(config, params));
}

/// Explicit Euler step of the softmax attention flow with inverse temperature
/// beta: x_i + h * sum_j softmax_j(beta <A x_i, x_.>) (x_j - x_i).
inline TokenConfiguration softmax_step(const TokenConfiguration& config, const ModelParams& params, double beta,
                                       double h) {
    if (!(beta > 0.0) || !(h > 0.0)) throw std::invalid_argument("beta and h must be positive");
    detail::check_dimensions(config, params);
    const Matrix& x = config.states();
    Matrix next(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto a = alignment_scores(static_cast<std::size_t>(i), config, params);
        Vector w = (beta * (a.scores.array() - a.max_score)).exp().matrix();
        const double z = w.sum();
        if (!std::isfinite(z) || !(z >= 1.0)) throw std::logic_error("softmax weights overflowed");
        w /= z;
        Vector drift = Vector::Zero(x.cols());
        for (Eigen::Index j = 0; j < x.rows(); ++j) drift += w[j] * (x.row(j) - x.row(i)).transpose();
        next.row(i) = x.row(i) + h * drift.transpose();
    }
    if (!next.allFinite()) throw std::logic_error("softmax update produced a non-finite state");
    return TokenConfiguration(std::move(next), config.time() + 1);
}

/// A_ij = [i == j]/(1+alpha) + alpha/(1+alpha) [j in C_i] / |C_i|.
inline TransitionMatrix transition_matrix(const std::vector<IndexSet>& hoods, double alpha, std::size_t time) {
    const auto n = static_cast<Eigen::Index>(hoods.size());
    const double self = 1.0 / (1.0 + alpha);
    const double coef = alpha / (1.0 + alpha);
    Matrix m = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const IndexSet& c = hoods[static_cast<std::size_t>(i)];
        const double share = coef / static_cast<double>(c.size());
        m(i, i) = self;
        for (std::size_t j : c) m(i, static_cast<Eigen::Index>(j)) += share;
    }
    return TransitionMatrix(std::move(m), time);
}

inline TransitionMatrix transition_matrix(const TokenConfiguration& config, const ModelParams& params, double delta) {
    if (params.kind() == DynamicsKind::softmax)
        throw std::invalid_argument("transition matrices are defined for localmax/hardmax only");
    return transition_matrix(step_neighborhoods(config, params, delta), params.alpha(), config.time());
}

/// x(t+1) = A(t) x(t).
inline TokenConfiguration apply_matrix(const TransitionMatrix& a, const TokenConfiguration& config) {
    if (a.n() != config.n()) throw std::invalid_argument("matrix and configuration sizes differ");
    return TokenConfiguration(a.entries() * config.states(), config.time() + 1);
}

inline double max_displacement(const TokenConfiguration& from, const TokenConfiguration& to) {
    return (to.states() - from.states()).rowwise().norm().maxCoeff();
}

/// n tokens drawn uniformly from the box prod_k [lo_k, hi_k) with the
/// counter-based generator; draw i*d + k fills coordinate k of token i.
inline TokenConfiguration sample_uniform_box(std::size_t n, const Vector& lo, const Vector& hi, std::uint64_t seed) {
    if (n < 1 || lo.size() < 1 || lo.size() != hi.size())
        throw std::invalid_argument("box sampler needs n >= 1 and matching bounds");
    if (((hi - lo).array() < 0.0).any()) throw std::invalid_argument("box bounds must satisfy lo <= hi");
    const CounterRng rng(seed);
    const Eigen::Index d = lo.size();
    Matrix x(static_cast<Eigen::Index>(n), d);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index k = 0; k < d; ++k)
            x(i, k) = lo[k] + (hi[k] - lo[k]) * rng.uniform_at(static_cast<std::uint64_t>(i * d + k));
    return TokenConfiguration(std::move(x));
}

/// Lower Cholesky factor L of the interaction matrix, A = L L^T.
inline Matrix interaction_factor(const ModelParams& params) {
    Eigen::LLT<Matrix> llt(params.interaction());
    if (llt.info() != Eigen::Success) throw std::invalid_argument("interaction matrix is not positive definite");
    return llt.matrixL();
}

/// Maps every token x to L^T x, so that <A x, y> = <L^T x, L^T y>. Hardmax
/// neighborhoods are preserved; localmax neighborhoods are not in general,
/// because the strip width uses ||A x|| rather than ||L^T x||.
inline TokenConfiguration to_identity_metric(const TokenConfiguration& config, const ModelParams& params) {
    detail::check_dimensions(config, params);
    return TokenConfiguration(config.states() * interaction_factor(params), config.time());
}

/// Single step of whatever rule `params` declares, at schedule time t.
inline TokenConfiguration step(const TokenConfiguration& config, const ModelParams& params,
                               const DeltaSchedule& schedule) {
    switch (params.kind()) {
    case DynamicsKind::localmax: return localmax_step(config, params, schedule.at(config.time()));
    case DynamicsKind::hardmax: return hardmax_step(config, params);
    case DynamicsKind::softmax:
        return softmax_step(config, params, params.softmax().beta_at(config.time()), params.softmax().h);
    }
    throw std::logic_error("unreachable");
}

/// Iterates the declared dynamics from `init` until `horizon` steps or until
/// the largest row displacement is <= stop_tol (stop_tol == 0 never stops
/// early). Neighborhoods and matrices are recorded per `retain`; softmax runs
/// have neither.
inline Trajectory run(const TokenConfiguration& init, const ModelParams& params, const DeltaSchedule& schedule,
                      std::size_t horizon, double stop_tol = 0.0, RetainFlags retain = {},
                      std::optional<std::uint64_t> seed = std::nullopt) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(stop_tol >= 0.0)) throw std::invalid_argument("stop_tol must be >= 0");
    detail::check_dimensions(init, params);
    Trajectory traj{{init}, params, schedule, seed, {}, {}, {}, false};
    traj.configs.reserve(horizon + 1);
    const bool has_hoods = params.kind() != DynamicsKind::softmax;
    for (std::size_t t = 0; t < horizon; ++t) {
        const TokenConfiguration& cur = traj.configs.back();
        std::optional<TokenConfiguration> next;
        if (has_hoods) {
            auto hoods = step_neighborhoods(cur, params, schedule.at(cur.time()));
            next.emplace(apply_neighborhoods(cur, params, hoods));
            if (retain.matrices) traj.matrices.push_back(transition_matrix(hoods, params.alpha(), cur.time()));
            if (retain.neighborhoods) traj.neighborhoods.push_back(std::move(hoods));
        } else {
            next.emplace(step(cur, params, schedule));
        }
        const double disp = max_displacement(cur, *next);
        traj.displacement.push_back(disp);
        traj.configs.push_back(std::move(*next));
        if (stop_tol > 0.0 && disp <= stop_tol) {
            traj.stopped_early = true;
            break;
        }
    }
    return traj;
}

/// First step t at which configs[t+1] differs from a fresh step of
/// configs[t]; empty when the whole trajectory replays bit for bit.
inline std::optional<std::size_t> first_replay_mismatch(const Trajectory& traj) {
    for (std::size_t t = 0; t + 1 < traj.configs.size(); ++t) {
        const auto again = step(traj.configs[t], traj.params, traj.schedule);
        if (!(again.states() == traj.configs[t + 1].states())) return t;
    }
    return std::nullopt;
}

} // namespace attnflow
