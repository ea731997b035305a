#pragma once
// Lyapunov analysis over the realized chain of transition matrices:
// absolute probability sequences, V(t) = sum_i pi_i ||x_i - pi^T x||^2, the
// exact decrement identity with H(t) = A^T diag(pi(t+1)) A, and the S1/S2
// mass split.

#include "attnflow/diagnostics.hpp"
#include "attnflow/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace attnflow {

class ProbabilityVector {
public:
    explicit ProbabilityVector(Vector weights) : w_(std::move(weights)) {
        if (w_.size() < 1) throw std::invalid_argument("probability vector must be non-empty");
        if (!w_.allFinite() || (w_.array() < 0.0).any())
            throw std::invalid_argument("probability vector entries must be finite and non-negative");
        if (std::abs(w_.sum() - 1.0) > 1e-12) throw std::invalid_argument("probability vector must sum to 1");
    }

    static ProbabilityVector uniform(std::size_t n) {
        return ProbabilityVector(Vector::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n)));
    }

    /// Strictly positive random weights from the counter-based generator.
    static ProbabilityVector random(std::size_t n, std::uint64_t seed) {
        const CounterRng rng(seed);
        Vector w(static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = 0.5 + rng.uniform_at(static_cast<std::uint64_t>(i));
        return ProbabilityVector(w / w.sum());
    }

    const Vector& weights() const noexcept { return w_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(w_.size()); }
    double operator[](std::size_t i) const { return w_(static_cast<Eigen::Index>(i)); }

private:
    Vector w_;
};

struct AbsoluteProbabilitySequence {
    enum class Terminal { uniform, custom };
    std::vector<ProbabilityVector> vectors; // vectors[k] is pi(start + k)
    Terminal terminal_kind = Terminal::uniform;
    std::size_t start = 0;
    std::size_t renormalizations = 0;

    const ProbabilityVector& at(std::size_t t) const { return vectors.at(t - start); }
};

/// pi(T) = terminal, pi(t) = A(t)^T pi(t+1) for t descending. Renormalizes
/// only when the sum drifts from 1 by more than 1e-13.
inline AbsoluteProbabilitySequence backward_aps(std::span<const TransitionMatrix> chain, const ProbabilityVector& terminal,
                                                AbsoluteProbabilitySequence::Terminal kind =
                                                    AbsoluteProbabilitySequence::Terminal::custom) {
    if (chain.empty()) throw std::invalid_argument("backward_aps needs a non-empty chain");
    for (std::size_t k = 0; k < chain.size(); ++k) {
        if (chain[k].n() != terminal.size()) throw std::invalid_argument("chain and terminal sizes differ");
        if (k > 0 && chain[k].time() != chain[k - 1].time() + 1)
            throw std::invalid_argument("chain times are not consecutive");
        if (!TransitionMatrix::is_row_stochastic(chain[k].entries(), 1e-12))
            throw std::invalid_argument("chain contains a non-stochastic matrix");
    }
    AbsoluteProbabilitySequence aps;
    aps.terminal_kind = kind;
    aps.start = chain.front().time();
    std::vector<Vector> rev{terminal.weights()};
    for (std::size_t k = chain.size(); k-- > 0;) {
        Vector w = chain[k].entries().transpose() * rev.back();
        const double s = w.sum();
        if (std::abs(s - 1.0) > 1e-13) {
            w /= s;
            ++aps.renormalizations;
        }
        rev.push_back(std::move(w));
    }
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) aps.vectors.emplace_back(std::move(*it));
    return aps;
}

inline AbsoluteProbabilitySequence backward_aps(const Trajectory& traj, const std::optional<ProbabilityVector>& terminal = {}) {
    if (traj.matrices.size() != traj.steps() || traj.matrices.empty())
        throw std::invalid_argument("trajectory has no retained matrices for every step");
    if (terminal) return backward_aps(traj.matrices, *terminal);
    return backward_aps(traj.matrices, ProbabilityVector::uniform(traj.n()), AbsoluteProbabilitySequence::Terminal::uniform);
}

/// max_t max_i |pi_i(t) - (A(t)^T pi(t+1))_i|.
inline double aps_relation_residual(std::span<const TransitionMatrix> chain, const AbsoluteProbabilitySequence& aps) {
    if (aps.vectors.size() != chain.size() + 1) throw std::invalid_argument("sequence and chain are misaligned");
    double worst = 0.0;
    for (std::size_t k = 0; k < chain.size(); ++k) {
        const Vector lhs = aps.vectors[k].weights();
        const Vector rhs = chain[k].entries().transpose() * aps.vectors[k + 1].weights();
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
    return worst;
}

/// V = sum_i pi_i ||x_i - pi^T x||^2, evaluated as the equal pairwise form
/// sum_{i<j} pi_i pi_j ||x_i - x_j||^2 so that coincident tokens give exactly 0.
inline double lyapunov_V(const TokenConfiguration& config, const ProbabilityVector& pi) {
    if (pi.size() != config.n()) throw std::invalid_argument("probability vector and configuration sizes differ");
    const Matrix& x = config.states();
    const Vector& w = pi.weights();
    double v = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) v += w(i) * w(j) * (x.row(i) - x.row(j)).squaredNorm();
    return v;
}

/// H = A^T diag(pi_next) A, mirrored so that it is exactly symmetric.
inline Matrix h_matrix(const TransitionMatrix& a, const ProbabilityVector& pi_next) {
    if (a.n() != pi_next.size()) throw std::invalid_argument("matrix and probability vector sizes differ");
    const Matrix& m = a.entries();
    const Vector& p = pi_next.weights();
    const Eigen::Index n = m.rows();
    Matrix h(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < n; ++k) s += m(k, i) * p(k) * m(k, j);
            h(i, j) = h(j, i) = s;
        }
    return h;
}

/// 1/2 sum_{i,j} H_ij ||x_i - x_j||^2.
inline double h_dispersion(const Matrix& h, const TokenConfiguration& config) {
    const Matrix& x = config.states();
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) s += h(i, j) * (x.row(i) - x.row(j)).squaredNorm();
    return s; // each unordered pair appears twice in the full sum
}

/// Entries of row k of the transition matrix multiplied pairwise,
/// A_ki A_kj, grouped by where i and j sit relative to k and C_k.
enum class ProductCase { diagonal, self_then_neighbor, neighbor_then_self, both_neighbors, zero };

struct ProductEntry {
    ProductCase which;
    double value;
};

inline ProductEntry product_entry_case(std::size_t k, std::size_t i, std::size_t j, const IndexSet& hood_k, double alpha) {
    const double self = 1.0 / (1.0 + alpha);
    const double share = (alpha / (1.0 + alpha)) / static_cast<double>(hood_k.size());
    const auto in_c = [&](std::size_t x) { return std::binary_search(hood_k.begin(), hood_k.end(), x); };
    const double diag = in_c(k) ? self + share : self;
    if (i == k && j == k) return {ProductCase::diagonal, diag * diag};
    if (i == k) return in_c(j) ? ProductEntry{ProductCase::self_then_neighbor, diag * share} : ProductEntry{ProductCase::zero, 0.0};
    if (j == k) return in_c(i) ? ProductEntry{ProductCase::neighbor_then_self, share * diag} : ProductEntry{ProductCase::zero, 0.0};
    if (in_c(i) && in_c(j)) return {ProductCase::both_neighbors, share * share};
    return {ProductCase::zero, 0.0};
}

struct DecrementSeries {
    std::vector<double> V;         // V(t) on configs[t]
    std::vector<double> decrease;  // V(t) - V(t+1)
    std::vector<double> predicted; // 1/2 sum H_ij ||x_i - x_j||^2
    std::vector<double> residual;
    double max_residual = 0.0;
    bool within_tolerance = true; // residual <= 1e-10 (1 + |V(t)|) everywhere
    bool nonincreasing = true;    // V(t+1) <= V(t) + 1e-10
};

inline DecrementSeries decrement_identity(const Trajectory& traj, const AbsoluteProbabilitySequence& aps) {
    if (traj.matrices.size() != traj.steps()) throw std::invalid_argument("trajectory matrices are not retained");
    if (aps.vectors.size() != traj.configs.size() || aps.start != traj.initial().time())
        throw std::invalid_argument("sequence and trajectory are misaligned");
    DecrementSeries s;
    for (std::size_t t = 0; t < traj.configs.size(); ++t) s.V.push_back(lyapunov_V(traj.configs[t], aps.vectors[t]));
    for (std::size_t t = 0; t < traj.steps(); ++t) {
        const double dec = s.V[t] - s.V[t + 1];
        const double pred = h_dispersion(h_matrix(traj.matrices[t], aps.vectors[t + 1]), traj.configs[t]);
        const double res = std::abs(dec - pred);
        s.decrease.push_back(dec);
        s.predicted.push_back(pred);
        s.residual.push_back(res);
        s.max_residual = std::max(s.max_residual, res);
        if (res > 1e-10 * (1.0 + std::abs(s.V[t]))) s.within_tolerance = false;
        if (s.V[t + 1] > s.V[t] + 1e-10) s.nonincreasing = false;
    }
    return s;
}

struct MassSplit {
    std::vector<double> w1;
    std::vector<double> w2;
    double s2_mass_tail = 0.0;  // max of W2 over the classification window
    bool s2_mass_vanished = false; // s2_mass_tail < 1e-6
};

inline MassSplit mass_split(const AbsoluteProbabilitySequence& aps, const TailClassification& c) {
    MassSplit m;
    for (const auto& pi : aps.vectors) {
        if (pi.size() != c.min_diameter.size()) throw std::invalid_argument("classification and sequence sizes differ");
        double w2 = 0.0, w1 = 0.0;
        for (std::size_t i : c.s2) w2 += pi[i];
        for (std::size_t i : c.s1) w1 += pi[i];
        m.w1.push_back(w1);
        m.w2.push_back(w2);
    }
    for (std::size_t t = c.window.start; t <= c.window.end; ++t) {
        if (t < aps.start || t - aps.start >= m.w2.size()) continue;
        m.s2_mass_tail = std::max(m.s2_mass_tail, m.w2[t - aps.start]);
    }
    m.s2_mass_vanished = m.s2_mass_tail < 1e-6;
    return m;
}

/// Steps t in the window where every S2 token carries positive mass at t yet
/// W2(t) < W2(t+1) fails.
inline std::vector<std::size_t> w2_increase_check(const AbsoluteProbabilitySequence& aps, const TailClassification& c,
                                                  const MassSplit& m) {
    std::vector<std::size_t> out;
    if (c.s2.empty()) return out;
    for (std::size_t t = std::max(c.window.start, aps.start); t < c.window.end; ++t) {
        const std::size_t k = t - aps.start;
        if (k + 1 >= m.w2.size()) break;
        const bool all_positive =
            std::all_of(c.s2.begin(), c.s2.end(), [&](std::size_t i) { return aps.vectors[k][i] > 0.0; });
        if (all_positive && !(m.w2[k] < m.w2[k + 1])) out.push_back(t);
    }
    return out;
}

struct LowerBoundViolation {
    enum class Bound { diameter, gamma };
    std::size_t t;
    Bound bound;
    double decrease;
    double required;
};

/// On steps t in the window (t < end):
///   V(t) - V(t+1) >= c^2 / (2 n^2) sum_k d_k(t)^2 pi_k(t+1)
///   V(t) - V(t+1) >= c^2 gamma^2 / (2 n^2) W2(t+1)
/// with c = alpha / (1 + alpha).
inline std::vector<LowerBoundViolation> lyapunov_lower_bound_check(const Trajectory& traj,
                                                                   const AbsoluteProbabilitySequence& aps,
                                                                   const TailClassification& c, double gamma,
                                                                   double slack = 1e-10) {
    if (aps.vectors.size() != traj.configs.size()) throw std::invalid_argument("sequence and trajectory are misaligned");
    std::vector<LowerBoundViolation> out;
    const double ca = traj.params.alpha() / (1.0 + traj.params.alpha());
    const double n = static_cast<double>(traj.n());
    const double scale = ca * ca / (2.0 * n * n);
    for (std::size_t t = c.window.start; t < c.window.end && t + 1 < traj.configs.size(); ++t) {
        const double dec = lyapunov_V(traj.configs[t], aps.vectors[t]) - lyapunov_V(traj.configs[t + 1], aps.vectors[t + 1]);
        const auto hoods = neighborhoods_at(traj, t);
        double sum = 0.0;
        for (std::size_t k = 0; k < hoods.size(); ++k) {
            const double dk = neighborhood_diameter(hoods[k], traj.configs[t]);
            sum += dk * dk * aps.vectors[t + 1][k];
        }
        const double first = scale * sum;
        if (dec < first - slack) out.push_back({t, LowerBoundViolation::Bound::diameter, dec, first});
        double w2 = 0.0;
        for (std::size_t i : c.s2) w2 += aps.vectors[t + 1][i];
        const double second = scale * gamma * gamma * w2;
        if (dec < second - slack) out.push_back({t, LowerBoundViolation::Bound::gamma, dec, second});
    }
    return out;
}

struct LyapunovReport {
    AbsoluteProbabilitySequence aps;
    double aps_residual = 0.0;
    DecrementSeries decrement;
    std::optional<TailClassification> classification;
    std::optional<MassSplit> mass;
    std::vector<std::size_t> w2_increase_violations;
    std::vector<LowerBoundViolation> lower_bound_violations;

    bool passed() const {
        return aps_residual <= 1e-12 && decrement.within_tolerance && decrement.nonincreasing &&
               lower_bound_violations.empty();
    }
};

/// Full analysis of a trajectory with retained matrices. The S1/S2 split and
/// lower bounds are evaluated when a classification is supplied.
inline LyapunovReport lyapunov_report(const Trajectory& traj, const std::optional<ProbabilityVector>& terminal = {},
                                      const std::optional<TailClassification>& classification = {}) {
    LyapunovReport r;
    r.aps = backward_aps(traj, terminal);
    r.aps_residual = aps_relation_residual(traj.matrices, r.aps);
    r.decrement = decrement_identity(traj, r.aps);
    if (classification) {
        r.classification = classification;
        r.mass = mass_split(r.aps, *classification);
        r.w2_increase_violations = w2_increase_check(r.aps, *classification, *r.mass);
        r.lower_bound_violations = lyapunov_lower_bound_check(traj, r.aps, *classification, classification->gamma);
    }
    return r;
}

} // namespace attnflow
