#pragma once
// Core value types shared by the dynamics, geometry, diagnostics and
// Lyapunov modules.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace attnflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

/// Sorted list of token indices.
using IndexSet = std::vector<std::size_t>;

/// State of n tokens in R^d at a given step. Immutable once built.
class TokenConfiguration {
public:
    TokenConfiguration(Matrix states, std::size_t time = 0)
        : states_(std::move(states)), time_(time) {
        if (states_.rows() < 1 || states_.cols() < 1)
            throw std::invalid_argument("token configuration needs n >= 1 and d >= 1");
        if (!states_.allFinite())
            throw std::invalid_argument("token configuration has non-finite entries");
    }

    const Matrix& states() const noexcept { return states_; }
    std::size_t time() const noexcept { return time_; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(states_.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(states_.cols()); }

    Vector token(std::size_t i) const { return states_.row(static_cast<Eigen::Index>(i)).transpose(); }

    bool operator==(const TokenConfiguration& o) const {
        return time_ == o.time_ && states_.rows() == o.states_.rows() &&
               states_.cols() == o.states_.cols() && states_ == o.states_;
    }

private:
    Matrix states_;
    std::size_t time_;
};

enum class DynamicsKind { localmax, hardmax, softmax };

inline std::string_view to_string(DynamicsKind k) {
    switch (k) {
    case DynamicsKind::localmax: return "localmax";
    case DynamicsKind::hardmax: return "hardmax";
    case DynamicsKind::softmax: return "softmax";
    }
    return "?";
}

inline DynamicsKind dynamics_kind_from_string(std::string_view s) {
    if (s == "localmax") return DynamicsKind::localmax;
    if (s == "hardmax") return DynamicsKind::hardmax;
    if (s == "softmax") return DynamicsKind::softmax;
    throw std::invalid_argument("unknown dynamics kind '" + std::string(s) + "'");
}

/// Explicit Euler settings for the softmax reference dynamics. The inverse
/// temperature is either held constant or follows exp(2 t) (t = step * h),
/// the rescaled-token form, clamped at `beta_cap`.
struct SoftmaxOptions {
    enum class Beta { constant, exp2t };
    double h = 0.1;
    Beta beta_kind = Beta::exp2t;
    double beta = 1.0;
    double beta_cap = 1e8;

    double beta_at(std::size_t step) const {
        if (beta_kind == Beta::constant) return beta;
        double b = std::exp(2.0 * static_cast<double>(step) * h);
        return std::isfinite(b) && b < beta_cap ? b : beta_cap;
    }

    bool operator==(const SoftmaxOptions&) const = default;
};

/// alpha, the interaction matrix A and the update rule.
class ModelParams {
public:
    ModelParams(double alpha, Matrix interaction, DynamicsKind kind = DynamicsKind::localmax,
                SoftmaxOptions softmax = {})
        : alpha_(alpha), interaction_(std::move(interaction)), kind_(kind), softmax_(softmax) {
        if (!(alpha_ > 0.0) || !std::isfinite(alpha_))
            throw std::invalid_argument("alpha must be a positive finite number");
        const auto d = interaction_.rows();
        if (d < 1 || interaction_.cols() != d)
            throw std::invalid_argument("interaction matrix must be square and non-empty");
        if (!interaction_.allFinite())
            throw std::invalid_argument("interaction matrix has non-finite entries");
        if ((interaction_ - interaction_.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("interaction matrix must be symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(interaction_, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success || !(eig.eigenvalues().minCoeff() > 0.0))
            throw std::invalid_argument("interaction matrix must be positive definite");
        identity_ = interaction_.isIdentity(0.0);
        if (!(softmax_.h > 0.0) || !(softmax_.beta > 0.0) || !(softmax_.beta_cap > 0.0))
            throw std::invalid_argument("softmax h, beta and beta_cap must be positive");
    }

    static ModelParams identity(std::size_t d, double alpha, DynamicsKind kind = DynamicsKind::localmax) {
        return ModelParams(alpha, Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)), kind);
    }

    double alpha() const noexcept { return alpha_; }
    const Matrix& interaction() const noexcept { return interaction_; }
    bool interaction_is_identity() const noexcept { return identity_; }
    DynamicsKind kind() const noexcept { return kind_; }
    const SoftmaxOptions& softmax() const noexcept { return softmax_; }
    std::size_t d() const noexcept { return static_cast<std::size_t>(interaction_.rows()); }

    ModelParams with_kind(DynamicsKind k) const {
        ModelParams p = *this;
        p.kind_ = k;
        return p;
    }

    bool operator==(const ModelParams& o) const {
        return alpha_ == o.alpha_ && kind_ == o.kind_ && softmax_ == o.softmax_ &&
               interaction_.rows() == o.interaction_.rows() && interaction_ == o.interaction_;
    }

private:
    double alpha_;
    Matrix interaction_;
    DynamicsKind kind_;
    SoftmaxOptions softmax_;
    bool identity_ = false;
};

/// Alignment-sensitivity schedule delta(t).
class DeltaSchedule {
public:
    struct Constant { double delta0; bool operator==(const Constant&) const = default; };
    struct Geometric { double delta0; double ratio; bool operator==(const Geometric&) const = default; };
    struct Power { double delta0; double exponent; bool operator==(const Power&) const = default; };
    struct Table { std::vector<double> values; bool operator==(const Table&) const = default; };
    using Variant = std::variant<Constant, Geometric, Power, Table>;

    static DeltaSchedule constant(double delta0) { return DeltaSchedule(Constant{delta0}); }
    static DeltaSchedule geometric(double delta0, double ratio) { return DeltaSchedule(Geometric{delta0, ratio}); }
    static DeltaSchedule power(double delta0, double exponent) { return DeltaSchedule(Power{delta0, exponent}); }
    static DeltaSchedule table(std::vector<double> values) { return DeltaSchedule(Table{std::move(values)}); }

    explicit DeltaSchedule(Variant v) : v_(std::move(v)) { validate(); }

    double at(std::size_t t) const {
        return std::visit(
            [t](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                const double tt = static_cast<double>(t);
                if constexpr (std::is_same_v<S, Constant>) return s.delta0;
                else if constexpr (std::is_same_v<S, Geometric>) return s.delta0 * std::pow(s.ratio, tt);
                else if constexpr (std::is_same_v<S, Power>) return s.delta0 / std::pow(1.0 + tt, s.exponent);
                else return t < s.values.size() ? s.values[t] : s.values.back();
            },
            v_);
    }

    bool is_constant() const noexcept { return std::holds_alternative<Constant>(v_); }
    const Variant& variant() const noexcept { return v_; }
    bool operator==(const DeltaSchedule&) const = default;

private:
    void validate() const {
        auto ok = [](double x) { return std::isfinite(x); };
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, Constant>) {
                    if (!ok(s.delta0) || s.delta0 < 0.0)
                        throw std::invalid_argument("constant delta must be >= 0");
                } else if constexpr (std::is_same_v<S, Geometric>) {
                    if (!ok(s.delta0) || !(s.delta0 > 0.0))
                        throw std::invalid_argument("geometric delta0 must be > 0");
                    if (!(s.ratio > 0.0 && s.ratio < 1.0))
                        throw std::invalid_argument("geometric ratio must lie in (0, 1)");
                } else if constexpr (std::is_same_v<S, Power>) {
                    if (!ok(s.delta0) || !(s.delta0 > 0.0))
                        throw std::invalid_argument("power delta0 must be > 0");
                    if (!ok(s.exponent) || !(s.exponent > 0.0))
                        throw std::invalid_argument("power exponent must be > 0");
                } else {
                    if (s.values.empty()) throw std::invalid_argument("delta table must be non-empty");
                    for (double x : s.values)
                        if (!ok(x) || x < 0.0) throw std::invalid_argument("delta table entries must be >= 0");
                }
            },
            v_);
    }

    Variant v_;
};

/// Row-stochastic matrix of one localmax step, x(t+1) = A(t) x(t).
class TransitionMatrix {
public:
    TransitionMatrix(Matrix entries, std::size_t time) : entries_(std::move(entries)), time_(time) {
        if (entries_.rows() != entries_.cols() || entries_.rows() < 1)
            throw std::invalid_argument("transition matrix must be square and non-empty");
        if (!is_row_stochastic(entries_, 1e-12))
            throw std::invalid_argument("transition matrix is not row-stochastic");
    }

    static bool is_row_stochastic(const Matrix& m, double tol) {
        if (!m.allFinite() || (m.array() < 0.0).any()) return false;
        return ((m.rowwise().sum().array() - 1.0).abs() <= tol).all();
    }

    const Matrix& entries() const noexcept { return entries_; }
    std::size_t time() const noexcept { return time_; }
    std::size_t n() const noexcept { return static_cast<std::size_t>(entries_.rows()); }

private:
    Matrix entries_;
    std::size_t time_;
};

struct RetainFlags {
    bool neighborhoods = false;
    bool matrices = false;
    bool operator==(const RetainFlags&) const = default;
};

/// Time-ordered run of one dynamics. `displacement[t]` is the largest row
/// displacement between configs[t] and configs[t+1].
struct Trajectory {
    std::vector<TokenConfiguration> configs;
    ModelParams params;
    DeltaSchedule schedule;
    std::optional<std::uint64_t> seed;
    std::vector<double> displacement;
    std::vector<std::vector<IndexSet>> neighborhoods; // empty unless retained
    std::vector<TransitionMatrix> matrices;           // empty unless retained
    bool stopped_early = false;

    std::size_t steps() const noexcept { return configs.empty() ? 0 : configs.size() - 1; }
    const TokenConfiguration& initial() const { return configs.front(); }
    const TokenConfiguration& last() const { return configs.back(); }
    std::size_t n() const { return configs.front().n(); }
    std::size_t d() const { return configs.front().d(); }
};

} // namespace attnflow
