#include "attnflow/dynamics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace attnflow;

namespace {

TokenConfiguration points(std::initializer_list<std::pair<double, double>> pts) {
    Matrix x(static_cast<Eigen::Index>(pts.size()), 2);
    Eigen::Index r = 0;
    for (auto [a, b] : pts) x.row(r++) << a, b;
    return TokenConfiguration(x);
}

Matrix random_states(std::mt19937_64& g, std::size_t n, std::size_t d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index k = 0; k < x.cols(); ++k) x(i, k) = u(g);
    return x;
}

Matrix random_spd(std::mt19937_64& g, std::size_t d) {
    const Matrix b = random_states(g, d, d);
    return b * b.transpose() + 0.5 * Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

} // namespace

TEST(CounterRng, DeterministicAndInUnitInterval) {
    const CounterRng a(42), b(42), c(43);
    for (std::uint64_t k = 0; k < 1000; ++k) {
        EXPECT_EQ(a.at(k), b.at(k));
        const double u = a.uniform_at(k);
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
    }
    EXPECT_NE(a.at(0), c.at(0));
    CounterRng s(7);
    EXPECT_EQ(s.next(), CounterRng(7).at(0));
    EXPECT_EQ(s.next(), CounterRng(7).at(1));
}

TEST(Neighborhood, SmallDeltaExcludesSelf) {
    const auto c = points({{1, 0}, {2, 0}, {0, 1}});
    const auto p = ModelParams::identity(2, 0.2);
    EXPECT_EQ(neighborhood(0, c, p, 0.5), (IndexSet{1}));
    EXPECT_EQ(neighborhood(0, c, p, 1.0), (IndexSet{0, 1}));
}

TEST(Neighborhood, SingleToken) {
    const auto c = points({{0.3, -2.0}});
    const auto p = ModelParams::identity(2, 0.2);
    for (double delta : {0.0, 0.1, 10.0}) EXPECT_EQ(neighborhood(0, c, p, delta), (IndexSet{0}));
}

TEST(Neighborhood, RejectsNegativeDelta) {
    const auto c = points({{1, 0}});
    EXPECT_THROW(neighborhood(0, c, ModelParams::identity(2, 0.2), -0.1), std::invalid_argument);
}

TEST(Neighborhood, MatchesNaiveOracle) {
    std::mt19937_64 g(5);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + g() % 15, d = 1 + g() % 4;
        const TokenConfiguration c(random_states(g, n, d));
        const ModelParams p(0.3, random_spd(g, d));
        const double delta = std::uniform_real_distribution<double>(0.0, 0.5)(g);
        for (std::size_t i = 0; i < n; ++i)
            EXPECT_EQ(neighborhood(i, c, p, delta), oracle::neighborhood(c.states(), p.interaction(), i, delta));
    }
}

TEST(Neighborhood, MonotoneInDelta) {
    std::mt19937_64 g(9);
    for (int rep = 0; rep < 100; ++rep) {
        const TokenConfiguration c(random_states(g, 12, 2));
        const auto p = ModelParams::identity(2, 0.5);
        for (std::size_t i = 0; i < 12; ++i) {
            IndexSet prev;
            for (double delta : {0.0, 0.05, 0.1, 0.3, 1.0, 5.0}) {
                const auto cur = neighborhood(i, c, p, delta);
                EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
                prev = cur;
            }
            EXPECT_EQ(prev.size(), 12u);
        }
    }
}

TEST(Neighborhood, ZeroDeltaIsArgmax) {
    std::mt19937_64 g(11);
    for (int rep = 0; rep < 100; ++rep) {
        const TokenConfiguration c(random_states(g, 10, 3));
        const auto p = ModelParams::identity(3, 0.5);
        for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(neighborhood(i, c, p, 0.0), argmax_neighborhood(i, c, p));
    }
}

TEST(LocalmaxStep, AllEqualIsFixed) {
    const auto c = points({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}});
    const auto next = localmax_step(c, ModelParams::identity(2, 0.7), 0.3);
    EXPECT_EQ(next.states(), c.states());
    EXPECT_EQ(next.time(), 1u);
}

TEST(LocalmaxStep, TwoTokenExample) {
    const auto c = points({{1, 0}, {3, 0}});
    const auto p = ModelParams::identity(2, 1.0);
    EXPECT_EQ(neighborhoods(c, p, 0.0), (std::vector<IndexSet>{{1}, {1}}));
    const auto next = localmax_step(c, p, 0.0);
    EXPECT_EQ(next.states()(0, 0), 2.0);
    EXPECT_EQ(next.states()(0, 1), 0.0);
    EXPECT_EQ(next.states()(1, 0), 3.0);
    EXPECT_EQ(next.states()(1, 1), 0.0);
}

TEST(LocalmaxStep, PermutationEquivariant) {
    std::mt19937_64 g(3);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 9;
        const Matrix x = random_states(g, n, 2);
        std::vector<Eigen::Index> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g);
        Matrix y(x.rows(), x.cols());
        for (std::size_t i = 0; i < n; ++i) y.row(static_cast<Eigen::Index>(i)) = x.row(perm[i]);
        const auto p = ModelParams::identity(2, 0.2);
        const auto a = localmax_step(TokenConfiguration(x), p, 0.3).states();
        const auto b = localmax_step(TokenConfiguration(y), p, 0.3).states();
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(b.row(static_cast<Eigen::Index>(i)), a.row(perm[i]));
    }
}

TEST(TransitionMatrix, SingleToken) {
    const auto a = transition_matrix(points({{1, 1}}), ModelParams::identity(2, 0.4), 0.1);
    ASSERT_EQ(a.n(), 1u);
    EXPECT_DOUBLE_EQ(a.entries()(0, 0), 1.0);
}

TEST(TransitionMatrix, TwoTokenExample) {
    const auto a = transition_matrix(points({{1, 0}, {3, 0}}), ModelParams::identity(2, 1.0), 0.0);
    Matrix expected(2, 2);
    expected << 0.5, 0.5, 0.0, 1.0;
    EXPECT_EQ(a.entries(), expected);
}

TEST(TransitionMatrix, RejectsNonStochastic) {
    Matrix m(2, 2);
    m << 0.5, 0.6, 0.0, 1.0;
    EXPECT_THROW(TransitionMatrix(m, 0), std::invalid_argument);
}

TEST(TransitionMatrix, SoftmaxHasNone) {
    const auto c = points({{1, 0}, {3, 0}});
    EXPECT_THROW(transition_matrix(c, ModelParams::identity(2, 1.0, DynamicsKind::softmax), 0.0), std::invalid_argument);
}

TEST(TransitionMatrix, MatchesDirectStep) {
    std::mt19937_64 g(17);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + g() % 20, d = 1 + g() % 4;
        const TokenConfiguration c(random_states(g, n, d));
        const ModelParams p(0.05 + (g() % 100) / 50.0, random_spd(g, d));
        const double delta = std::uniform_real_distribution<double>(0.0, 0.6)(g);
        const auto direct = localmax_step(c, p, delta);
        const auto via = apply_matrix(transition_matrix(c, p, delta), c);
        EXPECT_LE((direct.states() - via.states()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SoftmaxStep, FixedPointsAndLimit) {
    const auto p = ModelParams::identity(2, 1.0, DynamicsKind::softmax);
    const auto eq = points({{0.2, 0.1}, {0.2, 0.1}});
    EXPECT_EQ(softmax_step(eq, p, 3.0, 0.1).states(), eq.states());
    const auto one = points({{0.7, -0.3}});
    EXPECT_EQ(softmax_step(one, p, 3.0, 0.1).states(), one.states());

    // Large beta approaches the hardmax direction; with h = alpha/(1+alpha)
    // the Euler step and the localmax step coincide.
    const auto c = points({{1, 0}, {3, 0}});
    const auto soft = softmax_step(c, p, 1e4, 0.5);
    const auto hard = localmax_step(c, ModelParams::identity(2, 1.0), 0.0);
    EXPECT_LE((soft.states() - hard.states()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_THROW(softmax_step(c, p, 0.0, 0.1), std::invalid_argument);
}

TEST(SoftmaxOptions, BetaSchedule) {
    SoftmaxOptions s;
    s.h = 0.1;
    EXPECT_DOUBLE_EQ(s.beta_at(0), 1.0);
    EXPECT_DOUBLE_EQ(s.beta_at(5), std::exp(1.0));
    EXPECT_EQ(s.beta_at(100000), 1e8);
    s.beta_kind = SoftmaxOptions::Beta::constant;
    s.beta = 4.0;
    EXPECT_EQ(s.beta_at(77), 4.0);
}

TEST(Run, EquilibriumStopsEarly) {
    const auto c = points({{1, 1}, {1, 1}});
    const auto t = run(c, ModelParams::identity(2, 0.2), DeltaSchedule::constant(0.3), 50, 1e-14);
    EXPECT_TRUE(t.stopped_early);
    EXPECT_EQ(t.steps(), 1u);
    EXPECT_EQ(t.last().states(), c.states());
}

TEST(Run, TwoTokenClosedForm) {
    const auto t = run(points({{1, 0}, {3, 0}}), ModelParams::identity(2, 1.0), DeltaSchedule::constant(0.0), 50);
    ASSERT_EQ(t.steps(), 50u);
    for (std::size_t s = 0; s <= 50; ++s)
        EXPECT_NEAR(t.configs[s].states()(0, 0), 3.0 - 2.0 * std::pow(2.0, -double(s)), 1e-15);
    EXPECT_LT((t.last().token(0) - Vector::Unit(2, 0) * 3.0).norm(), 1e-6);
}

TEST(Run, RetentionAndReplay) {
    const auto init = sample_uniform_box(15, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 4);
    const auto p = ModelParams::identity(2, 0.2);
    const auto t = run(init, p, DeltaSchedule::geometric(0.3, 0.9), 40, 0.0, {true, true}, 4);
    EXPECT_EQ(t.neighborhoods.size(), 40u);
    EXPECT_EQ(t.matrices.size(), 40u);
    EXPECT_EQ(t.displacement.size(), 40u);
    for (std::size_t s = 0; s < 40; ++s) {
        EXPECT_EQ(t.matrices[s].time(), s);
        EXPECT_EQ(t.neighborhoods[s], neighborhoods(t.configs[s], p, 0.3 * std::pow(0.9, double(s))));
    }
    EXPECT_FALSE(first_replay_mismatch(t).has_value());
    const auto again = run(init, p, DeltaSchedule::geometric(0.3, 0.9), 40, 0.0, {true, true}, 4);
    for (std::size_t s = 0; s <= 40; ++s) EXPECT_EQ(again.configs[s], t.configs[s]);
}

TEST(Run, ReplayDetectsTampering) {
    const auto init = sample_uniform_box(8, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 1);
    auto t = run(init, ModelParams::identity(2, 0.2), DeltaSchedule::constant(0.3), 10);
    Matrix x = t.configs[6].states();
    x(0, 0) += 1e-12;
    t.configs[6] = TokenConfiguration(x, 6);
    EXPECT_EQ(first_replay_mismatch(t), std::optional<std::size_t>(5));
}

TEST(Run, RejectsBadArguments) {
    const auto c = points({{1, 0}});
    const auto p = ModelParams::identity(2, 0.2);
    EXPECT_THROW(run(c, p, DeltaSchedule::constant(0.1), 0), std::invalid_argument);
    EXPECT_THROW(run(c, p, DeltaSchedule::constant(0.1), 5, -1.0), std::invalid_argument);
    EXPECT_THROW(run(c, ModelParams::identity(3, 0.2), DeltaSchedule::constant(0.1), 5), std::invalid_argument);
}

TEST(ModelParams, Validation) {
    EXPECT_THROW(ModelParams::identity(2, 0.0), std::invalid_argument);
    EXPECT_THROW(ModelParams::identity(2, -1.0), std::invalid_argument);
    Matrix a(2, 2);
    a << 1, 2, 0, 1;
    EXPECT_THROW(ModelParams(0.1, a), std::invalid_argument);
    a << 1, 0, 0, -1;
    EXPECT_THROW(ModelParams(0.1, a), std::invalid_argument);
    EXPECT_THROW(DeltaSchedule::constant(-0.1), std::invalid_argument);
    EXPECT_THROW(DeltaSchedule::geometric(0.4, 1.0), std::invalid_argument);
    EXPECT_THROW(DeltaSchedule::table({}), std::invalid_argument);
}

TEST(DeltaSchedule, Values) {
    EXPECT_EQ(DeltaSchedule::constant(0.3).at(1000), 0.3);
    EXPECT_DOUBLE_EQ(DeltaSchedule::geometric(0.4, 0.95).at(2), 0.4 * 0.95 * 0.95);
    EXPECT_DOUBLE_EQ(DeltaSchedule::power(1.0, 2.0).at(3), 1.0 / 16.0);
    const auto t = DeltaSchedule::table({0.5, 0.25});
    EXPECT_EQ(t.at(0), 0.5);
    EXPECT_EQ(t.at(9), 0.25);
}

TEST(Sampler, BoxAndDeterminism) {
    const auto a = sample_uniform_box(30, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 12);
    const auto b = sample_uniform_box(30, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 12);
    EXPECT_EQ(a, b);
    EXPECT_GE(a.states().minCoeff(), -1.0);
    EXPECT_LT(a.states().maxCoeff(), 1.0);
    const CounterRng r(12);
    EXPECT_EQ(a.states()(3, 1), -1.0 + 2.0 * r.uniform_at(7));
}

TEST(IdentityMetric, PreservesHardmaxNeighborhoods) {
    std::mt19937_64 g(21);
    for (int rep = 0; rep < 50; ++rep) {
        const TokenConfiguration c(random_states(g, 10, 3));
        const ModelParams p(0.3, random_spd(g, 3), DynamicsKind::hardmax);
        const auto y = to_identity_metric(c, p);
        EXPECT_EQ(argmax_neighborhoods(c, p), argmax_neighborhoods(y, ModelParams::identity(3, 0.3)));
    }
}
