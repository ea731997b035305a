// Acceptance checks. `acceptance N` runs criterion N, `acceptance` runs all;
// each prints one PASS/FAIL line and the exit status is nonzero on failure.

#include "attnflow/io/report.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <string>

using namespace attnflow;

namespace {

struct Result {
    bool pass;
    std::string detail;
};

std::string num(double v) { return io::format_double(v, 4); }

Trajectory simulate(const io::RunConfig& c) {
    return run(c.initial(), c.params(), c.schedule, c.horizon, c.stop_tol, c.retain, c.seed);
}

io::RunConfig seeded(const std::string& preset, std::uint64_t seed) {
    auto c = io::preset(preset);
    c.seed = seed;
    return c;
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

// Localmax runs of every scenario preset, with matrices retained.
std::vector<std::pair<std::string, Trajectory>> scenario_runs() {
    std::vector<std::pair<std::string, Trajectory>> out;
    const auto add = [&](const std::string& preset, std::uint64_t seeds) {
        for (std::uint64_t s = 0; s < seeds; ++s) {
            auto c = seeded(preset, s);
            c.retain.matrices = true;
            out.emplace_back(preset + "/" + std::to_string(s), simulate(c));
        }
    };
    add("figure2-localmax", 10);
    add("figure2-hardmax", 10);
    add("figure56", 10);
    add("vanishing-delta", 5);
    add("remark33", 2);
    return out;
}

Result hull_monotonicity_criterion() {
    const auto start = std::chrono::steady_clock::now();
    std::size_t violations = 0;
    for (std::uint64_t s = 0; s < 100; ++s) violations += hull_monotonicity(simulate(seeded("figure2-localmax", s)), 1e-9).size();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {violations == 0 && secs < 10.0,
            "100 seeds, " + std::to_string(violations) + " violations at 1e-9, " + num(secs) + " s (budget 10 s)"};
}

Result matrix_direct_criterion() {
    std::mt19937_64 g(2024);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 1 + g() % 20, d = 1 + g() % 4;
        const TokenConfiguration c(random_states(g, n, d));
        const ModelParams p(0.05 + double(g() % 100) / 50.0, random_spd(g, d));
        const double delta = std::uniform_real_distribution<double>(0.0, 0.6)(g);
        const auto direct = localmax_step(c, p, delta);
        const auto via = apply_matrix(transition_matrix(c, p, delta), c);
        worst = std::max(worst, (direct.states() - via.states()).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-12, "1000 configs, max entrywise gap " + num(worst) + " (tol 1e-12)"};
}

Result decrement_criterion() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s <= 20; ++s) {
        auto c = seeded("figure2-localmax", s == 0 ? io::preset("figure2-localmax").seed : 1000 + s);
        c.retain.matrices = true;
        const auto t = simulate(c);
        worst = std::max(worst, decrement_identity(t, backward_aps(t)).max_residual);
    }
    return {worst <= 1e-10, "preset + 20 seeds, max |dV - H term| " + num(worst) + " (tol 1e-10)"};
}

// Two tight clusters far apart on the x axis. A cluster starts wider than
// the quiescent ball, so its members enter the ball after t = 0.
Trajectory cluster_instance(double alpha) {
    std::mt19937_64 g(11);
    std::uniform_real_distribution<double> u(-0.06, 0.06);
    Matrix x(12, 2);
    for (Eigen::Index i = 0; i < 6; ++i) {
        x.row(i) << 10 + u(g), u(g);
        x.row(6 + i) << -10 + u(g), u(g);
    }
    return run(TokenConfiguration(x), ModelParams::identity(2, alpha), DeltaSchedule::constant(0.1), 400);
}

Result quiescence_criterion() {
    bool ok = true;
    std::string detail;
    for (double alpha : {0.1, 1.0}) {
        const auto t = cluster_instance(alpha);
        const Vec2 v = as_vec2(t.last(), 0);
        const auto q = quiescence_theorem_mode(t, v);
        const IndexSet cluster{0, 1, 2, 3, 4, 5};
        if (!q.settling_time || q.members != cluster) {
            ok = false;
            detail += "alpha " + num(alpha) + ": no settling; ";
            continue;
        }
        const auto fit = contraction_rate(t, cluster, *q.settling_time);
        const double want = 1.0 / (1.0 + alpha), gap = std::abs(fit.ratio - want);
        ok = ok && !fit.collapsed && gap <= 1e-6;
        detail += "alpha " + num(alpha) + ": eps " + num(quiescence_radius(t.params, 0.1)) + ", settles at t=" +
                  std::to_string(*q.settling_time) + ", ratio " + io::format_double(fit.ratio, 10) + " vs " +
                  io::format_double(want, 10) + " (gap " + num(gap) + "); ";
    }
    return {ok, detail + "tol 1e-6"};
}

Result no_finite_time_criterion() {
    std::size_t bad_seeds = 0, earliest = 0;
    bool any = false;
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto c = seeded("figure2-localmax", s);
        c.horizon = 10000;
        const auto t = simulate(c);
        for (std::size_t k = 0; k < t.displacement.size(); ++k)
            if (!(t.displacement[k] > 0.0)) {
                ++bad_seeds;
                if (!any || k < earliest) earliest = k;
                any = true;
                break;
            }
    }
    std::string detail = "50 seeds x 10000 steps, " + std::to_string(bad_seeds) + " seeds reach zero displacement";
    if (any) detail += " (earliest at step " + std::to_string(earliest) + ", double-precision fixed point)";
    return {bad_seeds == 0, detail};
}

Result outside_s_criterion() {
    bool ok = true;
    std::string detail = "remark33 seeds 0-9, outside-S tokens (dist >= 0.05):";
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto t = simulate(seeded("remark33", s));
        const auto r = limit_classification(t, alignment_candidates(hull2d(t.last())), 0.05);
        std::size_t count = 0;
        for (const auto& e : r.tokens) count += e.distance >= 0.05;
        ok = ok && count >= 1;
        detail += " " + std::to_string(count);
    }
    return {ok, detail};
}

Result vanishing_delta_criterion() {
    double worst = 0.0;
    std::size_t outside = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto t = simulate(seeded("vanishing-delta", s));
        const auto r = limit_classification(t, alignment_candidates(hull2d(t.last())), 0.05);
        outside += r.outside_count();
        worst = std::max(worst, r.max_distance());
    }
    return {outside == 0, "20 seeds, delta 0.4*0.95^t, horizon 2000: " + std::to_string(outside) +
                              " tokens beyond 0.05, max distance to S " + num(worst)};
}

Result hardmax_embedding_criterion() {
    std::mt19937_64 g(8);
    std::size_t mismatched = 0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + g() % 20, d = 1 + g() % 4;
        const TokenConfiguration c(random_states(g, n, d));
        const Matrix a = rep % 2 ? random_spd(g, d) : Matrix::Identity(Eigen::Index(d), Eigen::Index(d));
        const double alpha = 0.05 + double(g() % 100) / 50.0;
        const auto local = run(c, ModelParams(alpha, a, DynamicsKind::localmax), DeltaSchedule::constant(0.0), 100);
        const auto hard = run(c, ModelParams(alpha, a, DynamicsKind::hardmax), DeltaSchedule::constant(0.0), 100);
        bool same = local.configs.size() == hard.configs.size();
        for (std::size_t s = 0; same && s < local.configs.size(); ++s) {
            const Matrix& x = local.configs[s].states();
            const Matrix& y = hard.configs[s].states();
            same = std::memcmp(x.data(), y.data(), sizeof(double) * std::size_t(x.size())) == 0;
        }
        mismatched += !same;
    }
    return {mismatched == 0, "100 random configs x 100 steps, " + std::to_string(mismatched) + " not bit-identical"};
}

Result phenomenology_criterion() {
    std::size_t empty_s2 = 0, nonempty_s2 = 0, influence = 0, far_s1 = 0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto t = simulate(seeded("figure56", s));
        const auto c = io::tail_classification_for(t, std::nullopt, std::nullopt);
        (c.s2.empty() ? empty_s2 : nonempty_s2) += 1;
        for (const auto& p : c.s1_vertices) {
            worst = std::max(worst, p.distance);
            far_s1 += p.distance > 0.05;
        }
        influence += influence_structure(t, c).violations.size();
    }
    const bool ok = empty_s2 > 0 && nonempty_s2 > 0 && far_s1 == 0 && influence == 0;
    return {ok, "200 seeds: S2 empty " + std::to_string(empty_s2) + ", S2 non-empty " + std::to_string(nonempty_s2) +
                    ", S1 max distance to a vertex " + num(worst) + " (tol 0.05), tail neighborhood violations " +
                    std::to_string(influence)};
}

Result geometry_criterion() {
    std::mt19937_64 g(10);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::size_t polygons = 0, unmatched = 0;
    while (polygons < 50) {
        const std::size_t m = 3 + g() % 4;
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < m; ++i) pts.emplace_back(u(g), u(g));
        const Polygon k = hull2d(std::span<const Vec2>(pts));
        if (k.degenerate()) continue;
        bool admissible = true;
        for (const auto& v : k.vertices()) admissible = admissible && std::abs(alignment_residual(v, k)) <= 1e-12;
        if (!admissible || !oracle::grid_resolvable(k.vertices())) continue;
        ++polygons;
        const auto s = maximal_alignment_set(k);
        const auto grid = oracle::grid_alignment_set(k.vertices(), 1e-3);
        bool match = true;
        for (const auto& p : s.points) {
            double best = 1e300;
            for (const auto& q : grid) best = std::min(best, (p.position - q).norm());
            match = match && best <= 2e-3;
        }
        for (const auto& q : grid) match = match && s.nearest(q).second <= 2e-3;
        unmatched += !match;
    }
    std::size_t hull_mismatch = 0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + g() % 150;
        std::vector<Vec2> pts;
        for (std::size_t i = 0; i < n; ++i) {
            if (rep % 3 == 0) {
                const double r = std::sqrt(unit(g)), a = 2 * std::numbers::pi * unit(g);
                pts.emplace_back(r * std::cos(a), r * std::sin(a));
            } else if (rep % 3 == 1) {
                pts.emplace_back(u(g), u(g));
            } else {
                pts.emplace_back(std::round(4 * u(g)) / 4, std::round(4 * u(g)) / 4); // lattice: collinear and repeated
            }
        }
        auto got = hull2d(std::span<const Vec2>(pts)).vertices();
        std::sort(got.begin(), got.end(), [](const Vec2& a, const Vec2& b) {
            return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
        });
        hull_mismatch += got != oracle::brute_hull(pts);
    }
    return {unmatched == 0 && hull_mismatch == 0,
            "50 polygons vs grid (h 1e-3, radius 2e-3): " + std::to_string(unmatched) + " mismatched; 200 point sets vs " +
                "brute-force hull: " + std::to_string(hull_mismatch) + " mismatched"};
}

Result aps_criterion() {
    double residual = 0.0, simplex = 0.0, rise = 0.0;
    std::size_t sequences = 0;
    for (const auto& [name, t] : scenario_runs()) {
        for (const auto& terminal :
             {std::optional<ProbabilityVector>{}, std::optional(ProbabilityVector::random(t.n(), sequences + 1))}) {
            const auto aps = backward_aps(t, terminal);
            ++sequences;
            residual = std::max(residual, aps_relation_residual(t.matrices, aps));
            for (const auto& p : aps.vectors)
                simplex = std::max({simplex, std::abs(p.weights().sum() - 1.0), -p.weights().minCoeff()});
            const auto d = decrement_identity(t, aps);
            for (std::size_t k = 0; k + 1 < d.V.size(); ++k) rise = std::max(rise, d.V[k + 1] - d.V[k]);
        }
    }
    return {residual <= 1e-12 && simplex <= 1e-12 && rise <= 1e-10,
            std::to_string(sequences) + " sequences: max relation residual " + num(residual) + " (tol 1e-12), simplex error " +
                num(simplex) + ", max V increase " + num(rise) + " (slack 1e-10)"};
}

Result lower_bound_criterion() {
    std::size_t violations = 0, runs = 0;
    for (const auto& [name, t] : scenario_runs()) {
        const auto c = io::tail_classification_for(t, std::nullopt, std::nullopt);
        violations += lyapunov_lower_bound_check(t, backward_aps(t), c, c.gamma, 1e-10).size();
        ++runs;
    }
    return {violations == 0, std::to_string(runs) + " scenario tails, " + std::to_string(violations) +
                                 " lower-bound violations (slack 1e-10)"};
}

struct Criterion {
    const char* name;
    std::function<Result()> check;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {"hull monotonicity", hull_monotonicity_criterion},
        {"matrix/direct equivalence", matrix_direct_criterion},
        {"decrement identity", decrement_criterion},
        {"quiescence and contraction rate", quiescence_criterion},
        {"no finite-time convergence", no_finite_time_criterion},
        {"convergence outside S", outside_s_criterion},
        {"vanishing delta converges into S", vanishing_delta_criterion},
        {"hardmax embedding", hardmax_embedding_criterion},
        {"S1/S2 phenomenology", phenomenology_criterion},
        {"geometry oracles", geometry_criterion},
        {"APS validity", aps_criterion},
        {"Lyapunov lower bounds", lower_bound_criterion},
    };
    return all;
}

bool report(std::size_t k) {
    const auto& c = criteria()[k - 1];
    Result r{false, ""};
    try {
        r = c.check();
    } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << k << " (" << c.name << "): " << r.detail << std::endl;
    return r.pass;
}

} // namespace

int main(int argc, char** argv) {
    const std::size_t count = criteria().size();
    if (argc > 2) {
        std::cerr << "usage: acceptance [criterion 1-" << count << "]\n";
        return 2;
    }
    if (argc == 2) {
        const auto k = std::strtoul(argv[1], nullptr, 10);
        if (k < 1 || k > count) {
            std::cerr << "criterion must be 1-" << count << '\n';
            return 2;
        }
        return report(k) ? 0 : 1;
    }
    bool ok = true;
    for (std::size_t k = 1; k <= count; ++k) ok = report(k) && ok;
    return ok ? 0 : 1;
}
