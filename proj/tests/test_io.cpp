#include "attnflow/io/commands.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace attnflow;
using namespace attnflow::io;

namespace {

const char* kMinimal = R"({
  "d": 2, "alpha": 0.5,
  "schedule": {"kind": "constant", "delta0": 0.1},
  "init": [{"points": [[0, 0], [1, 0], [0, 1]]}],
  "horizon": 10
})";

std::string config_error_path(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

Json minimal() { return parse_json(kMinimal, "test"); }

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

} // namespace

TEST(FormatDouble, Examples) {
    EXPECT_EQ(format_double(0.0, 17), "0");
    EXPECT_EQ(format_double(-0.0, 17), "0");
    EXPECT_EQ(format_double(1.5, 17), "1.5");
    EXPECT_EQ(format_double(0.1, 17), "0.10000000000000001");
    EXPECT_EQ(format_double(0.1, 6), "0.1");
    EXPECT_EQ(format_double(1e-300, 17), "1e-300");
    EXPECT_THROW(format_double(std::nan(""), 17), std::invalid_argument);
}

TEST(FormatDouble, SeventeenDigitsRoundTrip) {
    std::mt19937_64 g(5);
    for (int k = 0; k < 10000; ++k) {
        double v;
        const std::uint64_t bits = g();
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v) || v == 0.0) continue;
        EXPECT_TRUE(bit_equal(std::strtod(format_double(v, 17).c_str(), nullptr), v));
    }
}

TEST(JsonText, IntegersStayIntegral) {
    const Json j{{"a", 3}, {"b", 2.0}, {"c", Json::array({1, 0.5})}};
    const std::string s = to_json_text(j, -1);
    EXPECT_EQ(s, "{\"a\":3,\"b\":2,\"c\":[1,0.5]}\n");
}

TEST(Config, ParsesMinimal) {
    const auto c = parse_config_text(kMinimal);
    EXPECT_EQ(c.n, 3u);
    EXPECT_EQ(c.d, 2u);
    EXPECT_EQ(c.kind, DynamicsKind::localmax);
    EXPECT_FALSE(c.interaction);
    EXPECT_FALSE(c.uses_seed());
    EXPECT_EQ(c.initial().states()(1, 0), 1.0);
}

TEST(Config, RoundTrip) {
    Json j = minimal();
    j["dynamics"] = "softmax";
    j["softmax"] = {{"h", 0.05}, {"beta_schedule", "constant"}, {"beta", 3.0}};
    j["schedule"] = {{"kind", "table"}, {"values", {0.3, 0.2, 0.1}}};
    j["interaction"] = {{2.0, 0.1}, {0.1, 1.0}};
    j["init"].push_back({{"box", {{"count", 4}, {"lo", {-1, -2}}, {"hi", {1, 2}}}}});
    j["seed"] = 99;
    j["retain"] = {{"matrices", true}};
    j["analyses"] = {{{"name", "quiescence"}, {"params", {{"epsilon", 0.01}}}}};
    const auto c = parse_config(j);
    EXPECT_EQ(c.n, 7u);
    EXPECT_TRUE(c.uses_seed());
    EXPECT_EQ(parse_config(to_json(c)), c);
    EXPECT_EQ(parse_config_text(to_json_text(to_json(c))), c);
    for (const auto& name : preset_names()) {
        const auto p = preset(name);
        EXPECT_EQ(parse_config_text(to_json_text(to_json(p))), p) << name;
    }
}

TEST(Config, ErrorsNameTheField) {
    Json j = minimal();
    j["bogus"] = 1;
    EXPECT_EQ(config_error_path(j.dump()), "bogus");
    j = minimal();
    j["schedule"]["ratio"] = 0.5;
    EXPECT_EQ(config_error_path(j.dump()), "schedule.ratio");
    j = minimal();
    j["schedule"]["kind"] = "linear";
    EXPECT_EQ(config_error_path(j.dump()), "schedule.kind");
    j = minimal();
    j["init"][0]["points"][1] = {1, 2, 3};
    EXPECT_EQ(config_error_path(j.dump()), "init[0].points[1]");
    j = minimal();
    j["n"] = 4;
    EXPECT_EQ(config_error_path(j.dump()), "n");
    j = minimal();
    j.erase("alpha");
    EXPECT_EQ(config_error_path(j.dump()), "alpha");
    j = minimal();
    j["alpha"] = -1;
    EXPECT_EQ(config_error_path(j.dump()), "alpha");
    j = minimal();
    j["analyses"] = {{{"name", "nope"}}};
    EXPECT_EQ(config_error_path(j.dump()), "analyses[0].name");
    j = minimal();
    j["init"].push_back({{"box", {{"count", 2}, {"lo", {1, 1}}, {"hi", {0, 2}}}}});
    EXPECT_EQ(config_error_path(j.dump()), "init[1].box");
    j = minimal();
    j["softmax"] = {{"h", 0.0}};
    EXPECT_EQ(config_error_path(j.dump()), "softmax.h");
    j = minimal();
    j["interaction"] = {{1.0, 0.0}, {0.0, 0.0}};
    EXPECT_EQ(config_error_path(j.dump()), "interaction");
    EXPECT_EQ(config_error_path("{\"d\": "), "");
    EXPECT_EQ(config_error_path(R"({"d": 2.5})"), "d");
}

TEST(Config, BoxPartsShareOneCounter) {
    Json j = minimal();
    j["init"] = {{{"box", {{"count", 10}, {"lo", {-1, -1}}, {"hi", {1, 1}}}}}};
    j["seed"] = 3;
    const auto one = parse_config(j).initial();
    EXPECT_EQ(one.states(), sample_uniform_box(10, Vector::Constant(2, -1.0), Vector::Constant(2, 1.0), 3).states());
    j["init"] = {{{"box", {{"count", 4}, {"lo", {-1, -1}}, {"hi", {1, 1}}}}},
                 {{"box", {{"count", 6}, {"lo", {-1, -1}}, {"hi", {1, 1}}}}}};
    EXPECT_EQ(parse_config(j).initial().states(), one.states());
}

TEST(Presets, Frozen) {
    const auto f = preset("figure2-localmax");
    EXPECT_EQ(f.n, 30u);
    EXPECT_EQ(f.alpha, 0.2);
    EXPECT_EQ(f.schedule.at(17), 0.3);
    EXPECT_EQ(f.horizon, 100u);
    const auto r = preset("remark33");
    EXPECT_EQ(r.initial().n(), r.n);
    EXPECT_EQ(preset("vanishing-delta").schedule.at(2), 0.4 * 0.95 * 0.95);
    EXPECT_THROW(preset("figure3"), ConfigError);
}

TEST(Trajectory, JsonRoundTripIsBitExact) {
    auto c = preset("figure2-localmax");
    c.horizon = 30;
    c.retain = {true, true};
    const auto t = run(c.initial(), c.params(), c.schedule, c.horizon, 0.0, c.retain, c.seed);
    const auto back = parse_trajectory(parse_json(to_json_text(trajectory_json(t, c)), "t"));
    const auto& u = back.trajectory;
    ASSERT_EQ(u.configs.size(), t.configs.size());
    for (std::size_t s = 0; s < t.configs.size(); ++s) {
        EXPECT_EQ(u.configs[s].time(), t.configs[s].time());
        const Matrix& a = t.configs[s].states();
        const Matrix& b = u.configs[s].states();
        for (Eigen::Index i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_equal(a.data()[i], b.data()[i]));
    }
    EXPECT_EQ(u.displacement, t.displacement);
    EXPECT_EQ(u.neighborhoods, t.neighborhoods);
    ASSERT_EQ(u.matrices.size(), t.matrices.size());
    for (std::size_t s = 0; s < t.matrices.size(); ++s) EXPECT_EQ(u.matrices[s].entries(), t.matrices[s].entries());
    EXPECT_EQ(u.seed, t.seed);
    EXPECT_EQ(u.schedule, t.schedule);
    EXPECT_EQ(u.params.alpha(), t.params.alpha());
    ASSERT_TRUE(back.config);
    EXPECT_EQ(*back.config, c);
    EXPECT_FALSE(first_replay_mismatch(u));
}

TEST(Trajectory, RejectsForeignAndTruncatedFiles) {
    const auto t = run(TokenConfiguration(Matrix::Identity(2, 2)), ModelParams::identity(2, 1.0),
                       DeltaSchedule::constant(0.0), 3);
    Json j = trajectory_json(t);
    Json bad = j;
    bad["format"] = "something-else";
    EXPECT_THROW(parse_trajectory(bad), ConfigError);
    bad = j;
    bad["displacement"].erase(0);
    EXPECT_THROW(parse_trajectory(bad), ConfigError);
    bad = j;
    bad["states"][1] = {{0.0, 0.0}};
    try {
        parse_trajectory(bad);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.path(), "states[1]");
    }
}

TEST(Csv, Format) {
    Matrix x(2, 2);
    x << 0.0, 1.0, 0.5, -0.25;
    const auto t = run(TokenConfiguration(x), ModelParams::identity(2, 1.0), DeltaSchedule::constant(0.0), 1);
    const std::string csv = positions_csv(t);
    EXPECT_EQ(csv.substr(0, 14), "t,token,x0,x1\r");
    EXPECT_NE(csv.find("0,1,0.5,-0.25\r\n"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST(Summary, Fields) {
    auto c = preset("figure2-localmax");
    c.horizon = 20;
    const auto t = run(c.initial(), c.params(), c.schedule, c.horizon, 0.0, {}, c.seed);
    const Json s = summary_json(t, c);
    EXPECT_EQ(s["name"], "figure2-localmax");
    EXPECT_EQ(s["steps"], 20u);
    EXPECT_EQ(s["displacement"].size(), 20u);
    EXPECT_GE(s["final_hull"].size(), 3u);
    EXPECT_GE(s["eta_horizon"].get<double>(), 0.0);
    const auto t3 = run(TokenConfiguration(Matrix::Identity(3, 3)), ModelParams::identity(3, 1.0),
                        DeltaSchedule::constant(0.0), 2);
    EXPECT_TRUE(summary_json(t3)["final_hull"].is_null());
}

TEST(Svg, Deterministic) {
    auto c = preset("figure2-localmax");
    c.horizon = 10;
    const auto t = run(c.initial(), c.params(), c.schedule, c.horizon, 0.0, {}, c.seed);
    for (auto kind : {PlotKind::trails, PlotKind::initial, PlotKind::final}) {
        const std::string a = render_svg(t, kind), b = render_svg(t, kind);
        EXPECT_EQ(a, b);
        EXPECT_EQ(a.rfind("<?xml", 0), 0u);
        EXPECT_NE(a.find("</svg>"), std::string::npos);
    }
    EXPECT_THROW(plot_kind_from_string("hulls"), ConfigError);
}

TEST(Errors, MissingDataNamesTheFlag) {
    const MissingDataError e("matrices", "lyapunov analysis needs matrices");
    EXPECT_EQ(e.flag(), "matrices");
    EXPECT_NE(std::string(e.what()).find("--retain matrices"), std::string::npos);
    auto c = preset("figure2-localmax");
    c.horizon = 5;
    const auto t = run(c.initial(), c.params(), c.schedule, c.horizon, 0.0, {}, c.seed);
    EXPECT_THROW(lyapunov_analysis(t), MissingDataError);
}

TEST(Files, AtomicWriteAndRead) {
    const auto dir = std::filesystem::temp_directory_path() / "attnflow_test_io";
    std::filesystem::create_directories(dir);
    atomic_write(dir / "a.txt", "hello");
    atomic_write(dir / "a.txt", "again");
    EXPECT_EQ(read_file(dir / "a.txt"), "again");
    EXPECT_THROW(read_file(dir / "missing.txt"), IoError);
    EXPECT_THROW(atomic_write(dir / "no" / "such" / "dir.txt", "x"), IoError);
    std::filesystem::remove_all(dir);
}
