// attnflow: simulate localmax / hardmax / softmax token dynamics and analyze
// the resulting trajectories.
//
//   attnflow simulate --preset figure2-localmax --out run/
//   attnflow analyze run/trajectory.json --out run/
//   attnflow lyapunov run/trajectory.json --out run/
//   attnflow plot run/trajectory.json --kind trails --report run/report.json --out run/

#include "attnflow/io/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace attnflow;
    CLI::App app{"Localmax attention dynamics: simulation and analysis"};
    app.require_subcommand(1);

    cli::SimulateOptions sim;
    std::string sim_out = ".";
    auto* simulate = app.add_subcommand("simulate", "Run a preset or config and write trajectory.json, positions.csv, summary.json");
    auto* preset_opt = simulate->add_option("--preset", sim.preset, "Scenario preset")
                           ->check(CLI::IsMember(io::preset_names()));
    auto* config_opt = simulate->add_option("--config", sim.config, "Run configuration (JSON)");
    preset_opt->excludes(config_opt);
    simulate->add_option("--seed", sim.seed, "Seed of the initial-distribution sampler");
    simulate->add_option("--horizon", sim.horizon, "Number of steps");
    simulate->add_option("--retain", sim.retain, "Per-step data to keep: matrices,neighborhoods");
    simulate->add_option("--out", sim_out, "Output directory");

    cli::AnalyzeOptions an;
    std::string an_traj, an_out = ".";
    std::optional<double> an_eps, an_gamma, an_window;
    auto* analyze = app.add_subcommand("analyze", "Run diagnostics on a trajectory and write report.json");
    analyze->add_option("trajectory", an_traj, "trajectory.json")->required();
    analyze->add_option("--analyses", an.analyses, "Comma-separated analysis names");
    analyze->add_option("--epsilon", an_eps, "Distance threshold / ball radius");
    analyze->add_option("--gamma", an_gamma, "Neighborhood-diameter threshold for S1/S2");
    analyze->add_option("--window", an_window, "Tail window as a fraction of the steps");
    analyze->add_option("--out", an_out, "Output directory");

    cli::AnalyzeOptions ly;
    std::string ly_traj, ly_out = ".";
    std::optional<double> ly_gamma, ly_window;
    std::uint64_t ly_seed = 1;
    auto* lyapunov = app.add_subcommand("lyapunov", "Lyapunov analysis of a trajectory with retained matrices");
    lyapunov->add_option("trajectory", ly_traj, "trajectory.json")->required();
    lyapunov->add_option("--gamma", ly_gamma, "Neighborhood-diameter threshold for S1/S2");
    lyapunov->add_option("--window", ly_window, "Tail window as a fraction of the steps");
    lyapunov->add_option("--seed", ly_seed, "Seed of the random terminal vector");
    lyapunov->add_option("--out", ly_out, "Output directory");

    cli::PlotOptions pl;
    std::string pl_traj, pl_out = ".";
    std::optional<std::string> pl_report;
    auto* plot = app.add_subcommand("plot", "Render a trajectory as SVG");
    plot->add_option("trajectory", pl_traj, "trajectory.json")->required();
    plot->add_option("--kind", pl.kind, "trails, initial or final");
    plot->add_option("--report", pl_report, "report.json whose S and outside-S points are marked");
    plot->add_option("--out", pl_out, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kBadInput;
    }

    if (simulate->parsed()) {
        sim.out = sim_out;
        return cli::cmd_simulate(sim);
    }
    if (analyze->parsed()) {
        an.trajectory = an_traj;
        an.out = an_out;
        an.params.epsilon = an_eps;
        an.params.gamma = an_gamma;
        an.params.window = an_window;
        return cli::cmd_analyze(an);
    }
    if (lyapunov->parsed()) {
        ly.trajectory = ly_traj;
        ly.out = ly_out;
        ly.params.gamma = ly_gamma;
        ly.params.window = ly_window;
        ly.params.terminal_seed = ly_seed;
        return cli::cmd_lyapunov(ly);
    }
    pl.trajectory = pl_traj;
    pl.out = pl_out;
    if (pl_report) pl.report = *pl_report;
    return cli::cmd_plot(pl);
}
