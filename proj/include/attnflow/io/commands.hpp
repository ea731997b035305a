#pragma once
// simulate / analyze / lyapunov / plot. Each command returns a process exit
// code: 0 success, 1 a check failed, 2 invalid config or parameters, 3 I/O
// failure, 4 retained data missing, 5 unsupported dimension.

#include "attnflow/io/report.hpp"
#include "attnflow/io/svg.hpp"
#include "attnflow/io/trajectory_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>

namespace attnflow::cli {

namespace fs = std::filesystem;
using io::Json;

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kBadInput = 2,
    kIoError = 3,
    kMissingData = 4,
    kUnsupportedDimension = 5,
};

struct Style {
    bool color = false;

    static Style detect() {
        return Style{std::getenv("ATTNFLOW_NO_COLOR") == nullptr && ::isatty(::fileno(stdout)) != 0};
    }
    std::string paint(const std::string& s, const char* code) const {
        return color ? std::string("\x1b[") + code + "m" + s + "\x1b[0m" : s;
    }
    std::string status(const std::string& s) const {
        if (s == "pass") return paint("PASS", "32");
        if (s == "fail") return paint("FAIL", "31");
        if (s == "skipped") return paint("SKIP", "33");
        return paint("INFO", "36");
    }
};

struct SimulateOptions {
    std::optional<std::string> preset;
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> horizon;
    std::optional<std::string> retain;
    fs::path out = ".";
};

struct AnalyzeOptions {
    fs::path trajectory;
    fs::path out = ".";
    std::optional<std::string> analyses; // comma-separated names
    io::AnalysisOptions params;
};

struct PlotOptions {
    fs::path trajectory;
    fs::path out = ".";
    std::string kind = "trails";
    std::optional<fs::path> report;
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

/// "matrices,neighborhoods", either order, either alone, or "none".
inline RetainFlags parse_retain(const std::string& s) {
    RetainFlags r;
    for (const auto& item : split_list(s)) {
        if (item == "matrices") r.matrices = true;
        else if (item == "neighborhoods") r.neighborhoods = true;
        else if (item != "none") throw io::ConfigError("retain", "unknown retention flag '" + item + "'");
    }
    return r;
}

inline io::RunConfig resolve_config(const SimulateOptions& o) {
    if (o.preset.has_value() == o.config.has_value())
        throw io::ConfigError("", "exactly one of --preset or --config is required");
    io::RunConfig c = o.preset ? io::preset(*o.preset) : io::parse_config_text(io::read_config_file(*o.config));
    if (o.seed) c.seed = *o.seed;
    if (o.horizon) {
        if (*o.horizon < 1) throw io::ConfigError("horizon", "must be >= 1");
        c.horizon = *o.horizon;
    }
    if (o.retain) c.retain = parse_retain(*o.retain);
    return c;
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw io::IoError("cannot create output directory " + dir.string());
}

/// Runs `body` and maps exceptions onto exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const io::ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const io::MissingDataError& e) {
        err << "error: " << e.what() << '\n';
        return kMissingData;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kUnsupportedDimension;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    }
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const io::RunConfig c = resolve_config(o);
        const Trajectory traj = run(c.initial(), c.params(), c.schedule, c.horizon, c.stop_tol, c.retain,
                                    c.uses_seed() ? std::optional<std::uint64_t>(c.seed) : std::nullopt);
        ensure_dir(o.out);
        io::atomic_write(o.out / "trajectory.json", io::to_json_text(io::trajectory_json(traj, c), -1));
        io::atomic_write(o.out / "positions.csv", io::positions_csv(traj));
        io::atomic_write(o.out / "summary.json", io::to_json_text(io::summary_json(traj, c)));
        out << "simulated " << (c.name.empty() ? std::string("config") : c.name) << ": " << traj.steps() << " steps, "
            << (traj.stopped_early ? "numerically settled" : "horizon reached") << "; wrote " << o.out.string() << '\n';
        return int(kOk);
    });
}

inline int cmd_analyze(const AnalyzeOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const io::LoadedTrajectory lt = io::load_trajectory(o.trajectory);
        std::vector<io::AnalysisSpec> specs;
        if (o.analyses) {
            for (const auto& name : split_list(*o.analyses)) {
                const auto& known = io::known_analyses();
                if (std::find(known.begin(), known.end(), name) == known.end())
                    throw io::ConfigError("analyses", "unknown analysis '" + name + "'");
                specs.push_back({name, {}});
            }
        } else if (lt.config && !lt.config->analyses.empty()) {
            specs = lt.config->analyses;
        } else {
            specs = io::default_analyses();
        }
        const io::AnalysisOutcome r = io::analyze(lt.trajectory, specs, o.params);
        ensure_dir(o.out);
        io::atomic_write(o.out / "report.json", io::to_json_text(r.report));
        const Style st = Style::detect();
        for (const auto& c : r.report["checks"])
            out << st.status(c["status"].get<std::string>()) << "  " << c["name"].get<std::string>() << '\n';
        return int(r.passed ? kOk : kCheckFailed);
    });
}

inline int cmd_lyapunov(const AnalyzeOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const io::LoadedTrajectory lt = io::load_trajectory(o.trajectory);
        const io::AnalysisOutcome r = io::lyapunov_analysis(lt.trajectory, o.params);
        ensure_dir(o.out);
        io::atomic_write(o.out / "lyapunov.json", io::to_json_text(r.report));
        const Style st = Style::detect();
        out << st.status(r.passed ? "pass" : "fail") << "  max decrement residual "
            << io::format_double(r.report["max_residual"].get<double>(), 6) << ", s2 mass on tail "
            << io::format_double(r.report["s2_mass_tail"].get<double>(), 6) << '\n';
        return int(r.passed ? kOk : kCheckFailed);
    });
}

inline int cmd_plot(const PlotOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(err, [&] {
        const io::PlotKind kind = io::plot_kind_from_string(o.kind);
        const io::LoadedTrajectory lt = io::load_trajectory(o.trajectory);
        std::optional<io::PlotOverlay> overlay;
        if (o.report) overlay = io::overlay_from_report(io::parse_json(io::read_file(*o.report), o.report->string()));
        const std::string svg = io::render_svg(lt.trajectory, kind, overlay);
        ensure_dir(o.out);
        const fs::path file = o.out / (o.kind + ".svg");
        io::atomic_write(file, svg);
        out << "wrote " << file.string() << '\n';
        return int(kOk);
    });
}

} // namespace attnflow::cli
