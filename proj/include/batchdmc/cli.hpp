/// @file cli.hpp
/// Command-line front end: subcommands, CSV and text writers, run manifest.
/// Requires yaml-cpp (through config.hpp) and the vendored CLI11.

#pragma once

#include <batchdmc/config.hpp>
#include <batchdmc/errors.hpp>
#include <batchdmc/harness.hpp>
#include <batchdmc/integrator.hpp>
#include <batchdmc/linmodel.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace batchdmc::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigFailure = 2,
    kNumericFailure = 3,
};

/// Shortest round-trip decimal form; independent of locale and stream state.
inline std::string fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

struct RunManifest {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::string out_dir;
    std::string command;
};

inline void write_manifest(std::ostream& os, const RunManifest& m)
{
    os << "command: " << m.command << '\n'
       << "config: " << m.config_path << '\n'
       << "seed: " << m.seed << '\n'
       << "version: " << m.version << '\n'
       << "out_dir: " << m.out_dir << '\n';
}

/// One row per sample boundary. Power is the value held over the following
/// interval (the last row repeats the final value).
inline void write_open_loop_csv(std::ostream& os, const OpenLoopResult& r, std::span<const double> power)
{
    os << "t,power,x,i_conc,t_reactor,t_jacket,clamped\n";
    for (std::size_t k = 0; k < r.states.size(); ++k) {
        const ReactorState& s = r.states[k];
        const std::size_t j = power.empty() ? 0 : std::min(k, power.size() - 1);
        const bool clamped = k > 0 && r.clamped[k - 1];
        os << fmt(static_cast<double>(k) * r.sample_period) << ',' << fmt(power.empty() ? 0.0 : power[j]) << ','
           << fmt(s.x) << ',' << fmt(s.i_conc) << ',' << fmt(s.t_reactor - kCelsiusOffset) << ','
           << fmt(s.t_jacket - kCelsiusOffset) << ',' << (clamped ? 1 : 0) << '\n';
    }
}

inline void write_closed_loop_csv(std::ostream& os, std::span<const SimRow> rows)
{
    os << "t,y_sp,y_d,t_true,t_meas,t_jacket,x,i_conc,u,du,active_model,saturated\n";
    for (const SimRow& r : rows)
        os << fmt(r.t) << ',' << fmt(r.y_sp) << ',' << fmt(r.y_d) << ',' << fmt(r.t_true) << ',' << fmt(r.t_meas)
           << ',' << fmt(r.t_jacket) << ',' << fmt(r.x) << ',' << fmt(r.i_conc) << ',' << fmt(r.u) << ','
           << fmt(r.du) << ',' << r.active_model << ',' << (r.saturated ? 1 : 0) << '\n';
}

inline void write_metrics(std::ostream& os, const Metrics& m, std::size_t rows)
{
    os << "samples: " << rows << '\n'
       << "mae: " << fmt(m.mae) << '\n'
       << "max_err: " << fmt(m.max_err) << '\n'
       << "final_err: " << fmt(m.final_err) << '\n'
       << "saturated_fraction: " << fmt(m.saturated_fraction) << '\n';
}

namespace detail {

inline void write_row(std::ostream& os, const char* label, const Eigen::RowVectorXd& v)
{
    os << label;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        os << ' ' << fmt(v(i));
    os << '\n';
}

inline void write_list(std::ostream& os, const char* label, std::span<const double> v)
{
    os << label;
    for (const double x : v)
        os << ' ' << fmt(x);
    os << '\n';
}

} // namespace detail

/// Plain-text model bank: one block per model in time order.
inline void write_model_bank(std::ostream& os, const std::vector<LinearModel>& bank)
{
    os << "models " << bank.size() << '\n';
    for (std::size_t i = 0; i < bank.size(); ++i) {
        const LinearModel& m = bank[i];
        const ReactorState& s = m.op.state_s;
        os << "\nmodel " << i << '\n'
           << "time " << fmt(m.op.time_s) << '\n'
           << "state " << fmt(s.x) << ' ' << fmt(s.i_conc) << ' ' << fmt(s.t_reactor) << ' ' << fmt(s.t_jacket)
           << '\n'
           << "power " << fmt(m.op.power_s) << '\n';
        for (Eigen::Index r = 0; r < m.a.rows(); ++r)
            detail::write_row(os, "A", m.a.row(r));
        detail::write_row(os, "B", m.b.transpose());
        detail::write_row(os, "C", m.c);
        detail::write_list(os, "tf_num", m.tf.num);
        detail::write_list(os, "tf_den", m.tf.den);
        if (m.step.dc_gain)
            os << "dc_gain " << fmt(*m.step.dc_gain) << '\n';
        else
            os << "dc_gain integrating\n";
        os << "n_settle " << m.step.n_settle << '\n'
           << "max_real_eig " << fmt(m.max_real_eig) << '\n';
        detail::write_list(os, "step", m.step.g);
        os << "end\n";
    }
}

/// Step samples of every bank model, one column per model.
inline void write_step_csv(std::ostream& os, const std::vector<LinearModel>& bank)
{
    os << "k,t";
    for (std::size_t i = 0; i < bank.size(); ++i)
        os << ",model_" << i;
    os << '\n';
    std::size_t n = 0;
    for (const LinearModel& m : bank)
        n = std::max(n, m.step.g.size());
    const double ts = bank.empty() ? 0.0 : bank.front().disc.ts;
    for (std::size_t k = 0; k < n; ++k) {
        os << (k + 1) << ',' << fmt(static_cast<double>(k + 1) * ts);
        for (const LinearModel& m : bank)
            os << ',' << (k < m.step.g.size() ? fmt(m.step.g[k]) : std::string());
        os << '\n';
    }
}

struct Options {
    std::string command;
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    bool no_noise = false;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& file)
{
    std::ofstream os(file, std::ios::binary);
    if (!os)
        throw Error("cannot write " + file.string());
    return os;
}

inline RunConfig load_with_overrides(const Options& opt)
{
    RunConfig rc = load_run_config(opt.config);
    if (opt.seed)
        rc.scenario.noise.seed = *opt.seed;
    if (opt.no_noise)
        rc.scenario.noise.enabled = false;
    return rc;
}

inline void emit_manifest(const Options& opt, const RunConfig& rc, const std::filesystem::path& dir)
{
    std::ofstream os = open_output(dir / "manifest.txt");
    write_manifest(os, {opt.config, rc.scenario.noise.seed, kVersion, opt.out, opt.command});
}

} // namespace detail

/// Executes one parsed command; throws on failure.
inline void execute(const Options& opt, std::ostream& out)
{
    const RunConfig rc = detail::load_with_overrides(opt);
    const ScenarioConfig& sc = rc.scenario;
    for (const std::string& w : rc.warnings)
        out << "warning: " << w << '\n';

    if (opt.command == "validate-config") {
        out << "config ok: " << opt.config << '\n';
        return;
    }

    const std::filesystem::path dir(opt.out);
    std::filesystem::create_directories(dir);

    if (opt.command == "simulate") {
        const std::vector<double> power = rc.open_loop_profile();
        const OpenLoopResult r = simulate_open_loop(sc.initial_state, power, sc.plant, sc.integrator);
        std::ofstream os = detail::open_output(dir / "open_loop.csv");
        write_open_loop_csv(os, r, power);
        out << "wrote " << (dir / "open_loop.csv").string() << " (" << r.states.size() << " rows)\n";
    } else if (opt.command == "linearize" || opt.command == "step-response") {
        const std::vector<LinearModel> bank = build_scenario_bank(sc);
        const bool tf = opt.command == "linearize";
        const std::filesystem::path file = dir / (tf ? "model_bank.txt" : "step_response.csv");
        std::ofstream os = detail::open_output(file);
        if (tf)
            write_model_bank(os, bank);
        else
            write_step_csv(os, bank);
        out << "wrote " << file.string() << " (" << bank.size() << " models)\n";
    } else if (opt.command == "run") {
        const SimResult r = run_closed_loop(sc);
        {
            std::ofstream os = detail::open_output(dir / "closed_loop.csv");
            write_closed_loop_csv(os, r.rows);
        }
        {
            std::ofstream os = detail::open_output(dir / "metrics.txt");
            write_metrics(os, r.metrics, r.rows.size());
        }
        write_metrics(out, r.metrics, r.rows.size());
    } else {
        throw ConfigError("unknown command '" + opt.command + "'");
    }
    detail::emit_manifest(opt, rc, dir);
}

/// Parses arguments, runs the command and maps failures to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Batch reactor temperature control with scheduled DMC"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Options opt;
    std::uint64_t seed = 0;
    const struct {
        const char* name;
        const char* help;
    } commands[] = {
        {"simulate", "open-loop batch run to open_loop.csv"},
        {"linearize", "model bank to model_bank.txt"},
        {"step-response", "bank step responses to step_response.csv"},
        {"run", "closed-loop batch to closed_loop.csv and metrics.txt"},
        {"validate-config", "load and check a configuration"},
    };
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", opt.config, "configuration file")->required();
        sub->add_option("--out", opt.out, "output directory");
        sub->add_option("--seed", seed, "noise seed, overrides the config");
        sub->add_flag("--no-noise", opt.no_noise, "disable measurement noise");
        sub->callback([&opt, sub, &seed] {
            opt.command = sub->get_name();
            if (sub->count("--seed") > 0)
                opt.seed = seed;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfigFailure;
    }

    try {
        execute(opt, out);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const InvalidParameter& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const RangeError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}

} // namespace batchdmc::cli
