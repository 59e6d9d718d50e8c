/// @file config.hpp
/// YAML run configuration with sections `plant`, `integrator`, `dmc`,
/// `schedule` and `scenario`. Requires yaml-cpp.
///
/// The `plant` section may name a parameter file with `include:` (resolved
/// relative to the config file); keys given next to it override the included
/// values.

#pragma once

#include <batchdmc/errors.hpp>
#include <batchdmc/harness.hpp>

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace batchdmc {

struct RunConfig {
    ScenarioConfig scenario;
    /// Piecewise-constant open-loop power (time s, W) for open-loop runs.
    std::vector<std::pair<double, double>> open_loop_power;
    std::string source_path;
    std::vector<std::string> warnings;

    /// Per-sample power for an open-loop run of the whole batch.
    std::vector<double> open_loop_profile() const
    {
        const std::size_t n = scenario.num_samples();
        std::vector<double> out(n, scenario.warmup_power);
        if (open_loop_power.empty())
            return out;
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * scenario.dmc.ts;
            double p = open_loop_power.front().second;
            for (const auto& [tk, pk] : open_loop_power)
                if (tk <= t + 1e-9)
                    p = pk;
            out[k] = p;
        }
        return out;
    }
};

namespace detail {

class YamlReader {
public:
    explicit YamlReader(std::string prefix) : prefix_(std::move(prefix)) {}

    std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    YAML::Node required(const YAML::Node& node, const std::string& key) const
    {
        if (!node || !node.IsMap() || !node[key])
            throw ConfigError("missing required field '" + path(key) + "'");
        return node[key];
    }

    double number(const YAML::Node& node, const std::string& key) const { return as_number(required(node, key), key); }

    double number_or(const YAML::Node& node, const std::string& key, double fallback) const
    {
        if (!node || !node[key])
            return fallback;
        return as_number(node[key], key);
    }

    int integer(const YAML::Node& node, const std::string& key) const { return as_int(required(node, key), key); }

    int integer_or(const YAML::Node& node, const std::string& key, int fallback) const
    {
        if (!node || !node[key])
            return fallback;
        return as_int(node[key], key);
    }

    std::string text_or(const YAML::Node& node, const std::string& key, const std::string& fallback) const
    {
        if (!node || !node[key])
            return fallback;
        if (!node[key].IsScalar())
            throw ConfigError("field '" + path(key) + "' must be a string");
        return node[key].as<std::string>();
    }

    /// Scalar broadcast to `n` entries or a list of exactly `n`.
    std::vector<double> weights(const YAML::Node& node, const std::string& key, int n) const
    {
        const YAML::Node v = required(node, key);
        if (v.IsScalar())
            return std::vector<double>(static_cast<std::size_t>(n), as_number(v, key));
        if (!v.IsSequence() || static_cast<int>(v.size()) != n)
            throw ConfigError("field '" + path(key) + "' must be a number or a list of " + std::to_string(n) +
                              " numbers");
        std::vector<double> out;
        for (const auto& e : v)
            out.push_back(as_number(e, key));
        return out;
    }

    std::vector<double> list(const YAML::Node& node, const std::string& key) const
    {
        const YAML::Node v = required(node, key);
        if (v.IsScalar())
            return {as_number(v, key)};
        if (!v.IsSequence())
            throw ConfigError("field '" + path(key) + "' must be a list of numbers");
        std::vector<double> out;
        for (const auto& e : v)
            out.push_back(as_number(e, key));
        return out;
    }

    /// [[t, value], ...] or a bare scalar meaning a constant from t = 0.
    std::vector<std::pair<double, double>> pairs(const YAML::Node& v, const std::string& key) const
    {
        if (v.IsScalar())
            return {{0.0, as_number(v, key)}};
        if (!v.IsSequence() || v.size() == 0)
            throw ConfigError("field '" + path(key) + "' must be a non-empty list of [time, value] pairs");
        std::vector<std::pair<double, double>> out;
        for (const auto& e : v) {
            if (!e.IsSequence() || e.size() != 2)
                throw ConfigError("field '" + path(key) + "' entries must be [time, value] pairs");
            out.emplace_back(as_number(e[0], key), as_number(e[1], key));
        }
        return out;
    }

private:
    double as_number(const YAML::Node& v, const std::string& key) const
    {
        try {
            if (v.IsScalar())
                return v.as<double>();
        } catch (const YAML::Exception&) {
        }
        throw ConfigError("field '" + path(key) + "' must be a number");
    }

    int as_int(const YAML::Node& v, const std::string& key) const
    {
        try {
            if (v.IsScalar())
                return v.as<int>();
        } catch (const YAML::Exception&) {
        }
        throw ConfigError("field '" + path(key) + "' must be an integer");
    }

    std::string prefix_;
};

inline YAML::Node load_yaml_file(const std::filesystem::path& file)
{
    try {
        return YAML::LoadFile(file.string());
    } catch (const YAML::BadFile&) {
        throw ConfigError("cannot open config file '" + file.string() + "'");
    } catch (const YAML::Exception& e) {
        throw ConfigError("cannot parse '" + file.string() + "': " + e.what());
    }
}

inline PlantParams parse_plant(const YAML::Node& node)
{
    const YamlReader r("plant");
    PlantParams p;
    p.kd0 = r.number(node, "kd0");
    p.ed = r.number(node, "ed");
    p.kp0_pre = r.number(node, "kp0_pre");
    p.ep = r.number(node, "ep");
    p.kt0_pre = r.number(node, "kt0_pre");
    p.et = r.number(node, "et");
    p.kf_pre = r.number(node, "kf_pre");
    p.ef = r.number(node, "ef");
    p.f = r.number(node, "f");
    p.theta_p = r.number(node, "theta_p");
    p.theta_t = r.number(node, "theta_t");
    p.ccs_a = r.number(node, "ccs_a");
    p.ccs_b = r.number(node, "ccs_b");
    p.rho_m = r.number(node, "rho_m");
    p.rho_p = r.number(node, "rho_p");
    p.f_s = r.number(node, "f_s");
    p.m0 = r.number(node, "m0");
    p.m_cp = r.number(node, "m_cp");
    p.mo_cpo = r.number(node, "mo_cpo");
    p.ua_r = r.number(node, "ua_r");
    p.ua_inf = r.number(node, "ua_inf");
    p.ua_o_inf = r.number(node, "ua_o_inf");
    p.alpha_heater = r.number(node, "alpha_heater");
    p.p_max = r.number(node, "p_max");
    p.t_amb = r.number(node, "t_amb");
    p.delta_hp = r.number(node, "delta_hp");
    p.m_conc0 = r.number(node, "m_conc0");
    p.v0 = r.number(node, "v0");
    return p;
}

// Merges an included parameter file under the inline keys of `plant`.
inline YAML::Node resolve_plant_node(const YAML::Node& plant, const std::filesystem::path& base_dir)
{
    if (!plant || !plant.IsMap())
        throw ConfigError("missing required field 'plant'");
    if (!plant["include"])
        return plant;
    const std::filesystem::path inc = base_dir / plant["include"].as<std::string>();
    YAML::Node file = load_yaml_file(inc);
    YAML::Node base = file["plant"] ? file["plant"] : file;
    YAML::Node merged = YAML::Clone(base);
    for (const auto& kv : plant) {
        const std::string key = kv.first.as<std::string>();
        if (key != "include")
            merged[key] = kv.second;
    }
    return merged;
}

} // namespace detail

/// Parses a run configuration document. `base_dir` resolves plant includes.
inline RunConfig parse_run_config(const YAML::Node& root, const std::filesystem::path& base_dir)
{
    using detail::YamlReader;
    if (!root || !root.IsMap())
        throw ConfigError("config root must be a mapping");

    RunConfig rc;
    ScenarioConfig& sc = rc.scenario;

    sc.plant = detail::parse_plant(detail::resolve_plant_node(root["plant"], base_dir));
    if (auto w = check_volume_consistency(sc.plant))
        rc.warnings.push_back(*w);

    const YAML::Node integ = root["integrator"];
    const YamlReader ri("integrator");
    sc.integrator.dt = ri.number_or(integ, "dt", 1.0);
    sc.integrator.substeps_per_sample = ri.integer_or(integ, "substeps_per_sample", 10);

    const YAML::Node dmc = root["dmc"];
    if (!dmc)
        throw ConfigError("missing required field 'dmc'");
    const YamlReader rd("dmc");
    sc.dmc.pred_horizon = rd.integer(dmc, "pred_horizon");
    sc.dmc.ctrl_horizon = rd.integer(dmc, "ctrl_horizon");
    sc.dmc.delay = rd.integer_or(dmc, "delay", 0);
    if (sc.dmc.pred_horizon < 1 || sc.dmc.ctrl_horizon < 1)
        throw ConfigError("field 'dmc.pred_horizon' and 'dmc.ctrl_horizon' must be >= 1");
    sc.dmc.q_weights = rd.weights(dmc, "q", sc.dmc.pred_horizon);
    sc.dmc.r_weights = rd.weights(dmc, "r", sc.dmc.ctrl_horizon);
    sc.dmc.alpha_filter = rd.number(dmc, "alpha_filter");
    sc.dmc.ts = rd.number_or(dmc, "ts", sc.integrator.sample_period());
    sc.dmc.u_min = rd.number_or(dmc, "u_min", 0.0);
    sc.dmc.u_max = rd.number_or(dmc, "u_max", sc.plant.p_max);
    sc.dmc.input_scale = rd.number_or(dmc, "input_scale", 1.0);
    if (dmc["du_max"])
        sc.dmc.du_max = rd.number(dmc, "du_max");

    const YAML::Node sched = root["schedule"];
    if (!sched)
        throw ConfigError("missing required field 'schedule'");
    const YamlReader rs("schedule");
    sc.breakpoints = rs.list(sched, "breakpoints");
    const std::string source = rs.text_or(sched, "source", "constant_power");
    if (source == "constant_power")
        sc.bank_source = BankSource::constant_power;
    else if (source == "prerun")
        sc.bank_source = BankSource::prerun;
    else
        throw ConfigError("field 'schedule.source' must be 'constant_power' or 'prerun'");
    sc.warmup_power = rs.number(sched, "warmup_power");
    sc.bank.step_samples = rs.integer_or(sched, "step_samples", 100);
    sc.bank.settle_cap = rs.integer_or(sched, "settle_cap", kDefaultSettleCap);
    if (sc.bank.step_samples < sc.dmc.delay + sc.dmc.pred_horizon)
        throw ConfigError("field 'schedule.step_samples' must cover dmc.delay + dmc.pred_horizon");
    const std::string handoff = rs.text_or(sched, "handoff", "free_response");
    if (handoff == "free_response")
        sc.handoff = Handoff::free_response;
    else if (handoff == "output_only")
        sc.handoff = Handoff::output_only;
    else
        throw ConfigError("field 'schedule.handoff' must be 'free_response' or 'output_only'");

    const YAML::Node scen = root["scenario"];
    if (!scen)
        throw ConfigError("missing required field 'scenario'");
    const YamlReader rc_s("scenario");
    sc.duration = rc_s.number(scen, "duration");

    const YAML::Node init = rc_s.required(scen, "initial_state");
    const YamlReader rinit("scenario.initial_state");
    sc.initial_state.x = rinit.number(init, "x");
    sc.initial_state.i_conc = rinit.number(init, "i_conc");
    sc.initial_state.t_reactor = rinit.number(init, "t_reactor");
    sc.initial_state.t_jacket = rinit.number(init, "t_jacket");

    sc.setpoint.knots = rc_s.pairs(rc_s.required(scen, "setpoint"), "setpoint");

    if (const YAML::Node dist = scen["disturbance"]) {
        const YamlReader r("scenario.disturbance");
        const std::string type = r.text_or(dist, "type", "none");
        if (type == "output_step") {
            sc.disturbance.enabled = true;
            sc.disturbance.magnitude = r.number(dist, "magnitude");
            sc.disturbance.time = r.number(dist, "time");
            const std::string ch = r.text_or(dist, "channel", "process");
            if (ch == "process")
                sc.disturbance.channel = DisturbanceChannel::process;
            else if (ch == "measurement")
                sc.disturbance.channel = DisturbanceChannel::measurement;
            else
                throw ConfigError("field 'scenario.disturbance.channel' must be 'process' or 'measurement'");
        } else if (type != "none") {
            throw ConfigError("field 'scenario.disturbance.type' must be 'none' or 'output_step'");
        }
    }

    if (const YAML::Node noise = scen["noise"]) {
        const YamlReader r("scenario.noise");
        const std::string type = r.text_or(noise, "type", "none");
        sc.noise.seed = static_cast<std::uint64_t>(r.integer_or(noise, "seed", 0));
        if (type == "gaussian") {
            sc.noise.enabled = true;
            sc.noise.std_dev = r.number(noise, "std");
        } else if (type != "none") {
            throw ConfigError("field 'scenario.noise.type' must be 'none' or 'gaussian'");
        }
    }

    const std::string mode = rc_s.text_or(scen, "plant_mode", "nonlinear");
    if (mode == "nonlinear")
        sc.plant_mode = PlantMode::nonlinear;
    else if (mode == "lti")
        sc.plant_mode = PlantMode::lti;
    else
        throw ConfigError("field 'scenario.plant_mode' must be 'nonlinear' or 'lti'");

    const std::string baseline = rc_s.text_or(scen, "metric_baseline", "filtered");
    if (baseline == "raw")
        sc.metric_vs_raw_setpoint = true;
    else if (baseline != "filtered")
        throw ConfigError("field 'scenario.metric_baseline' must be 'filtered' or 'raw'");

    if (const YAML::Node ol = scen["open_loop_power"])
        rc.open_loop_power = rc_s.pairs(ol, "open_loop_power");

    try {
        sc.validate();
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& file)
{
    RunConfig rc = parse_run_config(detail::load_yaml_file(file), file.parent_path());
    rc.source_path = file.string();
    return rc;
}

} // namespace batchdmc
