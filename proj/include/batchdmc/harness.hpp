/// @file harness.hpp
/// Closed-loop batch simulation: nonlinear plant, scheduled DMC, output step
/// disturbance and Gaussian measurement noise.

#pragma once

#include <batchdmc/dmc.hpp>
#include <batchdmc/errors.hpp>
#include <batchdmc/integrator.hpp>
#include <batchdmc/kinetics.hpp>
#include <batchdmc/linmodel.hpp>
#include <batchdmc/scheduler.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace batchdmc {

/// Piecewise-linear set point in degC, held constant outside its knots.
struct SetpointProfile {
    std::vector<std::pair<double, double>> knots;  ///< (time s, degC), strictly increasing times

    void validate() const
    {
        detail::require(!knots.empty(), "set point profile needs at least one knot");
        for (std::size_t i = 1; i < knots.size(); ++i)
            detail::require(knots[i].first > knots[i - 1].first, "set point knot times must be strictly increasing");
    }

    double at(double t) const
    {
        if (t <= knots.front().first)
            return knots.front().second;
        if (t >= knots.back().first)
            return knots.back().second;
        const auto it = std::upper_bound(knots.begin(), knots.end(), t,
                                         [](double v, const auto& k) { return v < k.first; });
        const auto& [t1, y1] = *it;
        const auto& [t0, y0] = *std::prev(it);
        return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
    }
};

enum class DisturbanceChannel { process, measurement };

struct Disturbance {
    bool enabled = false;
    double magnitude = 0.0;  ///< degC
    double time = 0.0;       ///< s
    DisturbanceChannel channel = DisturbanceChannel::process;

    double at(double t) const { return enabled && t >= time ? magnitude : 0.0; }
};

struct Noise {
    bool enabled = false;
    double std_dev = 0.0;  ///< degC
    std::uint64_t seed = 0;
};

/// How the nominal power profile behind the model bank is obtained.
enum class BankSource {
    constant_power,  ///< open loop at `warmup_power`
    prerun,          ///< applied inputs of a single-model closed-loop pre-run
};

enum class PlantMode {
    nonlinear,
    lti,  ///< plant replaced by the first bank model, exact discrete simulation
};

struct ScenarioConfig {
    SetpointProfile setpoint;
    double duration = 0.0;  ///< s
    Disturbance disturbance;
    Noise noise;
    DmcConfig dmc;
    std::vector<double> breakpoints;
    PlantParams plant;
    IntegratorConfig integrator;
    ReactorState initial_state;
    BankSource bank_source = BankSource::constant_power;
    double warmup_power = 0.0;  ///< W per heater, also the initial applied input
    BankOptions bank;
    PlantMode plant_mode = PlantMode::nonlinear;
    bool metric_vs_raw_setpoint = false;  ///< compare against y_sp instead of y_d
    Handoff handoff = Handoff::free_response;

    std::size_t num_samples() const { return static_cast<std::size_t>(std::llround(duration / dmc.ts)); }

    void validate() const
    {
        setpoint.validate();
        dmc.validate();
        plant.validate();
        integrator.validate();
        batchdmc::validate(initial_state);
        detail::require(duration > 0.0, "batch duration must be positive");
        if (std::abs(integrator.sample_period() - dmc.ts) > 1e-9 * dmc.ts)
            throw ConfigError("integrator dt * substeps_per_sample must equal the DMC sampling period");
        const double k = std::round(duration / dmc.ts);
        if (std::abs(k * dmc.ts - duration) > 1e-9 * dmc.ts)
            throw ConfigError("batch duration must be a multiple of the sampling period");
        detail::require(!noise.enabled || noise.std_dev >= 0.0, "noise std must be >= 0");
        detail::require(warmup_power >= 0.0 && warmup_power <= plant.p_max, "warm-up power must lie in [0, p_max]");
        detail::require(dmc.u_min >= 0.0 && dmc.u_max <= plant.p_max, "actuator bounds must lie in [0, p_max]");
        detail::require(!breakpoints.empty(), "at least one model breakpoint is required");
    }
};

struct SimRow {
    double t = 0.0;
    double y_sp = 0.0;
    double y_d = 0.0;
    double t_true = 0.0;  ///< process output, degC (plant temperature plus process-channel disturbance)
    double t_meas = 0.0;
    double t_jacket = 0.0;  ///< degC
    double x = 0.0;
    double i_conc = 0.0;
    double u = 0.0;
    double du = 0.0;
    std::size_t active_model = 0;
    bool saturated = false;
};

struct Metrics {
    double mae = 0.0;
    double max_err = 0.0;
    double saturated_fraction = 0.0;
    double final_err = 0.0;
};

struct SimResult {
    std::vector<SimRow> rows;
    Metrics metrics;
};

/// Mean and max absolute tracking error of the process output against y_d (or
/// y_sp), and the fraction of saturated samples.
inline Metrics compute_metrics(std::span<const SimRow> rows, bool vs_raw_setpoint = false)
{
    if (rows.empty())
        throw RangeError("no rows to compute metrics from");
    Metrics m;
    double sum = 0.0;
    std::size_t saturated = 0;
    for (const SimRow& r : rows) {
        const double e = std::abs(r.t_true - (vs_raw_setpoint ? r.y_sp : r.y_d));
        sum += e;
        m.max_err = std::max(m.max_err, e);
        saturated += r.saturated ? 1 : 0;
    }
    m.mae = sum / static_cast<double>(rows.size());
    m.saturated_fraction = static_cast<double>(saturated) / static_cast<double>(rows.size());
    m.final_err = std::abs(rows.back().t_true - (vs_raw_setpoint ? rows.back().y_sp : rows.back().y_d));
    return m;
}

namespace detail {

inline std::vector<double> future_setpoints(const SetpointProfile& sp, double t, double ts, int count)
{
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        out[static_cast<std::size_t>(i)] = sp.at(t + ts * (i + 1));
    return out;
}

} // namespace detail

/// Closed loop with a given bank and schedule.
inline SimResult run_closed_loop(const ScenarioConfig& sc, const std::vector<LinearModel>& bank,
                                 const Schedule& schedule)
{
    sc.validate();
    detail::require(!bank.empty(), "model bank is empty");
    schedule.validate(bank.size());

    const double ts = sc.dmc.ts;
    const std::size_t samples = sc.num_samples();
    const int horizon = sc.dmc.delay + sc.dmc.pred_horizon;

    std::vector<DmcGain> gains;
    gains.reserve(bank.size());
    for (const LinearModel& m : bank)
        gains.push_back(gain_for(m, sc.dmc));

    std::mt19937_64 rng(sc.noise.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::size_t active = active_model(schedule, 0.0);
    ControllerState ctrl = initial_controller_state(bank[active], sc.warmup_power, sc.setpoint.at(0.0));

    // exact LTI stand-in for the plant: deviation state of the first model
    const LinearModel& lti = bank.front();
    Eigen::VectorXd lti_state = Eigen::VectorXd::Zero(lti.a.rows());

    ReactorState plant = sc.initial_state;
    SimResult result;
    result.rows.reserve(samples + 1);

    for (std::size_t k = 0; k <= samples; ++k) {
        const double t = static_cast<double>(k) * ts;
        SimRow row;
        row.t = t;
        row.y_sp = sc.setpoint.at(t);
        row.y_d = ctrl.yd_prev;

        double y_plant = 0.0;
        if (sc.plant_mode == PlantMode::lti) {
            y_plant = lti.y_offset() + (lti.c * lti_state)(0);
            const ReactorState& s = lti.op.state_s;
            row.x = s.x + (lti_state.size() == kNumStates ? lti_state(kConversion) : 0.0);
            row.i_conc = s.i_conc + (lti_state.size() == kNumStates ? lti_state(kInitiator) : 0.0);
            row.t_jacket = s.t_jacket - kCelsiusOffset + (lti_state.size() == kNumStates ? lti_state(kJacketTemp) : 0.0);
        } else {
            y_plant = plant.t_reactor - kCelsiusOffset;
            row.x = plant.x;
            row.i_conc = plant.i_conc;
            row.t_jacket = plant.t_jacket - kCelsiusOffset;
        }

        const double dist = sc.disturbance.at(t);
        row.t_true = y_plant + (sc.disturbance.channel == DisturbanceChannel::process ? dist : 0.0);
        row.t_meas = row.t_true + (sc.disturbance.channel == DisturbanceChannel::measurement ? dist : 0.0);
        if (sc.noise.enabled && sc.noise.std_dev > 0.0)
            row.t_meas += sc.noise.std_dev * normal(rng);

        try {
            const std::size_t next = active_model(schedule, t);
            if (next != active) {
                ctrl = switch_model(ctrl, bank[active], bank[next], row.t_meas, ctrl.u_prev, sc.handoff, horizon);
                active = next;
            }
            row.active_model = active;

            const std::vector<double> sp = detail::future_setpoints(sc.setpoint, t, ts, horizon);
            const ControlDiagnostics d = control_step(ctrl, row.t_meas, sp, gains[active], bank[active], sc.dmc);
            row.u = d.u;
            row.du = d.du;
            row.saturated = d.saturated;

            if (k < samples) {
                if (sc.plant_mode == PlantMode::lti)
                    lti_state = lti.disc.phi * lti_state + lti.disc.gamma * (d.u - lti.u_offset());
                else
                    plant = advance_sample(plant, d.u, sc.plant, sc.integrator).state;
            }
        } catch (const NumericError& e) {
            throw NumericError("sample " + std::to_string(k) + " (t = " + std::to_string(t) + " s): " + e.what());
        }
        result.rows.push_back(row);
    }
    result.metrics = compute_metrics(result.rows, sc.metric_vs_raw_setpoint);
    return result;
}

/// Per-sample nominal power the bank is linearized along.
inline std::vector<double> nominal_power_profile(const ScenarioConfig& sc)
{
    sc.validate();
    const std::size_t samples = sc.num_samples();
    if (sc.bank_source == BankSource::constant_power)
        return std::vector<double>(samples, sc.warmup_power);

    // single model at the initial state, no noise, no disturbance
    ScenarioConfig pre = sc;
    pre.noise.enabled = false;
    pre.disturbance.enabled = false;
    pre.plant_mode = PlantMode::nonlinear;
    const OperatingPoint op{sc.initial_state, sc.warmup_power, 0.0};
    const std::vector<LinearModel> single{linear_model_at(op, sc.plant, sc.dmc.ts, sc.bank.step_samples,
                                                          sc.bank.settle_cap)};
    const SimResult run = run_closed_loop(pre, single, schedule_from_bank(single));
    std::vector<double> profile;
    profile.reserve(samples);
    for (std::size_t k = 0; k < samples; ++k)
        profile.push_back(run.rows[k].u);
    return profile;
}

/// Model bank for the scenario along its nominal power profile.
inline std::vector<LinearModel> build_scenario_bank(const ScenarioConfig& sc)
{
    const std::vector<double> profile = nominal_power_profile(sc);
    return build_model_bank(sc.initial_state, profile, sc.breakpoints, sc.plant, sc.integrator, sc.bank);
}

/// Full scenario: bank, time schedule at the breakpoints, closed loop.
inline SimResult run_closed_loop(const ScenarioConfig& sc)
{
    const std::vector<LinearModel> bank = build_scenario_bank(sc);
    return run_closed_loop(sc, bank, schedule_from_bank(bank));
}

} // namespace batchdmc
