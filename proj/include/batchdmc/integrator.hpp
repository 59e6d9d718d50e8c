/// @file integrator.hpp
/// Fixed-step classical Runge-Kutta integration of the reactor with a
/// zero-order hold on heater power.

#pragma once

#include <batchdmc/errors.hpp>
#include <batchdmc/kinetics.hpp>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace batchdmc {

struct IntegratorConfig {
    double dt = 1.0;              ///< inner step, s
    int substeps_per_sample = 10;  ///< dt * substeps = controller sampling period

    double sample_period() const { return dt * substeps_per_sample; }

    void validate() const
    {
        detail::require(dt > 0.0 && std::isfinite(dt), "integrator dt must be positive");
        detail::require(substeps_per_sample >= 1, "substeps_per_sample must be >= 1");
    }
};

/// One RK4 step of dy/dt = f(y) for any vector-like y supporting +, scalar *.
template <class Vec, class F>
Vec rk4_advance(F&& f, const Vec& y, double dt)
{
    const Vec k1 = f(y);
    const Vec k2 = f(Vec(y + (0.5 * dt) * k1));
    const Vec k3 = f(Vec(y + (0.5 * dt) * k2));
    const Vec k4 = f(Vec(y + dt * k3));
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct StepResult {
    ReactorState state;
    bool clamped = false;  ///< x or [I] was pulled back into its physical range
};

/// RK4 step for the reactor. `deriv(state_vector, power)` returns the state
/// derivative. Conversion is clamped into [0, 1] and initiator into [0, inf)
/// after the step.
template <class Deriv>
StepResult rk4_step(Deriv&& deriv, const ReactorState& state, double power, double dt)
{
    detail::require(dt > 0.0, "step size must be positive");
    auto f = [&](const StateVector& y) -> StateVector {
        StateVector d = deriv(y, power);
        if (!d.allFinite())
            throw NumericError("non-finite derivative at state (x=" + std::to_string(y[0]) + ", I=" +
                               std::to_string(y[1]) + ", T=" + std::to_string(y[2]) + ", Tj=" +
                               std::to_string(y[3]) + ")");
        return d;
    };
    StateVector y = rk4_advance(f, state.to_vector(), dt);

    StepResult out;
    if (y[kConversion] < 0.0 || y[kConversion] > 1.0) {
        y[kConversion] = std::clamp(y[kConversion], 0.0, 1.0);
        out.clamped = true;
    }
    if (y[kInitiator] < 0.0) {
        y[kInitiator] = 0.0;
        out.clamped = true;
    }
    out.state = ReactorState::from_vector(y);
    return out;
}

/// RK4 step of the plant model itself.
inline StepResult rk4_step(const ReactorState& state, double power, double dt, const PlantParams& params)
{
    return rk4_step([&](const StateVector& y, double u) { return detail::rhs(y, u, params); }, state, power, dt);
}

/// Advances the plant over one sampling period with the power held constant.
inline StepResult advance_sample(const ReactorState& state, double power, const PlantParams& params,
                                 const IntegratorConfig& cfg)
{
    StepResult acc{state, false};
    for (int i = 0; i < cfg.substeps_per_sample; ++i) {
        const StepResult r = rk4_step(acc.state, power, cfg.dt, params);
        acc.state = r.state;
        acc.clamped = acc.clamped || r.clamped;
    }
    return acc;
}

struct OpenLoopResult {
    std::vector<ReactorState> states;  ///< one per sample boundary, states[0] = initial state
    std::vector<bool> clamped;         ///< per sample interval
    double sample_period = 0.0;
};

/// Open-loop run under a per-sample power profile (zero-order hold).
inline OpenLoopResult simulate_open_loop(const ReactorState& state0, std::span<const double> power_profile,
                                         const PlantParams& params, const IntegratorConfig& cfg)
{
    cfg.validate();
    params.validate();
    validate(state0);
    detail::require(!power_profile.empty(), "power profile must not be empty");
    for (const double p : power_profile)
        detail::require(p >= 0.0 && p <= params.p_max, "power profile entries must lie in [0, p_max]");

    OpenLoopResult out;
    out.sample_period = cfg.sample_period();
    out.states.reserve(power_profile.size() + 1);
    out.clamped.reserve(power_profile.size());
    out.states.push_back(state0);
    for (std::size_t k = 0; k < power_profile.size(); ++k) {
        try {
            const StepResult r = advance_sample(out.states.back(), power_profile[k], params, cfg);
            out.states.push_back(r.state);
            out.clamped.push_back(r.clamped);
        } catch (const NumericError& e) {
            throw NumericError("sample " + std::to_string(k) + ": " + e.what());
        }
    }
    return out;
}

} // namespace batchdmc
