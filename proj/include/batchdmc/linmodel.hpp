/// @file linmodel.hpp
/// Local linear models of the reactor along a batch trajectory.
///
/// Each model is the Jacobian of the plant at an operating point, with the
/// reactor temperature as output and per-heater power as input, together with
/// its transfer function, zero-order-hold discretization and sampled step
/// response. Deviation variables are measured from the operating point.

#pragma once

#include <batchdmc/errors.hpp>
#include <batchdmc/integrator.hpp>
#include <batchdmc/kinetics.hpp>
#include <batchdmc/linalg.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace batchdmc {

struct OperatingPoint {
    ReactorState state_s;
    double power_s = 0.0;  ///< W per heater
    double time_s = 0.0;   ///< s into the batch
};

struct Linearization {
    Eigen::MatrixXd a;  ///< 4x4, 1/s
    Eigen::VectorXd b;  ///< 4x1, state units per W s
};

struct TransferFunction {
    std::vector<double> num;  ///< highest power first, size n
    std::vector<double> den;  ///< highest power first, size n+1, den[0] = 1
};

struct StepResponse {
    std::vector<double> g;          ///< g[k-1] = response k samples after a unit step
    std::optional<double> dc_gain;  ///< empty for integrating models
    bool integrating = false;
    int n_settle = 0;
};

/// Reactor temperature selector.
inline Eigen::RowVectorXd temperature_output()
{
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(kNumStates);
    c(kReactorTemp) = 1.0;
    return c;
}

namespace detail {

inline constexpr double kFdRelStep = 1e-6;
inline constexpr double kFdMinStep = 1e-9;

// Central difference with the step rounded to what the arguments actually
// represent; one-sided when the lower point would leave [lower_bound, inf).
template <class F>
StateVector fd_column(F&& f, double value, double lower_bound, double rel_step)
{
    const double h = std::max(rel_step * std::abs(value), kFdMinStep * rel_step / kFdRelStep);
    volatile double plus = value + h;
    volatile double minus = value - h;
    if (minus < lower_bound)
        minus = value;
    const double denom = plus - minus;
    return (f(double(plus)) - f(double(minus))) / denom;
}

} // namespace detail

/// Jacobian of the plant derivative at an operating point by central finite
/// differences. The perturbation of each state is max(1e-6 |s|, 1e-9); at
/// [I] = 0 the initiator column falls back to a forward difference.
/// `rel_step` scales both bounds (used for step-halving checks).
inline Linearization linearize(const OperatingPoint& op, const PlantParams& params,
                               double rel_step = detail::kFdRelStep)
{
    validate(op.state_s);
    params.validate();
    detail::require(op.power_s >= 0.0 && op.power_s <= params.p_max, "operating power must lie in [0, p_max]");

    const StateVector s = op.state_s.to_vector();
    Linearization lin{Eigen::MatrixXd::Zero(kNumStates, kNumStates), Eigen::VectorXd::Zero(kNumStates)};
    static const char* names[] = {"x", "I", "T", "Tj"};
    const double lower[] = {-1.0, 0.0, 0.0, 0.0};

    for (int j = 0; j < kNumStates; ++j) {
        auto f = [&](double v) {
            StateVector p = s;
            p[j] = v;
            return detail::rhs(p, op.power_s, params);
        };
        const StateVector col = detail::fd_column(f, s[j], lower[j], rel_step);
        if (!col.allFinite())
            throw NumericError(std::string("Jacobian column d/d") + names[j] + " is not finite");
        lin.a.col(j) = col;
    }
    auto fp = [&](double u) { return detail::rhs(s, u, params); };
    const StateVector bcol = detail::fd_column(fp, op.power_s, -params.p_max, rel_step);
    if (!bcol.allFinite())
        throw NumericError("Jacobian column d/dP is not finite");
    lin.b = bcol;
    return lin;
}

/// Transfer function c (sI - A)^-1 b.
inline TransferFunction ss_to_tf(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::RowVectorXd& c)
{
    const ResolventPolynomials p = faddeev_leverrier(a, b, c);
    return {p.num, p.den};
}

inline constexpr int kDefaultSettleCap = 2000;
inline constexpr double kSettleTolerance = 1e-4;

/// Step response samples g_1..g_n of (A, b, c) under a zero-order hold, plus
/// dc gain -c A^-1 b when A is invertible. The settling index is the first k
/// with |g_k - dc| < 1e-4 |dc|, capped at `settle_cap`; integrating models
/// record the cap.
inline StepResponse step_response(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::RowVectorXd& c,
                                  double ts, int n, int settle_cap = kDefaultSettleCap)
{
    detail::require(ts > 0.0, "sampling period must be positive");
    detail::require(n >= 1, "need at least one step sample");
    detail::require(settle_cap >= 1, "settle cap must be >= 1");

    const DiscreteModel d = zoh_discretize(a, b, ts);
    StepResponse r;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
        r.dc_gain = -(c * lu.solve(b))(0);
    } else {
        r.integrating = true;
    }

    r.g.reserve(static_cast<std::size_t>(n));
    r.n_settle = settle_cap;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(a.rows());
    const int horizon = r.integrating ? n : std::max(n, settle_cap);
    bool settled = false;
    for (int k = 1; k <= horizon; ++k) {
        x = d.phi * x + d.gamma;
        const double gk = (c * x)(0);
        if (k <= n)
            r.g.push_back(gk);
        if (!settled && r.dc_gain && std::abs(gk - *r.dc_gain) < kSettleTolerance * std::abs(*r.dc_gain)) {
            r.n_settle = k;
            settled = true;
            if (k >= n)
                break;
        }
    }
    return r;
}

struct LinearModel {
    OperatingPoint op;
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::RowVectorXd c;
    TransferFunction tf;
    StepResponse step;
    DiscreteModel disc;
    double max_real_eig = 0.0;
    bool dissipative = true;  ///< every eigenvalue has real part <= 1e-9

    double y_offset() const { return op.state_s.t_reactor - kCelsiusOffset; }  ///< degC
    double u_offset() const { return op.power_s; }
};

inline constexpr double kDissipativeTolerance = 1e-9;

/// Assembles a model from an explicit (A, b, c) realization. Works for any
/// state dimension; the reactor models are 4x4.
inline LinearModel make_linear_model(const OperatingPoint& op, Eigen::MatrixXd a, Eigen::VectorXd b,
                                     Eigen::RowVectorXd c, double ts, int n_samples,
                                     int settle_cap = kDefaultSettleCap)
{
    detail::require(a.rows() == a.cols() && b.size() == a.rows() && c.size() == a.rows(),
                    "model dimension mismatch");
    LinearModel m;
    m.op = op;
    m.tf = ss_to_tf(a, b, c);
    m.step = step_response(a, b, c, ts, n_samples, settle_cap);
    m.disc = zoh_discretize(a, b, ts);
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues();
    m.max_real_eig = eig.real().maxCoeff();
    m.dissipative = m.max_real_eig <= kDissipativeTolerance;
    m.a = std::move(a);
    m.b = std::move(b);
    m.c = std::move(c);
    return m;
}

/// Linearizes the plant at `op` and builds the full model.
inline LinearModel linear_model_at(const OperatingPoint& op, const PlantParams& params, double ts, int n_samples,
                                   int settle_cap = kDefaultSettleCap)
{
    Linearization lin = linearize(op, params);
    return make_linear_model(op, std::move(lin.a), std::move(lin.b), temperature_output(), ts, n_samples, settle_cap);
}

struct BankOptions {
    int step_samples = 100;
    int settle_cap = kDefaultSettleCap;
};

/// One linear model per breakpoint, linearized along the open-loop run of
/// `power_profile` from `state0`. Breakpoints must fall on sample boundaries,
/// be strictly increasing and lie within the simulated horizon.
inline std::vector<LinearModel> build_model_bank(const ReactorState& state0, std::span<const double> power_profile,
                                                 std::span<const double> breakpoints, const PlantParams& params,
                                                 const IntegratorConfig& cfg, const BankOptions& opts = {})
{
    detail::require(!breakpoints.empty(), "at least one breakpoint is required");
    const double ts = cfg.sample_period();
    const double horizon = ts * static_cast<double>(power_profile.size());

    std::vector<std::size_t> index;
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        const double t = breakpoints[i];
        detail::require(t >= 0.0, "breakpoints must be non-negative");
        if (i > 0)
            detail::require(t > breakpoints[i - 1], "breakpoints must be strictly increasing");
        if (t > horizon + 1e-9 * ts)
            throw RangeError("breakpoint " + std::to_string(t) + " s lies beyond the simulated horizon " +
                             std::to_string(horizon) + " s");
        const double k = std::round(t / ts);
        if (std::abs(k * ts - t) > 1e-9 * ts)
            throw ConfigError("breakpoint " + std::to_string(t) + " s is not a multiple of the sampling period");
        index.push_back(static_cast<std::size_t>(k));
    }

    const OpenLoopResult run = simulate_open_loop(state0, power_profile, params, cfg);
    std::vector<LinearModel> bank;
    bank.reserve(breakpoints.size());
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
        const std::size_t k = index[i];
        OperatingPoint op;
        op.state_s = run.states[k];
        op.power_s = power_profile[std::min(k, power_profile.size() - 1)];
        op.time_s = static_cast<double>(k) * ts;
        bank.push_back(linear_model_at(op, params, ts, opts.step_samples, opts.settle_cap));
    }
    return bank;
}

} // namespace batchdmc
