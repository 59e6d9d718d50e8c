/// @file dmc.hpp
/// Dynamic Matrix Control with a model-based free response.
///
/// The forced part of the prediction uses the step-response (dynamic) matrix
/// built from the first P samples. The free response, the effect of all past
/// moves, is obtained by rolling the internal discrete state-space model
/// forward with the input held, so the law never truncates the step response
/// at a settling length and stays valid for slow or integrating models.

#pragma once

#include <batchdmc/errors.hpp>
#include <batchdmc/linmodel.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace batchdmc {

struct DmcConfig {
    int pred_horizon = 5;  ///< P
    int ctrl_horizon = 2;  ///< M
    int delay = 0;         ///< N1
    std::vector<double> q_weights;  ///< P diagonal entries of Q
    std::vector<double> r_weights;  ///< M diagonal entries of R
    double alpha_filter = 0.0;      ///< reference filter pole
    double ts = 10.0;               ///< s
    double u_min = 0.0;
    double u_max = 0.0;
    std::optional<double> du_max;  ///< per-sample rate bound, W
    /// W per controller input unit; Q and R weigh moves of u / input_scale.
    double input_scale = 1.0;

    /// Q = q I and R = r I with the given horizons.
    static DmcConfig uniform(int p, int m, double q, double r)
    {
        DmcConfig cfg;
        cfg.pred_horizon = p;
        cfg.ctrl_horizon = m;
        cfg.q_weights.assign(static_cast<std::size_t>(p), q);
        cfg.r_weights.assign(static_cast<std::size_t>(m), r);
        return cfg;
    }

    void validate() const
    {
        using detail::require;
        require(ctrl_horizon >= 1 && ctrl_horizon <= pred_horizon, "need 1 <= M <= P");
        require(delay >= 0, "delay N1 must be >= 0");
        require(q_weights.size() == static_cast<std::size_t>(pred_horizon), "q_weights must have P entries");
        require(r_weights.size() == static_cast<std::size_t>(ctrl_horizon), "r_weights must have M entries");
        require(std::all_of(q_weights.begin(), q_weights.end(), [](double q) { return q >= 0.0; }) &&
                    std::any_of(q_weights.begin(), q_weights.end(), [](double q) { return q > 0.0; }),
                "q_weights must be non-negative with at least one positive entry");
        require(std::all_of(r_weights.begin(), r_weights.end(), [](double r) { return r >= 0.0; }),
                "r_weights must be non-negative");
        require(alpha_filter >= 0.0 && alpha_filter < 1.0, "filter pole must lie in [0, 1)");
        require(ts > 0.0, "sampling period must be positive");
        require(u_min <= u_max, "u_min must not exceed u_max");
        require(!du_max || *du_max > 0.0, "du_max must be positive when given");
        require(input_scale > 0.0, "input_scale must be positive");
    }
};

struct DmcGain {
    Eigen::MatrixXd k_mat;   ///< M x P
    Eigen::MatrixXd g_plus;  ///< P x M
};

struct ControllerState {
    Eigen::VectorXd model_state;  ///< deviation state of the active internal model
    double u_prev = 0.0;          ///< last applied input, W
    double yd_prev = 0.0;         ///< filtered reference at the current sample, degC
    double d_est = 0.0;           ///< output disturbance estimate, degC
};

/// Controller at rest on `model`'s operating point.
inline ControllerState initial_controller_state(const LinearModel& model, double u0, double yd0)
{
    ControllerState s;
    s.model_state = Eigen::VectorXd::Zero(model.a.rows());
    s.u_prev = u0;
    s.yd_prev = yd0;
    return s;
}

/// Toeplitz dynamic matrix G+[i][j] = g_{N1 + i - j + 1} (0-based i, j), zero
/// where the index is below one. `g[0]` is the first post-step sample.
inline Eigen::MatrixXd build_dynamic_matrix(std::span<const double> g, int p, int m, int delay)
{
    detail::require(p >= 1 && m >= 1 && m <= p && delay >= 0, "need 1 <= M <= P and N1 >= 0");
    if (g.size() < static_cast<std::size_t>(delay + p))
        throw RangeError("dynamic matrix needs " + std::to_string(delay + p) + " step samples, got " +
                         std::to_string(g.size()));
    Eigen::MatrixXd gp = Eigen::MatrixXd::Zero(p, m);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < m; ++j) {
            const int k = delay + i - j + 1;
            if (k >= 1)
                gp(i, j) = g[static_cast<std::size_t>(k - 1)];
        }
    return gp;
}

/// K = (G'QG + R)^-1 G'Q via Cholesky of the M x M normal matrix.
inline DmcGain compute_gain(const Eigen::MatrixXd& g_plus, std::span<const double> q_weights,
                            std::span<const double> r_weights)
{
    const Eigen::Index p = g_plus.rows();
    const Eigen::Index m = g_plus.cols();
    detail::require(static_cast<Eigen::Index>(q_weights.size()) == p, "q_weights must have P entries");
    detail::require(static_cast<Eigen::Index>(r_weights.size()) == m, "r_weights must have M entries");

    const Eigen::Map<const Eigen::VectorXd> q(q_weights.data(), p);
    const Eigen::Map<const Eigen::VectorXd> r(r_weights.data(), m);
    const Eigen::MatrixXd gtq = g_plus.transpose() * q.asDiagonal();
    Eigen::MatrixXd h = gtq * g_plus;
    h.diagonal() += r;

    const Eigen::LLT<Eigen::MatrixXd> llt(h);
    const double scale = h.diagonal().cwiseAbs().maxCoeff();
    const Eigen::VectorXd pivots = Eigen::MatrixXd(llt.matrixL()).diagonal();
    if (llt.info() != Eigen::Success || !(scale > 0.0) ||
        pivots.cwiseAbs2().minCoeff() <= 1e-13 * scale)
        throw SingularGainError("G+'QG+ + R is not positive definite; use positive move weights R");
    return {llt.solve(gtq), g_plus};
}

/// y_d(t+i) = alpha y_d(t+i-1) + (1 - alpha) y_sp(t+i), i = 1..size, from y_d(t).
inline std::vector<double> reference_trajectory(double yd_prev, std::span<const double> y_sp_future, double alpha)
{
    detail::require(alpha >= 0.0 && alpha < 1.0, "filter pole must lie in [0, 1)");
    std::vector<double> yd;
    yd.reserve(y_sp_future.size());
    double y = yd_prev;
    for (const double sp : y_sp_future) {
        y = alpha * y + (1.0 - alpha) * sp;
        yd.push_back(y);
    }
    return yd;
}

/// Output of the internal model at the current sample, degC.
inline double model_output(const ControllerState& ctrl, const LinearModel& model)
{
    return model.y_offset() + (model.c * ctrl.model_state)(0);
}

/// Predicted outputs for the next `steps` samples with every future move zero.
inline std::vector<double> predict_free_response(const ControllerState& ctrl, const LinearModel& model, int steps)
{
    detail::require(steps >= 1, "prediction length must be >= 1");
    const double du = ctrl.u_prev - model.u_offset();
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(steps));
    Eigen::VectorXd x = ctrl.model_state;
    for (int k = 0; k < steps; ++k) {
        x = model.disc.phi * x + model.disc.gamma * du;
        y.push_back(model.y_offset() + (model.c * x)(0));
    }
    return y;
}

struct ControlDiagnostics {
    double u = 0.0;      ///< applied input
    double du = 0.0;     ///< applied move u - u_prev
    double du_requested = 0.0;
    double yd = 0.0;     ///< filtered reference at t + 1
    double y_model = 0.0;
    double d_est = 0.0;
    bool saturated = false;
};

/// One receding-horizon update. `y_sp_future` holds the set points for
/// t+1 .. t+N1+P. Advances `ctrl` to the next sample.
inline ControlDiagnostics control_step(ControllerState& ctrl, double y_meas, std::span<const double> y_sp_future,
                                       const DmcGain& gain, const LinearModel& model, const DmcConfig& cfg)
{
    if (!std::isfinite(y_meas))
        throw NumericError("non-finite measurement");
    const int p = cfg.pred_horizon;
    const int horizon = cfg.delay + p;
    if (gain.k_mat.rows() != cfg.ctrl_horizon || gain.k_mat.cols() != p)
        throw ConfigError("gain dimensions do not match the configured horizons");
    if (std::abs(model.disc.ts - cfg.ts) > 1e-9 * cfg.ts)
        throw ConfigError("model sampling period does not match the controller");
    if (ctrl.model_state.size() != model.a.rows())
        throw ConfigError("controller state does not match the model order");
    if (static_cast<int>(y_sp_future.size()) < horizon)
        throw RangeError("need N1 + P future set points");

    ControlDiagnostics diag;
    diag.y_model = model_output(ctrl, model);
    ctrl.d_est = y_meas - diag.y_model;
    diag.d_est = ctrl.d_est;

    const std::vector<double> yd = reference_trajectory(ctrl.yd_prev, y_sp_future.first(horizon), cfg.alpha_filter);
    const std::vector<double> free = predict_free_response(ctrl, model, horizon);

    Eigen::VectorXd e(p);
    for (int i = 0; i < p; ++i) {
        const auto k = static_cast<std::size_t>(cfg.delay + i);
        e(i) = yd[k] - (free[k] + ctrl.d_est);
    }
    const Eigen::VectorXd moves = gain.k_mat * e;

    double du = cfg.input_scale * moves(0);
    diag.du_requested = du;
    if (cfg.du_max && std::abs(du) > *cfg.du_max) {
        du = std::copysign(*cfg.du_max, du);
        diag.saturated = true;
    }
    double u = ctrl.u_prev + du;
    if (u > cfg.u_max || u < cfg.u_min) {
        u = std::clamp(u, cfg.u_min, cfg.u_max);
        diag.saturated = true;
    }
    if (!std::isfinite(u))
        throw NumericError("control law produced a non-finite input");

    diag.u = u;
    diag.du = u - ctrl.u_prev;
    diag.yd = yd.front();

    ctrl.model_state = model.disc.phi * ctrl.model_state + model.disc.gamma * (u - model.u_offset());
    ctrl.u_prev = u;
    ctrl.yd_prev = yd.front();
    return diag;
}

/// Gain of the controller for one model, in scaled input units.
inline DmcGain gain_for(const LinearModel& model, const DmcConfig& cfg)
{
    cfg.validate();
    const Eigen::MatrixXd gp =
        cfg.input_scale * build_dynamic_matrix(model.step.g, cfg.pred_horizon, cfg.ctrl_horizon, cfg.delay);
    return compute_gain(gp, cfg.q_weights, cfg.r_weights);
}

} // namespace batchdmc
