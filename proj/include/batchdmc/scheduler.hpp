/// @file scheduler.hpp
/// Time-scheduled switching between the local models of a bank.

#pragma once

#include <batchdmc/dmc.hpp>
#include <batchdmc/errors.hpp>
#include <batchdmc/linmodel.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace batchdmc {

struct ScheduleEntry {
    double switch_time = 0.0;  ///< s
    std::size_t model_index = 0;
};

struct Schedule {
    std::vector<ScheduleEntry> entries;

    void validate(std::size_t bank_size) const
    {
        if (entries.empty())
            throw ConfigError("schedule is empty");
        if (entries.front().switch_time != 0.0)
            throw ConfigError("first schedule entry must start at t = 0");
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].model_index >= bank_size)
                throw ConfigError("schedule entry " + std::to_string(i) + " refers to model " +
                                  std::to_string(entries[i].model_index) + " outside the bank");
            if (i > 0 && !(entries[i].switch_time > entries[i - 1].switch_time))
                throw ConfigError("schedule switch times must be strictly increasing");
        }
    }
};

/// One entry per bank model at its linearization time; the first entry is
/// moved to t = 0.
inline Schedule schedule_from_bank(const std::vector<LinearModel>& bank)
{
    Schedule s;
    for (std::size_t i = 0; i < bank.size(); ++i)
        s.entries.push_back({i == 0 ? 0.0 : bank[i].op.time_s, i});
    return s;
}

/// Index of the last entry with switch_time <= t.
inline std::size_t active_model(const Schedule& schedule, double t)
{
    if (schedule.entries.empty())
        throw ConfigError("schedule is empty");
    detail::require(t >= 0.0, "time must be non-negative");
    const auto it = std::upper_bound(schedule.entries.begin(), schedule.entries.end(), t,
                                     [](double v, const ScheduleEntry& e) { return v < e.switch_time; });
    if (it == schedule.entries.begin())
        return schedule.entries.front().model_index;
    return std::prev(it)->model_index;
}

enum class Handoff {
    output_only,    ///< output state takes the old prediction, other states zero
    free_response,  ///< additionally match the old free response over a horizon
};

/// Hands the controller over from `old_model` to `new_model` so that the
/// predicted output is unchanged and the applied input carries over.
///
/// With Handoff::output_only the new state is the minimum-norm state whose
/// output equals the old prediction. With Handoff::free_response the component
/// orthogonal to the output direction is chosen (minimum-norm least squares)
/// so that the new model's free response over `match_steps` samples follows
/// the old one. Switching to an identical model leaves the state untouched.
inline ControllerState switch_model(const ControllerState& ctrl, const LinearModel& old_model,
                                    const LinearModel& new_model, double y_meas, double u_prev,
                                    Handoff mode = Handoff::output_only, int match_steps = 0)
{
    if (std::abs(old_model.disc.ts - new_model.disc.ts) > 1e-9 * old_model.disc.ts)
        throw ConfigError("models in a switch must share the sampling period");
    detail::require(mode == Handoff::output_only || match_steps >= 1, "free-response handoff needs match_steps >= 1");

    ControllerState next = ctrl;
    next.u_prev = u_prev;
    const bool same = old_model.a.rows() == new_model.a.rows() && old_model.disc.phi == new_model.disc.phi &&
                      old_model.disc.gamma == new_model.disc.gamma && old_model.c == new_model.c &&
                      old_model.y_offset() == new_model.y_offset() && old_model.u_offset() == new_model.u_offset();
    if (!same) {
        const double y_pred = model_output(ctrl, old_model);
        const Eigen::Index n = new_model.a.rows();
        const Eigen::RowVectorXd& c = new_model.c;
        const double cc = c.squaredNorm();
        Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
        if (cc > 0.0)
            z = c.transpose() * ((y_pred - new_model.y_offset()) / cc);

        if (mode == Handoff::free_response && cc > 0.0 && n > 1) {
            ControllerState held = ctrl;
            held.u_prev = u_prev;
            const std::vector<double> target = predict_free_response(held, old_model, match_steps);
            held.model_state = z;
            const std::vector<double> base = predict_free_response(held, new_model, match_steps);

            // orthonormal basis of the null space of c
            const Eigen::HouseholderQR<Eigen::MatrixXd> qr(c.transpose());
            const Eigen::MatrixXd basis = Eigen::MatrixXd(qr.householderQ()).rightCols(n - 1);

            Eigen::MatrixXd obs(match_steps, n - 1);
            Eigen::VectorXd resid(match_steps);
            Eigen::MatrixXd phi_k = Eigen::MatrixXd::Identity(n, n);
            for (int k = 0; k < match_steps; ++k) {
                phi_k = new_model.disc.phi * phi_k;
                obs.row(k) = c * phi_k * basis;
                resid(k) = target[static_cast<std::size_t>(k)] - base[static_cast<std::size_t>(k)];
            }
            const Eigen::VectorXd w = obs.completeOrthogonalDecomposition().solve(resid);
            if (w.allFinite())
                z += basis * w;
        }
        next.model_state = z;
    }
    next.d_est = y_meas - model_output(next, new_model);
    return next;
}

} // namespace batchdmc
