#include "support.hpp"

#include <batchdmc/harness.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

using namespace batchdmc;

namespace {

std::vector<SimRow> rows_with_errors(std::initializer_list<double> errors)
{
    std::vector<SimRow> rows;
    for (const double e : errors) {
        SimRow r;
        r.y_d = 70.0;
        r.y_sp = 71.0;
        r.t_true = 70.0 + e;
        rows.push_back(r);
    }
    return rows;
}

bool same_rows(const std::vector<SimRow>& a, const std::vector<SimRow>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double va[] = {a[k].t, a[k].y_sp, a[k].y_d, a[k].t_true, a[k].t_meas, a[k].t_jacket, a[k].x, a[k].i_conc, a[k].u, a[k].du};
        const double vb[] = {b[k].t, b[k].y_sp, b[k].y_d, b[k].t_true, b[k].t_meas, b[k].t_jacket, b[k].x, b[k].i_conc, b[k].u, b[k].du};
        if (std::memcmp(va, vb, sizeof va) != 0 || a[k].active_model != b[k].active_model ||
            a[k].saturated != b[k].saturated)
            return false;
    }
    return true;
}

} // namespace

TEST(Metrics, HandComputedValues)
{
    Metrics m = compute_metrics(rows_with_errors({0.0, 0.0, 0.0}));
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.max_err, 0.0);

    m = compute_metrics(rows_with_errors({1.0, 1.0}));
    EXPECT_DOUBLE_EQ(m.mae, 1.0);
    EXPECT_DOUBLE_EQ(m.max_err, 1.0);

    m = compute_metrics(rows_with_errors({0.0, 1.0, -1.0, 2.0}));
    EXPECT_DOUBLE_EQ(m.mae, 1.0);
    EXPECT_DOUBLE_EQ(m.max_err, 2.0);
    EXPECT_DOUBLE_EQ(m.final_err, 2.0);

    // against the raw set point instead
    m = compute_metrics(rows_with_errors({1.0, 1.0}), true);
    EXPECT_DOUBLE_EQ(m.mae, 0.0);

    EXPECT_THROW(compute_metrics(std::vector<SimRow>{}), RangeError);
}

TEST(Setpoint, PiecewiseLinear)
{
    const SetpointProfile sp{{{0.0, 70.0}, {100.0, 70.0}, {200.0, 80.0}}};
    EXPECT_EQ(sp.at(-5.0), 70.0);
    EXPECT_EQ(sp.at(50.0), 70.0);
    EXPECT_DOUBLE_EQ(sp.at(150.0), 75.0);
    EXPECT_EQ(sp.at(1e4), 80.0);
    EXPECT_THROW((SetpointProfile{{{0.0, 1.0}, {0.0, 2.0}}}.validate()), InvalidParameter);
}

TEST(ClosedLoop, NominalTracking)
{
    const ScenarioConfig sc = testing_support::nominal_config().scenario;
    const SimResult r = run_closed_loop(sc);
    EXPECT_EQ(r.rows.size(), sc.num_samples() + 1);
    EXPECT_LE(r.metrics.mae, 0.5);
    EXPECT_GE(r.metrics.mae, 0.0);
    for (std::size_t k = 1; k < r.rows.size(); ++k)
        EXPECT_GE(r.rows[k].active_model, r.rows[k - 1].active_model);
}

TEST(ClosedLoop, DeterministicWithoutNoiseRegardlessOfSeed)
{
    ScenarioConfig sc = testing_support::nominal_config().scenario;
    sc.noise.enabled = false;
    sc.noise.seed = 1;
    const SimResult a = run_closed_loop(sc);
    sc.noise.seed = 99;
    const SimResult b = run_closed_loop(sc);
    EXPECT_TRUE(same_rows(a.rows, b.rows));
}

TEST(ClosedLoop, SeededNoise)
{
    ScenarioConfig sc = testing_support::disturbed_config().scenario;
    ASSERT_TRUE(sc.noise.enabled);
    const SimResult a = run_closed_loop(sc);
    const SimResult b = run_closed_loop(sc);
    EXPECT_TRUE(same_rows(a.rows, b.rows));

    sc.noise.seed += 1;
    const SimResult c = run_closed_loop(sc);
    ASSERT_EQ(a.rows.size(), c.rows.size());
    bool meas_differs = false;
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
        EXPECT_EQ(a.rows[k].t, c.rows[k].t);
        EXPECT_EQ(a.rows[k].y_sp, c.rows[k].y_sp);
        meas_differs = meas_differs || a.rows[k].t_meas != c.rows[k].t_meas;
    }
    EXPECT_TRUE(meas_differs);
}

TEST(ClosedLoop, DisturbedScenario)
{
    const SimResult r = run_closed_loop(testing_support::disturbed_config().scenario);
    EXPECT_LE(r.metrics.mae, 0.7);
}

TEST(ClosedLoop, RejectsOutputStep)
{
    ScenarioConfig sc = testing_support::disturbed_config().scenario;
    sc.noise.enabled = false;
    ASSERT_TRUE(sc.disturbance.enabled);
    const SimResult r = run_closed_loop(sc);
    const auto step = static_cast<std::size_t>(std::llround(sc.disturbance.time / sc.dmc.ts));
    EXPECT_GT(std::abs(r.rows[step].t_true - r.rows[step].y_d), 1.0);
    for (std::size_t k = step + 30; k < r.rows.size(); ++k)
        EXPECT_LT(std::abs(r.rows[k].t_true - r.rows[k].y_d), 0.5) << k;
}

TEST(ClosedLoop, MeasurementChannelDisturbance)
{
    ScenarioConfig sc = testing_support::disturbed_config().scenario;
    sc.noise.enabled = false;
    sc.disturbance.channel = DisturbanceChannel::measurement;
    const SimResult r = run_closed_loop(sc);
    const auto step = static_cast<std::size_t>(std::llround(sc.disturbance.time / sc.dmc.ts));
    EXPECT_NEAR(r.rows[step].t_meas - r.rows[step].t_true, sc.disturbance.magnitude, 1e-12);
    EXPECT_EQ(r.rows[step - 1].t_meas, r.rows[step - 1].t_true);

    // the loop drives the measurement back, so the true output ends up off by the step
    sc.disturbance.enabled = false;
    const SimResult clean = run_closed_loop(sc);
    EXPECT_NEAR(r.rows.back().t_true - clean.rows.back().t_true, -sc.disturbance.magnitude, 0.1);
}

TEST(ClosedLoop, ExactLinearPlantConverges)
{
    ScenarioConfig sc = testing_support::nominal_config().scenario;
    const std::vector<LinearModel> bank = build_scenario_bank(sc);
    const std::vector<LinearModel> one{bank.front()};
    sc.plant_mode = PlantMode::lti;
    sc.warmup_power = one[0].u_offset();
    const double target = one[0].y_offset() + 1.5;
    sc.setpoint.knots = {{0.0, target}};
    sc.duration = 3000.0;
    const SimResult r = run_closed_loop(sc, one, Schedule{{{0.0, 0}}});
    EXPECT_LT(std::abs(r.rows.back().t_true - target), 1e-6);
    double tail = 0.0;
    for (std::size_t k = r.rows.size() - 50; k < r.rows.size(); ++k)
        tail = std::max(tail, std::abs(r.rows[k].t_true - r.rows[k].y_d));
    EXPECT_LT(tail, 1e-6);
}

TEST(ClosedLoop, ZeroInputCoolsMonotonically)
{
    ScenarioConfig sc = testing_support::nominal_config().scenario;
    sc.initial_state.i_conc = 0.0;
    sc.dmc.u_min = 0.0;
    sc.dmc.u_max = 0.0;
    sc.warmup_power = 0.0;
    sc.bank_source = BankSource::constant_power;
    const SimResult r = run_closed_loop(sc);
    for (std::size_t k = 0; k < r.rows.size(); ++k) {
        EXPECT_EQ(r.rows[k].u, 0.0);
        EXPECT_GT(r.rows[k].t_true, sc.plant.t_amb - kCelsiusOffset);
        if (k > 0)
            EXPECT_LT(r.rows[k].t_true, r.rows[k - 1].t_true);
    }
}

TEST(Scenario, Validation)
{
    ScenarioConfig sc = testing_support::nominal_config().scenario;
    EXPECT_NO_THROW(sc.validate());
    ScenarioConfig bad = sc;
    bad.integrator.dt = 2.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = sc;
    bad.duration = 7205.0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = sc;
    bad.noise = {true, -0.1, 1};
    EXPECT_THROW(bad.validate(), InvalidParameter);
    bad = sc;
    bad.breakpoints.clear();
    EXPECT_THROW(bad.validate(), InvalidParameter);
}
