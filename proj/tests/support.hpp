#pragma once

#include <batchdmc/config.hpp>
#include <batchdmc/kinetics.hpp>
#include <batchdmc/linmodel.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <string>

namespace testing_support {

inline std::filesystem::path source_dir() { return BATCHDMC_SOURCE_DIR; }

inline batchdmc::PlantParams default_params()
{
    const YAML::Node file = batchdmc::detail::load_yaml_file(source_dir() / "params" / "default.yaml");
    return batchdmc::detail::parse_plant(file["plant"] ? file["plant"] : file);
}

inline batchdmc::RunConfig nominal_config()
{
    return batchdmc::load_run_config(source_dir() / "configs" / "nominal.yaml");
}

inline batchdmc::RunConfig disturbed_config()
{
    return batchdmc::load_run_config(source_dir() / "configs" / "disturbed.yaml");
}

/// Mid-batch state: 40 % conversion at 75 degC.
inline batchdmc::ReactorState mid_batch_state() { return {0.4, 0.02, 348.15, 347.6}; }

inline double rel_err(double a, double b)
{
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// First-order model y' = a y + b u around an operating point at 20 degC / 100 W.
inline batchdmc::LinearModel first_order_model(double a, double b, double ts, int n = 200, int cap = 2000)
{
    Eigen::MatrixXd am(1, 1);
    am(0, 0) = a;
    Eigen::VectorXd bm(1);
    bm(0) = b;
    Eigen::RowVectorXd c(1);
    c(0) = 1.0;
    batchdmc::OperatingPoint op;
    op.state_s = {0.0, 0.0, batchdmc::kCelsiusOffset + 20.0, batchdmc::kCelsiusOffset + 20.0};
    op.power_s = 100.0;
    return batchdmc::make_linear_model(op, am, bm, c, ts, n, cap);
}

} // namespace testing_support
