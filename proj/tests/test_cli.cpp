#include "support.hpp"

#include <batchdmc/cli.hpp>
#include <batchdmc/config.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace batchdmc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir()
{
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    const fs::path dir = fs::temp_directory_path() / "batchdmc_tests" /
                         (std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream os(p, std::ios::binary);
    os << text;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);)
        out.push_back(line);
    return out;
}

std::string params_path() { return (testing_support::source_dir() / "params" / "default.yaml").string(); }

std::string small_config(const std::string& scenario_extra = "", const std::string& plant_extra = "")
{
    return "plant:\n  include: " + params_path() + "\n" + plant_extra +
           "dmc:\n  pred_horizon: 5\n  ctrl_horizon: 2\n  q: 1.0\n  r: 0.05\n  alpha_filter: 0.05\n"
           "  input_scale: 1000\n  ts: 10.0\n  u_min: 0.0\n  u_max: 1500.0\n"
           "schedule:\n  breakpoints: [0]\n  source: constant_power\n  warmup_power: 200.0\n"
           "scenario:\n  duration: 600\n"
           "  initial_state: {x: 0.0, i_conc: 0.03, t_reactor: 343.15, t_jacket: 342.7}\n"
           "  setpoint: [[0, 70.0]]\n" +
           scenario_extra;
}

struct Invocation {
    int code = 0;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "batchdmc");
    std::vector<const char*> argv;
    for (const std::string& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

} // namespace

TEST(Config, ShippedConfigsLoad)
{
    const RunConfig nominal = testing_support::nominal_config();
    EXPECT_NO_THROW(nominal.scenario.validate());
    EXPECT_EQ(nominal.scenario.num_samples(), 720u);
    EXPECT_EQ(nominal.scenario.bank_source, BankSource::prerun);
    EXPECT_EQ(nominal.scenario.breakpoints.size(), 7u);

    const RunConfig disturbed = testing_support::disturbed_config();
    EXPECT_TRUE(disturbed.scenario.noise.enabled);
    EXPECT_TRUE(disturbed.scenario.disturbance.enabled);
    EXPECT_EQ(disturbed.scenario.disturbance.channel, DisturbanceChannel::process);
}

TEST(Config, MissingPlantFieldIsNamed)
{
    const fs::path dir = scratch_dir();
    std::string params = slurp(params_path());
    const auto pos = params.find("\nua_r:");
    ASSERT_NE(pos, std::string::npos);
    params.erase(pos + 1, params.find('\n', pos + 1) - pos);
    write_file(dir / "params.yaml", params);
    std::string cfg = small_config();
    cfg.replace(cfg.find(params_path()), params_path().size(), "params.yaml");
    write_file(dir / "cfg.yaml", cfg);

    try {
        load_run_config(dir / "cfg.yaml");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("ua_r"), std::string::npos) << e.what();
    }

    const Invocation r = invoke({"validate-config", "--config", (dir / "cfg.yaml").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("ua_r"), std::string::npos) << r.err;
}

TEST(Config, InlineKeysOverrideInclude)
{
    const fs::path dir = scratch_dir();
    write_file(dir / "cfg.yaml", small_config("", "  ua_r: 12.5\n"));
    EXPECT_EQ(load_run_config(dir / "cfg.yaml").scenario.plant.ua_r, 12.5);
}

TEST(Config, BadEnumsAndHandoff)
{
    const fs::path dir = scratch_dir();
    write_file(dir / "a.yaml", small_config("  noise: {type: uniform}\n"));
    EXPECT_THROW(load_run_config(dir / "a.yaml"), ConfigError);
    write_file(dir / "b.yaml", small_config("  disturbance: {type: ramp}\n"));
    EXPECT_THROW(load_run_config(dir / "b.yaml"), ConfigError);
    EXPECT_THROW(load_run_config(dir / "missing.yaml"), ConfigError);
    EXPECT_EQ(load_run_config(testing_support::source_dir() / "configs" / "nominal.yaml").scenario.handoff,
              Handoff::free_response);
}

TEST(Config, VolumeWarning)
{
    const fs::path dir = scratch_dir();
    write_file(dir / "cfg.yaml", small_config("", "  v0: 2.0\n"));
    const RunConfig rc = load_run_config(dir / "cfg.yaml");
    ASSERT_EQ(rc.warnings.size(), 1u);
    EXPECT_NE(rc.warnings[0].find("v0"), std::string::npos);

    const Invocation r = invoke({"validate-config", "--config", (dir / "cfg.yaml").string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("warning:"), std::string::npos);
    EXPECT_NE(r.out.find("config ok"), std::string::npos);
}

TEST(Cli, ZeroPowerAtAmbientStaysPut)
{
    const fs::path dir = scratch_dir();
    std::string cfg = small_config("  open_loop_power: 0.0\n");
    const std::string init = "{x: 0.0, i_conc: 0.03, t_reactor: 343.15, t_jacket: 342.7}";
    cfg.replace(cfg.find(init), init.size(), "{x: 0.0, i_conc: 0.0, t_reactor: 298.15, t_jacket: 298.15}");
    write_file(dir / "cfg.yaml", cfg);

    const Invocation r = invoke({"simulate", "--config", (dir / "cfg.yaml").string(), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::vector<std::string> lines = lines_of(slurp(dir / "open_loop.csv"));
    ASSERT_EQ(lines.size(), 62u);
    EXPECT_EQ(lines[0], "t,power,x,i_conc,t_reactor,t_jacket,clamped");
    for (std::size_t k = 1; k < lines.size(); ++k)
        EXPECT_EQ(lines[k].substr(lines[k].find(',')), lines[1].substr(lines[1].find(','))) << lines[k];
    EXPECT_NE(lines[1].find(",25,25,"), std::string::npos) << lines[1];
}

TEST(Cli, NominalSimulateRowCount)
{
    const fs::path dir = scratch_dir();
    const std::string cfg = (testing_support::source_dir() / "configs" / "nominal.yaml").string();
    const Invocation r = invoke({"simulate", "--config", cfg, "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines_of(slurp(dir / "open_loop.csv")).size(), 722u);
    EXPECT_NE(slurp(dir / "manifest.txt").find("command: simulate"), std::string::npos);
}

TEST(Cli, LinearizeBlockCounts)
{
    const fs::path dir = scratch_dir();
    write_file(dir / "one.yaml", small_config());
    std::string three = small_config();
    three.replace(three.find("breakpoints: [0]"), 16, "breakpoints: [0, 200, 400]");
    write_file(dir / "three.yaml", three);

    for (const auto& [name, count] : {std::pair{"one", 1}, std::pair{"three", 3}}) {
        const fs::path out = dir / name;
        const Invocation r =
            invoke({"linearize", "--config", (dir / (std::string(name) + ".yaml")).string(), "--out", out.string()});
        ASSERT_EQ(r.code, 0) << r.err;
        const std::vector<std::string> lines = lines_of(slurp(out / "model_bank.txt"));
        ASSERT_FALSE(lines.empty());
        EXPECT_EQ(lines[0], "models " + std::to_string(count));
        int blocks = 0;
        for (const std::string& l : lines) {
            if (l.rfind("model ", 0) == 0) {
                EXPECT_EQ(l, "model " + std::to_string(blocks));
                ++blocks;
            }
        }
        EXPECT_EQ(blocks, count);
        EXPECT_EQ(lines.back(), "end");
    }

    const Invocation s = invoke({"step-response", "--config", (dir / "three.yaml").string(), "--out", dir.string()});
    ASSERT_EQ(s.code, 0) << s.err;
    EXPECT_EQ(lines_of(slurp(dir / "step_response.csv")).front(), "k,t,model_0,model_1,model_2");
}

TEST(Cli, RerunsAreByteIdentical)
{
    const fs::path dir = scratch_dir();
    const std::string cfg = (testing_support::source_dir() / "configs" / "disturbed.yaml").string();
    for (const char* sub : {"a", "b"}) {
        const Invocation r = invoke({"run", "--config", cfg, "--out", (dir / sub).string(), "--seed", "7"});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_NE(r.out.find("mae: "), std::string::npos);
    }
    EXPECT_EQ(slurp(dir / "a" / "closed_loop.csv"), slurp(dir / "b" / "closed_loop.csv"));
    EXPECT_EQ(slurp(dir / "a" / "metrics.txt"), slurp(dir / "b" / "metrics.txt"));
    EXPECT_NE(slurp(dir / "a" / "manifest.txt").find("seed: 7"), std::string::npos);

    const Invocation other = invoke({"run", "--config", cfg, "--out", (dir / "c").string(), "--seed", "8"});
    ASSERT_EQ(other.code, 0);
    EXPECT_NE(slurp(dir / "a" / "closed_loop.csv"), slurp(dir / "c" / "closed_loop.csv"));

    const Invocation quiet = invoke({"run", "--config", cfg, "--out", (dir / "d").string(), "--no-noise"});
    const Invocation quiet2 =
        invoke({"run", "--config", cfg, "--out", (dir / "e").string(), "--no-noise", "--seed", "123"});
    ASSERT_EQ(quiet.code, 0);
    ASSERT_EQ(quiet2.code, 0);
    EXPECT_EQ(slurp(dir / "d" / "closed_loop.csv"), slurp(dir / "e" / "closed_loop.csv"));
}

TEST(Cli, ClosedLoopCsvLayout)
{
    const fs::path dir = scratch_dir();
    write_file(dir / "cfg.yaml", small_config());
    const Invocation r = invoke({"run", "--config", (dir / "cfg.yaml").string(), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::vector<std::string> lines = lines_of(slurp(dir / "closed_loop.csv"));
    ASSERT_EQ(lines.size(), 62u);
    EXPECT_EQ(lines[0], "t,y_sp,y_d,t_true,t_meas,t_jacket,x,i_conc,u,du,active_model,saturated");
    const std::vector<std::string> metrics = lines_of(slurp(dir / "metrics.txt"));
    ASSERT_FALSE(metrics.empty());
    EXPECT_EQ(metrics[0], "samples: 61");
}

TEST(Cli, NumericBlowUpExitsThree)
{
    const fs::path dir = scratch_dir();
    std::string cfg = "integrator:\n  dt: 5000.0\n  substeps_per_sample: 1\n" + small_config("  open_loop_power: 1500.0\n");
    cfg.replace(cfg.find("ts: 10.0"), 8, "ts: 5000");
    cfg.replace(cfg.find("duration: 600"), 13, "duration: 50000");
    write_file(dir / "cfg.yaml", cfg);
    const Invocation r = invoke({"simulate", "--config", (dir / "cfg.yaml").string(), "--out", dir.string()});
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_NE(r.err.find("numeric"), std::string::npos);
}

TEST(Cli, UsageErrors)
{
    EXPECT_EQ(invoke({"run"}).code, 2);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"frobnicate", "--config", "x"}).code, 2);
    const std::string cfg = (testing_support::source_dir() / "configs" / "nominal.yaml").string();
    const Invocation ok = invoke({"validate-config", "--config", cfg});
    EXPECT_EQ(ok.code, 0);
    EXPECT_NE(ok.out.find("config ok"), std::string::npos);
    EXPECT_EQ(invoke({"--version"}).code, 0);
}

TEST(Cli, NumberFormatting)
{
    EXPECT_EQ(cli::fmt(0.1), "0.1");
    EXPECT_EQ(cli::fmt(25.0), "25");
    EXPECT_EQ(cli::fmt(-1e-300), "-1e-300");
    EXPECT_EQ(std::stod(cli::fmt(1.0 / 3.0)), 1.0 / 3.0);
}
