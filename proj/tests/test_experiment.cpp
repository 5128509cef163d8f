#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "fbsde/experiment.hpp"

using namespace fbsde;
using nlohmann::json;

namespace {

json base_config() {
    json j;
    j["lattice"] = {{"depth", 3}, {"noise", {{"support", {1.0, -1.0}}, {"probs", {0.5, 0.5}}}}};
    j["weight"] = {{"rho", 0.1}, {"horizon", 3}};
    j["model"] = {{"name", "linear"}, {"params", {{"dim", 1}}}};
    j["certificate"] = {{"mu", 1.0}, {"nu", 0.0},         {"M", {{0.0}}},  {"A", {{0.0}}},
                        {"B", {{0.0}}}, {"C", {{0.0}}}, {"case", "case1"}, {"sign", "standard"}};
    j["solver"] = {{"mode", "both"}, {"deltaInit", 0.25}, {"innerTol", 1e-11}, {"maxInnerIters", 200},
                   {"damping", 1.0}};
    j["verify"] = {{"trials", 50}, {"seed", 7}};
    j["output"] = {{"directory", "exp_out/zero"}};
    return j;
}

// A coupled linear model built around a case-1 certificate: the generator
// carries the minus-transpose of the drift/diffusion state gains so the cross
// terms cancel in the discounted pairing.
json coupled_config(double rho) {
    const double kappa = 0.3, beta = 1.0, gamma = 0.5, ab = 0.2, as = 0.1, af = 0.3;
    const double grow = std::exp(rho), disc = std::exp(-rho);
    json j = base_config();
    j["weight"] = {{"rho", rho}, {"horizon", 3}};
    j["model"]["params"] = {
        {"dim", 1},
        {"boundary", {{"gain", {{-1.0}}}, {"offset", {0.4}}}},
        {"drift",
         {{"x", {{ab}}}, {"y", {{-grow * kappa * beta * beta}}}, {"z", {{-grow * kappa * beta * gamma}}},
          {"offset", {0.3}}}},
        {"diffusion",
         {{"x", {{as}}}, {"y", {{-grow * kappa * gamma * beta}}}, {"z", {{-grow * kappa * gamma * gamma}}},
          {"offset", {-0.1}}}},
        {"generator",
         {{"x", {{-af}}}, {"y", {{-disc * ab}}}, {"z", {{-disc * as}}}, {"offset", {-0.2}}}}};
    j["certificate"] = {{"mu", kappa},  {"nu", 0.0},      {"M", {{1.0}}},    {"A", {{0.0}}},
                        {"B", {{beta}}}, {"C", {{gamma}}}, {"case", "case1"}, {"sign", "standard"}};
    j["output"] = {{"directory", "exp_out/coupled"}};
    return j;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config schema validation") {
    json j = base_config();
    CHECK_NOTHROW(ExperimentConfig::from_json(j));

    json no_seed = base_config();
    no_seed["verify"].erase("seed");
    CHECK_THROWS_AS(ExperimentConfig::from_json(no_seed), ConfigError);

    json bad_model = base_config();
    bad_model["model"]["name"] = "nonexistent";
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad_model), ConfigError);

    json bad_mode = base_config();
    bad_mode["solver"]["mode"] = "turbo";
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad_mode), ConfigError);

    json bad_horizon = base_config();
    bad_horizon["weight"]["horizon"] = 9;
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad_horizon), ConfigError);

    json bad_rho = base_config();
    bad_rho["weight"]["rho"] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ExperimentConfig::from_json(bad_rho), ConfigError);
}

TEST_CASE("zero model runs clean end to end") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(base_config());
    RunFlags flags;
    flags.strict = true;
    const RunResult result = run_experiment(cfg, flags);
    CHECK(result.exit_code == 0);
    CHECK(result.summary["verification_failures"] == 0);

    namespace fs = std::filesystem;
    CHECK(fs::exists("exp_out/zero/solution.csv"));
    CHECK(fs::exists("exp_out/zero/verification.csv"));
    CHECK(fs::exists("exp_out/zero/iterations.csv"));
    CHECK(fs::exists("exp_out/zero/summary.json"));

    // every state entry in the solution file is exactly zero
    std::ifstream in("exp_out/zero/solution.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "level,node,x0,y0");
    while (std::getline(in, line)) {
        const auto second_comma = line.find(',', line.find(',') + 1);
        CHECK(line.substr(second_comma + 1) == "0,0");
    }
}

TEST_CASE("coupled linear model: both solvers agree and reruns are byte-identical") {
    const ExperimentConfig cfg = ExperimentConfig::from_json(coupled_config(0.1));
    RunFlags flags;
    flags.strict = true;
    const RunResult first = run_experiment(cfg, flags);
    REQUIRE(first.exit_code == 0);
    CHECK(first.summary["cross"]["distance"].get<double>() <= 1e-6);
    CHECK(std::abs(first.summary["cross"]["duality_gap"].get<double>()) <= 1e-8);

    const std::string solution = slurp("exp_out/coupled/solution.csv");
    const std::string verification = slurp("exp_out/coupled/verification.csv");
    CHECK(!solution.empty());

    const RunResult second = run_experiment(cfg, flags);
    CHECK(second.exit_code == 0);
    CHECK(slurp("exp_out/coupled/solution.csv") == solution);
    CHECK(slurp("exp_out/coupled/verification.csv") == verification);
}

TEST_CASE("window violation exits nonzero") {
    json j = coupled_config(0.1);
    j["weight"]["rho"] = -3.0;  // far below the admissible interval
    j["output"]["directory"] = "exp_out/window";
    const RunResult result = run_experiment(ExperimentConfig::from_json(j), {});
    CHECK(result.exit_code == 2);
    REQUIRE(!result.messages.empty());
    CHECK(result.messages[0].find("window") != std::string::npos);
}

TEST_CASE("strict mode turns certificate violations into failures") {
    json j = base_config();
    // expanding boundary map against a contracting certificate
    j["model"]["params"] = {{"dim", 1}, {"boundary", {{"gain", {{1.0}}}}}};
    j["certificate"]["M"] = {{1.0}};
    j["output"]["directory"] = "exp_out/strict";
    const ExperimentConfig cfg = ExperimentConfig::from_json(j);

    RunFlags relaxed;
    relaxed.scope = RunFlags::Scope::ChecksOnly;
    CHECK(run_experiment(cfg, relaxed).exit_code == 0);

    RunFlags strict = relaxed;
    strict.strict = true;
    CHECK(run_experiment(cfg, strict).exit_code == 1);
}

TEST_CASE("forward control pipeline reports the oracle comparison") {
    json j;
    j["lattice"] = {{"depth", 4}, {"noise", {{"support", {1.0, -1.0}}, {"probs", {0.5, 0.5}}}}};
    j["weight"] = {{"rho", 1.0}, {"horizon", 4}};
    j["model"] = {{"name", "lq-flq"},
                  {"params",
                   {{"state_dim", 1}, {"control_dim", 1}, {"A", {{0.1}}}, {"B", {{1.0}}}, {"C", {{0.0}}},
                    {"D", {{0.0}}}, {"M", {{1.0}}}, {"Q", {{0.2}}}, {"R", {{1.0}}}, {"b", {0.3}}}}};
    j["solver"] = {{"mode", "continuation"}, {"innerTol", 1e-12}};
    j["verify"] = {{"trials", 60}, {"seed", 33}};
    j["output"] = {{"directory", "exp_out/flq"}};

    RunFlags flags;
    flags.strict = true;
    const RunResult result = run_experiment(ExperimentConfig::from_json(j), flags);
    CHECK(result.exit_code == 0);
    CHECK(result.summary["lq"]["oracle_cost_gap"].get<double>() <= 1e-6);
    CHECK(result.summary["lq"]["stationarity_residual"].get<double>() <= 1e-8);
    CHECK(std::filesystem::exists("exp_out/flq/solution.csv"));

    // solution file carries the control column
    std::ifstream in("exp_out/flq/solution.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "level,node,x0,y0,u0");
}

TEST_CASE("solve-only scope skips the samplers but still writes the solution") {
    json j = coupled_config(0.1);
    j["output"]["directory"] = "exp_out/solve_only";
    RunFlags flags;
    flags.scope = RunFlags::Scope::SolveOnly;
    const RunResult result = run_experiment(ExperimentConfig::from_json(j), flags);
    CHECK(result.exit_code == 0);
    CHECK(!result.summary.contains("conditions"));
    CHECK(std::filesystem::exists("exp_out/solve_only/solution.csv"));
}
