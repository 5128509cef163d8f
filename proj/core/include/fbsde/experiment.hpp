#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbsde/models.hpp"

namespace fbsde {

// Parsed experiment description. Schema (JSON):
//   lattice:     { depth, noise: { support: [..], probs: [..] } }
//   weight:      { rho, horizon }
//   model:       { name, params }
//   certificate: { mu, nu, M, A, B, C, case, sign }      (model-dependent)
//   solver:      { mode, deltaInit, innerTol, maxInnerIters, damping }
//   verify:      { trials, seed }                        (seed is mandatory)
//   output:      { directory }
struct ExperimentConfig {
    int depth = 4;
    std::vector<NoiseModel> noise;  // one entry means i.i.d. across levels
    WeightConfig weight;
    std::string model_name;
    nlohmann::json model_params;
    std::optional<DomMonCert> certificate;
    SolverOptions solver;
    std::string solver_mode = "continuation";  // continuation | direct | both
    int verify_trials = 100;
    std::uint64_t verify_seed = 0;
    std::string output_directory = "out";

    static ExperimentConfig load_file(const std::string& path);
    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct RunFlags {
    enum class Scope { Full, SolveOnly, ChecksOnly };

    bool strict = false;
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    Scope scope = Scope::Full;
    // Expected model families for the solve-* entry points; empty means any.
    std::vector<std::string> allowed_models;
};

struct RunResult {
    int exit_code = 0;
    nlohmann::json summary;
    std::vector<std::string> messages;
};

// Full pipeline: validation, condition checks, solves, verification, report
// files (solution.csv, verification.csv, iterations.csv, summary.json).
RunResult run_experiment(const ExperimentConfig& cfg, const RunFlags& flags);

}  // namespace fbsde
