#include "fbsde/experiment.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fbsde {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    if (v == 0.0) return "0";  // collapse the sign of zero
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

NoiseModel parse_noise(const json& j) {
    NoiseModel n;
    for (const auto& v : j.at("support")) n.support.push_back(v.get<double>());
    for (const auto& v : j.at("probs")) n.probabilities.push_back(v.get<double>());
    return n;
}

DomMonCert parse_certificate(const json& j, int levels) {
    DomMonCert cert;
    cert.mu = j.value("mu", 0.0);
    cert.nu = j.value("nu", 0.0);
    cert.M = parse_matrix(j.at("M"), "certificate M");
    cert.A = constant_matrix_seq(parse_matrix(j.at("A"), "certificate A"));
    cert.B = constant_matrix_seq(parse_matrix(j.at("B"), "certificate B"));
    cert.C = constant_matrix_seq(parse_matrix(j.at("C"), "certificate C"));
    const std::string case_name = j.value("case", "case1");
    if (case_name == "case1") cert.case_flag = CertCase::Case1;
    else if (case_name == "case2") cert.case_flag = CertCase::Case2;
    else throw ConfigError("certificate case must be 'case1' or 'case2'");
    const std::string sign = j.value("sign", "standard");
    if (sign == "standard") cert.sign = MonotoneSign::Standard;
    else if (sign == "symmetric") cert.sign = MonotoneSign::Symmetric;
    else throw ConfigError("certificate sign must be 'standard' or 'symmetric'");
    cert.levels = levels;
    cert.validate();
    return cert;
}

}  // namespace

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return from_json(j);
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig cfg;
    try {
        const json& lattice = j.at("lattice");
        cfg.depth = lattice.at("depth").get<int>();
        const json& noise = lattice.at("noise");
        if (noise.contains("per_level"))
            for (const auto& nj : noise.at("per_level")) cfg.noise.push_back(parse_noise(nj));
        else
            cfg.noise.push_back(parse_noise(noise));

        const json& weight = j.at("weight");
        cfg.weight.rho = weight.at("rho").get<double>();
        cfg.weight.horizon = weight.value("horizon", cfg.depth);

        const json& model = j.at("model");
        cfg.model_name = model.at("name").get<std::string>();
        cfg.model_params = model.value("params", json::object());

        if (j.contains("certificate")) cfg.certificate = parse_certificate(j.at("certificate"), cfg.weight.horizon);

        if (j.contains("solver")) {
            const json& solver = j.at("solver");
            cfg.solver_mode = solver.value("mode", "continuation");
            cfg.solver.delta_init = solver.value("deltaInit", cfg.solver.delta_init);
            cfg.solver.inner_tol = solver.value("innerTol", cfg.solver.inner_tol);
            cfg.solver.max_inner_iters = solver.value("maxInnerIters", cfg.solver.max_inner_iters);
            cfg.solver.damping = solver.value("damping", cfg.solver.damping);
        }

        const json& verify = j.at("verify");
        cfg.verify_trials = verify.value("trials", 100);
        if (!verify.contains("seed")) throw ConfigError("verify block must carry an explicit seed");
        cfg.verify_seed = verify.at("seed").get<std::uint64_t>();

        if (j.contains("output")) cfg.output_directory = j.at("output").value("directory", cfg.output_directory);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config schema error: ") + e.what());
    }

    if (!std::isfinite(cfg.weight.rho)) throw ConfigError("rho must be finite");
    if (cfg.depth < 1) throw ConfigError("lattice depth must be >= 1");
    if (cfg.weight.horizon < 1 || cfg.weight.horizon > cfg.depth)
        throw ConfigError("weight horizon must lie in [1, depth]");
    if (cfg.solver_mode != "continuation" && cfg.solver_mode != "direct" && cfg.solver_mode != "both")
        throw ConfigError("solver mode must be 'continuation', 'direct' or 'both'");
    bool known = false;
    for (const auto& name : registered_models()) known = known || name == cfg.model_name;
    if (!known) throw ConfigError("model '" + cfg.model_name + "' is not registered");
    return cfg;
}

namespace {

struct CheckRow {
    std::string name;
    double lhs = 0.0, rhs = 0.0, constant = 0.0;
    bool pass = true;
};

class ReportSink {
public:
    explicit ReportSink(std::vector<std::string>& messages) : messages_(messages) {}

    void row(const std::string& name, double lhs, double rhs, double constant, bool pass) {
        rows_.push_back({name, lhs, rhs, constant, pass});
        if (!pass) {
            ++failures_;
            messages_.push_back("verification failed: " + name);
        }
    }
    void note(const std::string& msg) { messages_.push_back(msg); }

    const std::vector<CheckRow>& rows() const { return rows_; }
    int failures() const { return failures_; }

private:
    std::vector<CheckRow> rows_;
    std::vector<std::string>& messages_;
    int failures_ = 0;
};

void write_verification_csv(const std::string& path, const std::vector<CheckRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    out << "check,lhs,rhs,constant,margin,pass\n";
    for (const auto& r : rows)
        out << r.name << ',' << fmt(r.lhs) << ',' << fmt(r.rhs) << ',' << fmt(r.constant) << ','
            << fmt(r.rhs - r.lhs) << ',' << (r.pass ? 1 : 0) << '\n';
}

void write_iterations_csv(const std::string& path, const std::vector<ContinuationRecord>& trace) {
    std::ofstream out(path, std::ios::binary);
    out << "step,alpha_from,alpha_to,delta,iterations,contraction_ratio,residual,accepted\n";
    int step = 0;
    for (const auto& r : trace)
        out << step++ << ',' << fmt(r.alpha_from) << ',' << fmt(r.alpha_to) << ',' << fmt(r.delta) << ','
            << r.iterations << ',' << fmt(r.contraction_ratio) << ',' << fmt(r.residual) << ','
            << (r.accepted ? 1 : 0) << '\n';
}

void write_solution_csv(const std::string& path, const AdaptedProcess& x, const AdaptedProcess& y,
                        const AdaptedProcess* control, const Lattice& lat) {
    std::ofstream out(path, std::ios::binary);
    out << "level,node";
    for (int i = 0; i < x.dim(); ++i) out << ",x" << i;
    for (int i = 0; i < y.dim(); ++i) out << ",y" << i;
    if (control)
        for (int i = 0; i < control->dim(); ++i) out << ",u" << i;
    out << '\n';
    for (int k = 0; k <= x.horizon(); ++k) {
        for (std::int64_t node = 0; node < lat.node_count(k); ++node) {
            out << k << ',' << node;
            for (int i = 0; i < x.dim(); ++i) out << ',' << fmt(x.level(k)(i, node));
            for (int i = 0; i < y.dim(); ++i) out << ',' << fmt(y.level(k)(i, node));
            if (control) {
                for (int i = 0; i < control->dim(); ++i)
                    out << ',' << fmt(k <= control->horizon() ? control->level(k)(i, node) : 0.0);
            }
            out << '\n';
        }
    }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const RunFlags& flags) {
    RunResult result;
    ReportSink sink(result.messages);
    json& summary = result.summary;

    const std::string mode = flags.mode.value_or(cfg.solver_mode);
    const std::uint64_t seed = flags.seed.value_or(cfg.verify_seed);
    const std::string outdir = flags.output_dir.value_or(cfg.output_directory);

    summary["model"] = cfg.model_name;
    summary["depth"] = cfg.depth;
    summary["horizon"] = cfg.weight.horizon;
    summary["rho"] = cfg.weight.rho;
    summary["mode"] = mode;
    summary["seed"] = seed;

    try {
        if (!flags.allowed_models.empty()) {
            bool ok = false;
            for (const auto& name : flags.allowed_models) ok = ok || name == cfg.model_name;
            if (!ok) throw ConfigError("model '" + cfg.model_name + "' not supported by this subcommand");
        }

        const Lattice lat = cfg.noise.size() == 1
                                ? Lattice(cfg.depth, cfg.noise[0])
                                : Lattice(cfg.noise);
        const WeightConfig w = cfg.weight;
        const int N = w.horizon;

        const DomMonCert* user_cert = cfg.certificate ? &*cfg.certificate : nullptr;
        const ModelInstance model = build_model(cfg.model_name, cfg.model_params, w.rho, N, user_cert);

        const WindowReport window =
            parameter_window_check(model.coeffs.lip.forward_x, model.coeffs.lip.backward_pair, w.rho);
        summary["window"] = {{"feasible", window.feasible},
                             {"lower", window.lower},
                             {"upper", window.upper},
                             {"rho_admissible", window.rho_admissible}};
        if (!window.rho_admissible)
            throw WindowError("rho = " + std::to_string(w.rho) + " outside the admissible window (" +
                              std::to_string(window.lower) + ", " + std::to_string(window.upper) + ")");

        if (flags.scope != RunFlags::Scope::SolveOnly) {
            SamplerConfig sampler{seed, std::max(1000, cfg.verify_trials), 2.0};
            const ConditionReport dom = check_domination(model.coeffs, model.cert, lat, N, sampler, 1e-9);
            const ConditionReport mono =
                check_monotonicity(model.coeffs, model.cert, w.rho, lat, N, sampler, 1e-9);
            sink.row("domination violations", static_cast<double>(dom.violations.size()), 0.0, 0.0,
                     dom.pass());
            sink.row("monotonicity violations", static_cast<double>(mono.violations.size()), 0.0, 0.0,
                     mono.pass());
            summary["conditions"] = {{"samples", dom.samples},
                                     {"domination_violations", dom.violations.size()},
                                     {"monotonicity_violations", mono.violations.size()},
                                     {"vacuous", dom.vacuous}};
        }

        std::optional<FBSDESolution> cont, direct;
        std::optional<LQSolution> lq_sol;
        const DrivingTerms d0 = DrivingTerms::zero(model.coeffs.dim, lat, N);

        if (flags.scope != RunFlags::Scope::ChecksOnly) {
            SolverOptions opts = cfg.solver;
            if (model.flq) {
                opts.mode = mode == "direct" ? SolverOptions::Mode::Direct : SolverOptions::Mode::Continuation;
                lq_sol = solve_flq(*model.flq, lat, w, opts);
            } else if (model.blq) {
                opts.mode = mode == "direct" ? SolverOptions::Mode::Direct : SolverOptions::Mode::Continuation;
                lq_sol = solve_blq(*model.blq, lat, w, opts);
            } else {
                if (mode == "continuation" || mode == "both")
                    cont = solve_continuation(model.coeffs, model.cert, d0, lat, w, opts);
                if (mode == "direct" || mode == "both")
                    direct = solve_direct(model.coeffs, model.cert, d0, lat, w, opts);
            }

            if (cont) {
                sink.row("continuation residual", cont->residual, cfg.solver.inner_tol * 10.0, 0.0,
                         cont->residual <= cfg.solver.inner_tol * 10.0);
                summary["continuation"] = {{"residual", cont->residual},
                                           {"inner_iterations", cont->total_inner_iterations},
                                           {"alpha_steps", cont->trace.size()}};
                const EstimateRatioReport est = solution_data_ratio(model.coeffs, d0, *cont, lat, w);
                sink.row("solution-vs-data ratio", est.solution_norm_sq, est.data, est.ratio,
                         std::isfinite(est.ratio) || est.solution_norm_sq == 0.0);
                summary["estimate"] = {{"solution_norm_sq", est.solution_norm_sq},
                                       {"data", est.data},
                                       {"empirical_constant", est.ratio}};
            }
            if (direct) {
                sink.row("direct residual", direct->residual, cfg.solver.inner_tol, 0.0,
                         direct->residual <= cfg.solver.inner_tol);
                summary["direct"] = {{"residual", direct->residual},
                                     {"inner_iterations", direct->total_inner_iterations}};
            }
            if (cont && direct) {
                const double dist = std::sqrt(pair_norm_sq(cont->x - direct->x, cont->y - direct->y, w, lat));
                sink.row("cross-solver distance", dist, 1e-6, 0.0, dist <= 1e-6);
                const double gap =
                    duality_gap(model.coeffs, d0, *cont, model.coeffs, d0, *direct, w.rho, lat, N);
                sink.row("duality gap (cont vs direct)", std::abs(gap), 1e-8, 0.0, std::abs(gap) <= 1e-8);
                summary["cross"] = {{"distance", dist}, {"duality_gap", gap}};
            }

            if (lq_sol && flags.scope == RunFlags::Scope::Full) {
                const OptimalityReport rep =
                    model.flq ? verify_flq(*model.flq, *lq_sol, lat, w, cfg.verify_trials, seed)
                              : verify_blq(*model.blq, *lq_sol, lat, w, cfg.verify_trials, seed);
                sink.row("stationarity residual", rep.stationarity_residual, 1e-8, 0.0,
                         rep.stationarity_residual <= 1e-8);
                sink.row("worst perturbation gap", -rep.min_gap, 1e-10, 0.0, rep.min_gap >= -1e-10);
                sink.row("gap vs quadratic form", rep.max_gap_defect, 1e-8, 0.0, rep.max_gap_defect <= 1e-8);

                json lqj = {{"cost", lq_sol->cost},
                            {"stationarity_residual", rep.stationarity_residual},
                            {"min_gap", rep.min_gap},
                            {"max_gap_defect", rep.max_gap_defect},
                            {"trials", rep.trials},
                            {"hamiltonian_residual", lq_sol->hamiltonian.residual}};

                const QPOracleResult oracle = model.flq ? flq_qp_oracle(*model.flq, lat, w)
                                                        : blq_qp_oracle(*model.blq, lat, w);
                const double cost_gap = std::abs(lq_sol->cost - oracle.cost);
                sink.row("cost vs exact quadratic-program oracle", cost_gap, 1e-6, 0.0, cost_gap <= 1e-6);
                lqj["oracle_cost"] = oracle.cost;
                lqj["oracle_cost_gap"] = cost_gap;
                summary["lq"] = lqj;
            }
        }

        namespace fs = std::filesystem;
        fs::create_directories(outdir);
        write_verification_csv((fs::path(outdir) / "verification.csv").string(), sink.rows());
        if (lq_sol) {
            write_solution_csv((fs::path(outdir) / "solution.csv").string(),
                               model.flq ? lq_sol->state : lq_sol->adjoint,
                               model.flq ? lq_sol->adjoint : lq_sol->state, &lq_sol->control, lat);
            write_iterations_csv((fs::path(outdir) / "iterations.csv").string(), lq_sol->hamiltonian.trace);
        } else if (cont || direct) {
            const FBSDESolution& best = cont ? *cont : *direct;
            write_solution_csv((fs::path(outdir) / "solution.csv").string(), best.x, best.y, nullptr, lat);
            write_iterations_csv((fs::path(outdir) / "iterations.csv").string(), best.trace);
        }

        summary["verification_failures"] = sink.failures();
        if (sink.failures() > 0 && flags.strict) result.exit_code = 1;
    } catch (const WindowError& e) {
        result.messages.push_back(std::string("window violation: ") + e.what());
        summary["error"] = e.what();
        result.exit_code = 2;
    } catch (const ConfigError& e) {
        result.messages.push_back(std::string("config error: ") + e.what());
        summary["error"] = e.what();
        result.exit_code = 2;
    } catch (const StepCollapseError& e) {
        result.messages.push_back(std::string("solver failure: ") + e.what());
        summary["error"] = e.what();
        result.exit_code = 3;
    } catch (const DivergenceError& e) {
        result.messages.push_back(std::string("solver failure: ") + e.what());
        summary["error"] = e.what();
        result.exit_code = 3;
    } catch (const Error& e) {
        result.messages.push_back(e.what());
        summary["error"] = e.what();
        result.exit_code = 2;
    }

    try {
        namespace fs = std::filesystem;
        fs::create_directories(outdir);
        std::ofstream sj((fs::path(outdir) / "summary.json").string(), std::ios::binary);
        sj << summary.dump(2) << '\n';
    } catch (const std::exception& e) {
        result.messages.push_back(std::string("could not write summary: ") + e.what());
        if (result.exit_code == 0) result.exit_code = 2;
    }
    return result;
}

}  // namespace fbsde
