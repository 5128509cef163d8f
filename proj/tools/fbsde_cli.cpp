#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fbsde/bsde.hpp"
#include "fbsde/experiment.hpp"
#include "fbsde/sde.hpp"

namespace {

struct CommonFlags {
    std::string config;
    std::string output;
    bool strict = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string mode;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "experiment config file (JSON)")->required();
    cmd->add_flag("--strict", f.strict, "exit nonzero on any verification failure");
    cmd->add_option("--output", f.output, "output directory override");
    cmd->add_option("--seed", f.seed, "verification seed override")->each([&f](const std::string&) {
        f.seed_set = true;
    });
    cmd->add_option("--mode", f.mode, "solver mode: continuation | direct | both")
        ->check(CLI::IsMember({"continuation", "direct", "both"}));
}

int run_with_scope(const CommonFlags& f, fbsde::RunFlags::Scope scope,
                   std::vector<std::string> allowed_models = {}) {
    try {
        const fbsde::ExperimentConfig cfg = fbsde::ExperimentConfig::load_file(f.config);
        fbsde::RunFlags flags;
        flags.strict = f.strict;
        flags.scope = scope;
        flags.allowed_models = std::move(allowed_models);
        if (!f.output.empty()) flags.output_dir = f.output;
        if (f.seed_set) flags.seed = f.seed;
        if (!f.mode.empty()) flags.mode = f.mode;
        const fbsde::RunResult result = fbsde::run_experiment(cfg, flags);
        for (const auto& msg : result.messages) std::cerr << msg << '\n';
        std::cout << result.summary.dump(2) << '\n';
        return result.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int estimate_constants(double l1, double l2, double rho, bool have_l1, bool have_l2) {
    using namespace fbsde;
    int status = 0;
    if (have_l1) {
        try {
            std::printf("forward estimate constant:  %.10g\n", sde_estimate_constant(l1, rho));
        } catch (const WindowError& e) {
            std::printf("forward estimate constant:  unavailable (%s)\n", e.what());
            status = 2;
        }
    }
    if (have_l2) {
        try {
            std::printf("backward estimate constant: %.10g\n", bsde_estimate_constant(l2, rho));
        } catch (const WindowError& e) {
            std::printf("backward estimate constant: unavailable (%s)\n", e.what());
            status = 2;
        }
    }
    if (have_l1 && have_l2) {
        const WindowReport w = parameter_window_check(l1, l2, rho);
        std::printf("coupling feasible:          %s (24 L1^2 L2^2 = %.10g)\n", w.feasible ? "yes" : "no",
                    24.0 * l1 * l1 * l2 * l2);
        std::printf("admissible rho window:      (%.10g, %.10g)\n", w.lower, w.upper);
        std::printf("rho = %.10g is %s\n", rho, w.rho_admissible ? "admissible" : "not admissible");
        if (!w.rho_admissible) status = 2;
    }
    return status;
}

int bench(int depth, int dim, int support) {
    using namespace fbsde;
    using clock = std::chrono::steady_clock;
    NoiseModel noise = rademacher_noise();
    if (support == 3) noise = NoiseModel{{-std::sqrt(1.5), 0.0, std::sqrt(1.5)}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};

    const auto t0 = clock::now();
    const Lattice lat(depth, noise);
    const auto t1 = clock::now();
    std::printf("lattice depth %d, branching %d: build %lld us, %lld leaf nodes\n", depth, noise.branching(),
                static_cast<long long>(std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count()),
                static_cast<long long>(lat.node_count(depth)));

    std::printf("%6s %12s %16s %16s\n", "level", "nodes", "cond_exp (us)", "noise pair (us)");
    for (int k = 1; k <= depth; ++k) {
        const Eigen::MatrixXd v = Eigen::MatrixXd::Random(dim, lat.node_count(k));
        const auto a = clock::now();
        double sink = lat.cond_exp(v, k).sum();
        const auto b = clock::now();
        sink += lat.cond_exp_noise(v, k).sum();
        const auto c = clock::now();
        if (!std::isfinite(sink)) std::abort();
        std::printf("%6d %12lld %16lld %16lld\n", k, static_cast<long long>(lat.node_count(k)),
                    static_cast<long long>(std::chrono::duration_cast<std::chrono::microseconds>(b - a).count()),
                    static_cast<long long>(std::chrono::duration_cast<std::chrono::microseconds>(c - b).count()));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"solver suite for coupled forward-backward stochastic difference equations on scenario lattices"};
    app.require_subcommand(1);

    CommonFlags run_f, fb_f, flq_f, blq_f, chk_f;
    auto* cmd_run = app.add_subcommand("run", "full pipeline: checks, solves, verification, reports");
    add_common(cmd_run, run_f);
    auto* cmd_fb = app.add_subcommand("solve-fbsde", "solve the configured coupled system");
    add_common(cmd_fb, fb_f);
    auto* cmd_flq = app.add_subcommand("solve-flq", "solve the forward control problem");
    add_common(cmd_flq, flq_f);
    auto* cmd_blq = app.add_subcommand("solve-blq", "solve the backward control problem");
    add_common(cmd_blq, blq_f);
    auto* cmd_chk = app.add_subcommand("check-conditions", "sample the certificate conditions only");
    add_common(cmd_chk, chk_f);

    double l1 = 0.0, l2 = 0.0, rho = 0.0;
    auto* cmd_est = app.add_subcommand("estimate-constants", "closed-form estimate constants and the rho window");
    auto* opt_l1 = cmd_est->add_option("--L1", l1, "forward Lipschitz bound");
    auto* opt_l2 = cmd_est->add_option("--L2", l2, "backward Lipschitz bound");
    cmd_est->add_option("--rho", rho, "discount exponent")->required();

    int bench_depth = 8, bench_dim = 2, bench_support = 2;
    auto* cmd_bench = app.add_subcommand("bench", "per-level timing table");
    cmd_bench->add_option("--depth", bench_depth, "lattice depth");
    cmd_bench->add_option("--dim", bench_dim, "vector dimension");
    cmd_bench->add_option("--support", bench_support, "noise support size (2 or 3)")
        ->check(CLI::IsMember({2, 3}));

    CLI11_PARSE(app, argc, argv);

    if (cmd_run->parsed()) return run_with_scope(run_f, fbsde::RunFlags::Scope::Full);
    if (cmd_fb->parsed()) return run_with_scope(fb_f, fbsde::RunFlags::Scope::SolveOnly);
    if (cmd_flq->parsed()) return run_with_scope(flq_f, fbsde::RunFlags::Scope::Full, {"lq-flq"});
    if (cmd_blq->parsed()) return run_with_scope(blq_f, fbsde::RunFlags::Scope::Full, {"lq-blq"});
    if (cmd_chk->parsed()) return run_with_scope(chk_f, fbsde::RunFlags::Scope::ChecksOnly);
    if (cmd_est->parsed()) return estimate_constants(l1, l2, rho, opt_l1->count() > 0, opt_l2->count() > 0);
    if (cmd_bench->parsed()) return bench(bench_depth, bench_dim, bench_support);
    return 1;
}
