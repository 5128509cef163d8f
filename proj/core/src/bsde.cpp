#include "fbsde/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fbsde {

AdaptedProcess solve_bsde(const BackwardGenerator& g, const Lattice& lat, const WeightConfig& w) {
    if (w.horizon > lat.depth()) throw HorizonError("solve_bsde: horizon exceeds lattice depth");
    AdaptedProcess y(g.dim, lat, w.horizon);
    for (int k = w.horizon - 1; k >= 0; --k) {
        const Eigen::MatrixXd yp = lat.cond_exp(y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(y.level(k + 1), k + 1);
        for (std::int64_t u = 0; u < lat.node_count(k); ++u)
            y.level(k).col(u) = g.generator(k, u, yp.col(u), zp.col(u));
    }
    if (!y.all_finite()) throw NonFiniteError("solve_bsde produced non-finite values");
    return y;
}

double bsde_estimate_constant(double lipschitz, double rho) {
    const double denom = 1.0 - 6.0 * lipschitz * lipschitz * std::exp(rho);
    if (denom <= 0.0)
        throw WindowError("backward estimate needs rho < -ln(6 L^2); got rho = " + std::to_string(rho));
    return 3.0 * std::exp(rho) / denom;
}

namespace {

// sum over the levels with an active backward relation of
// e^{-rho (k+1)} E |g(k, y'_{k+1}, z'_{k+1}) - gbar(k, y'_{k+1}, z'_{k+1})|^2,
// inputs taken from the given process.
double generator_gap_norm_sq(const BackwardGenerator& g, const BackwardGenerator& gbar, const AdaptedProcess& y,
                             const Lattice& lat, const WeightConfig& w) {
    double total = 0.0;
    for (int k = 0; k < w.horizon; ++k) {
        const Eigen::MatrixXd yp = lat.cond_exp(y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(y.level(k + 1), k + 1);
        double level_sum = 0.0;
        for (std::int64_t u = 0; u < lat.node_count(k); ++u)
            level_sum += lat.path_measure(k, u) *
                         (g.generator(k, u, yp.col(u), zp.col(u)) - gbar.generator(k, u, yp.col(u), zp.col(u)))
                             .squaredNorm();
        total += std::exp(-w.rho * (k + 1)) * level_sum;
    }
    return total;
}

BackwardGenerator zero_generator(int dim) {
    return BackwardGenerator{dim,
                             [dim](int, std::int64_t, const Eigen::VectorXd&, const Eigen::VectorXd&) {
                                 return Eigen::VectorXd::Zero(dim).eval();
                             },
                             0.0};
}

}  // namespace

BsdeEstimateReport verify_bsde_estimates(const BackwardGenerator& g, const BackwardGenerator& gbar,
                                         const Lattice& lat, const WeightConfig& w) {
    const double L = std::max(g.lipschitz, gbar.lipschitz);
    const double constant = bsde_estimate_constant(L, w.rho);

    const AdaptedProcess y = solve_bsde(g, lat, w);
    const AdaptedProcess ybar = solve_bsde(gbar, lat, w);

    BsdeEstimateReport report;

    report.norm_bound.name = "backward norm bound";
    report.norm_bound.constant = constant;
    report.norm_bound.lhs = weighted_norm_sq(y, w, lat);
    report.norm_bound.rhs = constant * generator_gap_norm_sq(g, zero_generator(g.dim), AdaptedProcess(g.dim, lat, w.horizon), lat, w);
    report.norm_bound.pass = report.norm_bound.lhs <= report.norm_bound.rhs + 1e-12;

    report.stability.name = "backward stability bound";
    report.stability.constant = constant;
    report.stability.lhs = weighted_norm_sq(y - ybar, w, lat);
    report.stability.rhs = constant * generator_gap_norm_sq(g, gbar, ybar, lat, w);
    report.stability.pass = report.stability.lhs <= report.stability.rhs + 1e-12;

    return report;
}

TruncationStudy truncation_study(const BackwardGenerator& g, const Lattice& lat, const WeightConfig& w,
                                 std::vector<int> horizons) {
    std::sort(horizons.begin(), horizons.end());
    TruncationStudy study;
    study.horizons = horizons;
    if (horizons.empty()) return study;
    if (horizons.back() > lat.depth()) throw HorizonError("truncation_study: horizon exceeds lattice depth");

    const int top = horizons.back();
    std::vector<AdaptedProcess> solutions;
    solutions.reserve(horizons.size());
    for (int h : horizons)
        solutions.push_back(extend(solve_bsde(g, lat, WeightConfig{w.rho, h}), lat, top));

    study.monotone_decay = true;
    for (std::size_t i = 0; i + 1 < solutions.size(); ++i) {
        const double d =
            std::sqrt(weighted_norm_sq(solutions[i + 1] - solutions[i], WeightConfig{w.rho, top}, lat));
        if (!study.distances.empty() && d > study.distances.back() + 1e-12) study.monotone_decay = false;
        study.distances.push_back(d);
    }
    return study;
}

double bsde_recursion_residual(const BackwardGenerator& g, const AdaptedProcess& y, const Lattice& lat,
                               const WeightConfig& w) {
    double worst = y.level(w.horizon).lpNorm<Eigen::Infinity>();  // truncation boundary
    for (int k = 0; k < w.horizon; ++k) {
        const Eigen::MatrixXd yp = lat.cond_exp(y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(y.level(k + 1), k + 1);
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const double r =
                (y.at(k, u) - g.generator(k, u, yp.col(u), zp.col(u))).lpNorm<Eigen::Infinity>();
            worst = std::max(worst, r);
        }
    }
    return worst;
}

}  // namespace fbsde
