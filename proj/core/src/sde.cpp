#include "fbsde/sde.hpp"

#include <cmath>
#include <string>

namespace fbsde {

namespace {

void forward_sweep(const ForwardCoefficients& c, const AdaptedProcess& input, AdaptedProcess& out,
                   const Lattice& lat, int horizon) {
    out.level(0).col(0) = c.initial;
    for (int k = 0; k < horizon; ++k) {
        const NoiseModel& step = lat.noise(k);
        const int s = step.branching();
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Eigen::VectorXd xu = input.at(k, u);
            const Eigen::VectorXd bu = c.drift(k, u, xu);
            const Eigen::VectorXd su = c.diffusion(k, u, xu);
            for (int j = 0; j < s; ++j) out.level(k + 1).col(u * s + j) = bu + su * step.support[j];
        }
    }
}

}  // namespace

AdaptedProcess solve_sde(const ForwardCoefficients& c, const Lattice& lat, const WeightConfig& w) {
    if (w.horizon > lat.depth()) throw HorizonError("solve_sde: horizon exceeds lattice depth");
    AdaptedProcess x(c.dim, lat, w.horizon);
    forward_sweep(c, x, x, lat, w.horizon);  // recursion reads level k before writing k+1
    if (!x.all_finite()) throw NonFiniteError("solve_sde produced non-finite values");
    return x;
}

AdaptedProcess sde_picard_map(const ForwardCoefficients& c, const AdaptedProcess& x, const Lattice& lat,
                              const WeightConfig& w) {
    AdaptedProcess out(c.dim, lat, w.horizon);
    forward_sweep(c, x, out, lat, w.horizon);
    return out;
}

double sde_estimate_constant(double lipschitz, double rho) {
    const double denom = 1.0 - 4.0 * lipschitz * lipschitz * std::exp(-rho);
    if (denom <= 0.0)
        throw WindowError("forward estimate needs rho > ln(4 L^2); got rho = " + std::to_string(rho));
    return (1.0 + 2.0 * std::exp(-rho)) / denom;
}

namespace {

// sum_k e^{-rho k} E |m(k, x_k) - mbar(k, x_k)|^2 with both maps evaluated on
// the same process.
double map_gap_norm_sq(const StateMap& m, const StateMap& mbar, const AdaptedProcess& x, const Lattice& lat,
                       const WeightConfig& w) {
    double total = 0.0;
    for (int k = 0; k <= w.horizon; ++k) {
        double level_sum = 0.0;
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Eigen::VectorXd xu = x.at(k, u);
            level_sum += lat.path_measure(k, u) * (m(k, u, xu) - mbar(k, u, xu)).squaredNorm();
        }
        total += std::exp(-w.rho * k) * level_sum;
    }
    return total;
}

}  // namespace

SdeEstimateReport verify_sde_estimates(const ForwardCoefficients& c, const ForwardCoefficients& cbar,
                                       const Lattice& lat, const WeightConfig& w) {
    const double L = std::max(c.lipschitz, cbar.lipschitz);
    const double constant = sde_estimate_constant(L, w.rho);

    const AdaptedProcess x = solve_sde(c, lat, w);
    const AdaptedProcess xbar = solve_sde(cbar, lat, w);

    SdeEstimateReport report;

    const StateMap zero_map = [n = c.dim](int, std::int64_t, const Eigen::VectorXd&) {
        return Eigen::VectorXd::Zero(n).eval();
    };
    const AdaptedProcess zeros(c.dim, lat, w.horizon);
    const double data = c.initial.squaredNorm() + map_gap_norm_sq(c.drift, zero_map, zeros, lat, w) +
                        map_gap_norm_sq(c.diffusion, zero_map, zeros, lat, w);
    report.norm_bound.name = "forward norm bound";
    report.norm_bound.constant = constant;
    report.norm_bound.lhs = weighted_norm_sq(x, w, lat);
    report.norm_bound.rhs = constant * data;
    report.norm_bound.pass = report.norm_bound.lhs <= report.norm_bound.rhs + 1e-12;

    const double gap_data = (c.initial - cbar.initial).squaredNorm() +
                            map_gap_norm_sq(c.drift, cbar.drift, xbar, lat, w) +
                            map_gap_norm_sq(c.diffusion, cbar.diffusion, xbar, lat, w);
    report.stability.name = "forward stability bound";
    report.stability.constant = constant;
    report.stability.lhs = weighted_norm_sq(x - xbar, w, lat);
    report.stability.rhs = constant * gap_data;
    report.stability.pass = report.stability.lhs <= report.stability.rhs + 1e-12;

    return report;
}

double sde_recursion_residual(const ForwardCoefficients& c, const AdaptedProcess& x, const Lattice& lat,
                              const WeightConfig& w) {
    double worst = (x.at(0, 0) - c.initial).lpNorm<Eigen::Infinity>();
    for (int k = 0; k < w.horizon; ++k) {
        const NoiseModel& step = lat.noise(k);
        const int s = step.branching();
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Eigen::VectorXd xu = x.at(k, u);
            const Eigen::VectorXd bu = c.drift(k, u, xu);
            const Eigen::VectorXd su = c.diffusion(k, u, xu);
            for (int j = 0; j < s; ++j) {
                const double r =
                    (x.at(k + 1, u * s + j) - bu - su * step.support[j]).lpNorm<Eigen::Infinity>();
                worst = std::max(worst, r);
            }
        }
    }
    return worst;
}

}  // namespace fbsde
