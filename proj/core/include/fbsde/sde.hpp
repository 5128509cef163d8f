#pragma once

#include <functional>

#include "fbsde/report.hpp"
#include "fbsde/spaces.hpp"

namespace fbsde {

// Level-measurable map of the current state, evaluated node-wise.
using StateMap = std::function<Eigen::VectorXd(int k, std::int64_t node, const Eigen::VectorXd& x)>;

struct ForwardCoefficients {
    int dim = 1;
    StateMap drift;            // b(k, x)
    StateMap diffusion;        // sigma(k, x)
    Eigen::VectorXd initial;   // eta, deterministic
    double lipschitz = 0.0;    // shared Lipschitz bound of drift and diffusion in x
};

// Explicit forward recursion x_{k+1} = b(k, x_k) + sigma(k, x_k) w_k from
// x_0 = eta. The construction is exact: the recursion residual is zero at
// every node up to rounding.
AdaptedProcess solve_sde(const ForwardCoefficients& c, const Lattice& lat, const WeightConfig& w);

// One sweep of the fixed-point map behind the existence argument: feeds the
// given process into the coefficients instead of recursing. Used to measure
// the contraction factor sqrt(2) L e^{-rho/2}.
AdaptedProcess sde_picard_map(const ForwardCoefficients& c, const AdaptedProcess& x, const Lattice& lat,
                              const WeightConfig& w);

// (1 + 2 e^{-rho}) / (1 - 4 L^2 e^{-rho}); requires rho > ln(4 L^2).
double sde_estimate_constant(double lipschitz, double rho);

struct SdeEstimateReport {
    InequalityCheck norm_bound;  // solution norm against the data of the first system
    InequalityCheck stability;   // distance of two solutions against the coefficient gap
    bool pass() const { return norm_bound.pass && stability.pass; }
};

SdeEstimateReport verify_sde_estimates(const ForwardCoefficients& c, const ForwardCoefficients& cbar,
                                       const Lattice& lat, const WeightConfig& w);

// Max node-wise violation of the recursion by a candidate process.
double sde_recursion_residual(const ForwardCoefficients& c, const AdaptedProcess& x, const Lattice& lat,
                              const WeightConfig& w);

}  // namespace fbsde
