#pragma once

#include <functional>
#include <vector>

#include "fbsde/report.hpp"
#include "fbsde/spaces.hpp"

namespace fbsde {

// Generator of the backward equation. The map producing y_k consumes the
// one-step conditional quantities of y_{k+1}; it is indexed here by the level
// k it writes to, and must be measurable at that level.
using PairMap =
    std::function<Eigen::VectorXd(int k, std::int64_t node, const Eigen::VectorXd& yp, const Eigen::VectorXd& zp)>;

struct BackwardGenerator {
    int dim = 1;
    PairMap generator;       // f(k+1, y'_{k+1}, z'_{k+1}), indexed by k
    double lipschitz = 0.0;  // L bound in (y', z') jointly
};

// Truncated backward recursion: y_N = 0 at the horizon, then
// y_k = f(k+1, y'_{k+1}, z'_{k+1}) down to level 0.
AdaptedProcess solve_bsde(const BackwardGenerator& g, const Lattice& lat, const WeightConfig& w);

// 3 e^{rho} / (1 - 6 L^2 e^{rho}); requires rho < -ln(6 L^2).
double bsde_estimate_constant(double lipschitz, double rho);

struct BsdeEstimateReport {
    InequalityCheck norm_bound;
    InequalityCheck stability;
    bool pass() const { return norm_bound.pass && stability.pass; }
};

BsdeEstimateReport verify_bsde_estimates(const BackwardGenerator& g, const BackwardGenerator& gbar,
                                         const Lattice& lat, const WeightConfig& w);

// Solves at each requested horizon and reports consecutive weighted-norm
// distances, mirroring the truncation construction used to reach the
// infinite-horizon solution.
struct TruncationStudy {
    std::vector<int> horizons;
    std::vector<double> distances;  // ||y^{(h_i)} - y^{(h_{i+1})}||, one per adjacent pair
    bool monotone_decay = false;
};

TruncationStudy truncation_study(const BackwardGenerator& g, const Lattice& lat, const WeightConfig& w,
                                 std::vector<int> horizons);

double bsde_recursion_residual(const BackwardGenerator& g, const AdaptedProcess& y, const Lattice& lat,
                               const WeightConfig& w);

}  // namespace fbsde
