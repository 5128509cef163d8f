#pragma once

#include <vector>

#include "fbsde/coefficients.hpp"

namespace fbsde {

struct SolverOptions {
    enum class Mode { Continuation, Direct };

    Mode mode = Mode::Continuation;
    double delta_init = 0.25;   // first (and maximal) homotopy step
    double inner_tol = 1e-10;   // fixed-point distance / residual target
    int max_inner_iters = 200;
    double damping = 1.0;       // boundary-update damping of the direct sweeps
};

struct ContinuationRecord {
    double alpha_from = 0.0;
    double alpha_to = 0.0;
    double delta = 0.0;
    int iterations = 0;
    double contraction_ratio = 0.0;  // worst successive-iterate ratio observed
    double residual = 0.0;
    bool accepted = true;
};

struct FBSDESolution {
    AdaptedProcess x, y;
    double residual = 0.0;
    std::vector<ContinuationRecord> trace;
    int total_inner_iterations = 0;
};

// Closed-form solve of the fully regularized (decoupled) end of the homotopy
// family: case 1 solves backward first, case 2 forward first.
FBSDESolution solve_alpha0(const DomMonCert& cert, const DrivingTerms& d, const Lattice& lat,
                           const WeightConfig& w);

// One homotopy step: fixed-point iteration whose every pass solves the
// alpha0 family with driving terms shifted by delta times the original
// coefficients and the certificate regularizer, both evaluated on the current
// iterate. The inner solves run as damped direct sweeps warm-started from the
// iterate; with nested_inner set (only valid from alpha0 = 0) they use the
// closed-form solver instead, which realizes the literal recursion and is
// kept as a cross-check on small lattices.
FBSDESolution continuation_step(const FBSDESolution& base, double alpha0, double delta,
                                const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                                const Lattice& lat, const WeightConfig& w, const SolverOptions& opts,
                                bool nested_inner = false);

// Adaptive continuation from the decoupled system to the target one: steps
// halve on non-contraction, double after success up to delta_init, and the
// run aborts if the step collapses below 1e-6.
FBSDESolution solve_continuation(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                                 const Lattice& lat, const WeightConfig& w, const SolverOptions& opts);

// Damped global fixed-point iteration on the truncated system: backward sweep
// given the forward state, damped boundary update, forward sweep given the
// backward state. Serves as the cross-check oracle for the continuation path.
FBSDESolution solve_direct(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                           const Lattice& lat, const WeightConfig& w, const SolverOptions& opts,
                           const FBSDESolution* warm = nullptr);

FBSDESolution solve_fbsde(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                          const Lattice& lat, const WeightConfig& w, const SolverOptions& opts);

// Max node-wise violation of the forward recursion, the backward relation,
// the boundary coupling and the truncation boundary.
double fbsde_residual(const CoefficientSet& c, const DrivingTerms& d, const FBSDESolution& sol,
                      const Lattice& lat, const WeightConfig& w);

struct EstimateRatioReport {
    double solution_norm_sq = 0.0;  // squared pair norm of the solution (or difference)
    double data = 0.0;              // data functional it is bounded by
    double ratio = 0.0;             // empirical constant solution_norm_sq / data
};

// Solution norm against the inhomogeneous data of one system.
EstimateRatioReport solution_data_ratio(const CoefficientSet& c, const DrivingTerms& d,
                                        const FBSDESolution& sol, const Lattice& lat, const WeightConfig& w);

// Distance of two solutions against the coefficient gap evaluated along the
// second solution.
EstimateRatioReport stability_data_ratio(const CoefficientSet& ca, const DrivingTerms& da,
                                         const FBSDESolution& sa, const CoefficientSet& cb,
                                         const DrivingTerms& db, const FBSDESolution& sb, const Lattice& lat,
                                         const WeightConfig& w);

// Discounted sum of the coupled pairing between the two systems plus the
// boundary term; identically zero for exact solutions of the truncated
// systems, up to solver tolerance.
double duality_gap(const CoefficientSet& ca, const DrivingTerms& da, const FBSDESolution& sa,
                   const CoefficientSet& cb, const DrivingTerms& db, const FBSDESolution& sb, double rho,
                   const Lattice& lat, int horizon);

// Per-level defect of the telescoping identity behind the duality argument.
std::vector<double> telescoping_defects(const CoefficientSet& ca, const DrivingTerms& da,
                                        const FBSDESolution& sa, const CoefficientSet& cb,
                                        const DrivingTerms& db, const FBSDESolution& sb, double rho,
                                        const Lattice& lat, int horizon);

}  // namespace fbsde
