#pragma once

#include <cstdint>
#include <functional>

#include "fbsde/fbsde.hpp"

namespace fbsde {

using NodeVectorSeq = std::function<Eigen::VectorXd(int k, std::int64_t node)>;

NodeVectorSeq zero_node_vector(int dim);
NodeVectorSeq constant_node_vector(Eigen::VectorXd v);

// Linear forward control system
//   x_{k+1} = A_k x_k + B_k u_k + b_k + (C_k x_k + D_k u_k + sigma_k) w_k
// with free initial state and cost
//   J = 1/2 E[ <M xi, xi> + sum_k e^{-rho k} (<Q_k x_k, x_k> + <R_k u_k, u_k>) ].
// The running sums are truncated at the horizon consistently with a zero
// adjoint at the truncation level: levels 0..N-1 enter the cost.
struct ForwardLQSpec {
    int state_dim = 1;
    int control_dim = 1;
    MatrixSeq A, C;        // n x n
    MatrixSeq B, D;        // n x m
    NodeVectorSeq b, sigma;  // adapted forcing; empty means zero
    Eigen::MatrixXd M;     // positive definite initial-state weight
    MatrixSeq Q;           // nonnegative state weights with Q(0) = 0
    MatrixSeq R;           // control weights bounded below by delta I
    double rho = 0.0;

    void validate(int horizon) const;
};

// Linear backward control system
//   y_k = A_k y'_{k+1} + B_k z'_{k+1} + C_k v_k + alpha_k
// solved from a zero truncation level, with cost
//   J = 1/2 E[ <M y_0, y_0> + sum_k e^{-rho k} (<Q_k y'_{k+1}, y'_{k+1}>
//        + <L_k z'_{k+1}, z'_{k+1}> + <R_k v_k, v_k>) ].
struct BackwardLQSpec {
    int state_dim = 1;
    int control_dim = 1;
    MatrixSeq A, B;        // n x n
    MatrixSeq C;           // n x m
    NodeVectorSeq forcing;  // alpha_k; empty means zero
    Eigen::MatrixXd M;
    MatrixSeq Q, L;        // weights on y' and z'
    MatrixSeq R;
    double rho = 0.0;

    void validate(int horizon) const;
};

struct LQSolution {
    AdaptedProcess state;    // x for the forward problem, y for the backward one
    AdaptedProcess adjoint;  // the other leg of the coupled pair
    AdaptedProcess control;  // levels 0..horizon-1
    Eigen::VectorXd initial; // optimal initial state (forward problem only)
    double cost = 0.0;
    double stationarity_residual = 0.0;
    FBSDESolution hamiltonian;
};

struct HamiltonianSystem {
    CoefficientSet coeffs;
    DomMonCert cert;
};

// Eliminates the control through the first-order condition and packages the
// resulting coupled system together with a certificate it satisfies.
HamiltonianSystem assemble_flq_hamiltonian(const ForwardLQSpec& spec, int horizon);
HamiltonianSystem assemble_blq_hamiltonian(const BackwardLQSpec& spec, int horizon);

AdaptedProcess flq_state(const ForwardLQSpec& spec, const Eigen::VectorXd& xi, const AdaptedProcess& u,
                         const Lattice& lat, const WeightConfig& w);
double flq_cost(const ForwardLQSpec& spec, const Eigen::VectorXd& xi, const AdaptedProcess& u,
                const Lattice& lat, const WeightConfig& w);
LQSolution solve_flq(const ForwardLQSpec& spec, const Lattice& lat, const WeightConfig& w,
                     const SolverOptions& opts);

AdaptedProcess blq_state(const BackwardLQSpec& spec, const AdaptedProcess& v, const Lattice& lat,
                         const WeightConfig& w);
double blq_cost(const BackwardLQSpec& spec, const AdaptedProcess& v, const Lattice& lat,
                const WeightConfig& w);
LQSolution solve_blq(const BackwardLQSpec& spec, const Lattice& lat, const WeightConfig& w,
                     const SolverOptions& opts);

struct OptimalityReport {
    int trials = 0;
    double min_gap = 0.0;         // most negative cost gap across perturbations
    double max_gap_defect = 0.0;  // worst |gap - explicit quadratic form|
    double stationarity_residual = 0.0;

    bool pass(double gap_tol = 1e-10, double defect_tol = 1e-8) const {
        return min_gap >= -gap_tol && max_gap_defect <= defect_tol;
    }
};

// Random admissible perturbations: every cost gap must be nonnegative and
// must equal the explicit quadratic form in the perturbation.
OptimalityReport verify_flq(const ForwardLQSpec& spec, const LQSolution& sol, const Lattice& lat,
                            const WeightConfig& w, int trials, std::uint64_t seed);
OptimalityReport verify_blq(const BackwardLQSpec& spec, const LQSolution& sol, const Lattice& lat,
                            const WeightConfig& w, int trials, std::uint64_t seed);

// Exact minimizer of the truncated quadratic cost over all node-wise control
// variables (plus the initial state for the forward problem): the Hessian and
// gradient are recovered by probing the cost with basis perturbations, then
// the normal equations are solved. Independent of the coupled-system path.
struct QPOracleResult {
    double cost = 0.0;
    Eigen::VectorXd initial;  // forward problem only
    AdaptedProcess control;
};

QPOracleResult flq_qp_oracle(const ForwardLQSpec& spec, const Lattice& lat, const WeightConfig& w);
QPOracleResult blq_qp_oracle(const BackwardLQSpec& spec, const Lattice& lat, const WeightConfig& w);

}  // namespace fbsde
