#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fbsde/spaces.hpp"

namespace fbsde {

// theta = (x, y', z'): the current forward state together with the one-step
// conditional expectation of the backward variable and of its noise pairing.
struct Theta {
    Eigen::VectorXd x, yp, zp;
};

using ThetaMap = std::function<Eigen::VectorXd(int k, std::int64_t node, const Theta& th)>;
using InitialMap = std::function<Eigen::VectorXd(const Eigen::VectorXd& y0)>;
using MatrixSeq = std::function<Eigen::MatrixXd(int k)>;

MatrixSeq constant_matrix_seq(Eigen::MatrixXd m);
ThetaMap zero_theta_map(int dim);

// Per-argument Lipschitz bounds of the coupled coefficient maps.
struct LipschitzBounds {
    double initial = 0.0;       // boundary coupling map in y
    double forward_x = 0.0;     // drift and diffusion in x
    double backward_pair = 0.0; // generator in (y', z') jointly
    double drift_y = 0.0, drift_z = 0.0;
    double diffusion_y = 0.0, diffusion_z = 0.0;
    double generator_x = 0.0;
};

// Full coefficient bundle of the coupled system
//   x_{k+1} = b(k, theta_k) + sigma(k, theta_k) w_k,
//   y_k     = -f(k+1, theta_k),
//   x_0     = Lambda(y_0).
struct CoefficientSet {
    int dim = 1;
    InitialMap initial;   // Lambda
    ThetaMap drift;       // b
    ThetaMap diffusion;   // sigma
    ThetaMap generator;   // f, indexed by the level k it writes to
    LipschitzBounds lip;
};

enum class CertCase {
    Case1,  // mu > 0, nu = 0: boundary map and drift/diffusion pair dominated
    Case2,  // mu = 0, nu > 0: generator dominated
};

enum class MonotoneSign { Standard, Symmetric };

// Domination-monotonicity certificate: the constants and matrix sequences
// against which the coefficient bundle is checked, and which drive the
// regularized end of the homotopy family.
struct DomMonCert {
    double mu = 0.0, nu = 0.0;
    Eigen::MatrixXd M;   // rows may differ from the state dimension
    MatrixSeq A, B, C;   // per-level matrices, same row count as M is not required
    CertCase case_flag = CertCase::Case1;
    MonotoneSign sign = MonotoneSign::Standard;
    int levels = 1;      // how many distinct levels the sequences span; used to probe sup norms

    // +1 for the standard inequalities, -1 for the mirrored variant.
    double orientation() const { return sign == MonotoneSign::Standard ? 1.0 : -1.0; }

    void validate() const;  // enforces the exactly-one-case rule
};

// Inhomogeneities (xi, phi, psi, gamma) added to the boundary, backward,
// drift and diffusion slots of the homotopy family.
struct DrivingTerms {
    Eigen::VectorXd xi;
    AdaptedProcess phi, psi, gamma;

    static DrivingTerms zero(int dim, const Lattice& lat, int horizon);
};

Eigen::VectorXd eval_P(const DomMonCert& cert, int k, const Eigen::VectorXd& x);
Eigen::VectorXd eval_Q(const DomMonCert& cert, int k, const Eigen::VectorXd& yp, const Eigen::VectorXd& zp);

// f + e^{-rho} b + e^{-rho} sigma at one point.
Eigen::VectorXd upsilon(const CoefficientSet& c, double rho, int k, std::int64_t node, const Theta& th);

// Discounted pairing <df, dx> + e^{-rho}<db, dy'> + e^{-rho}<ds, dz'> of a
// coefficient-triple difference against a theta difference. This is the
// bilinear form behind the monotonicity condition and the duality identity.
double upsilon_pairing(const Eigen::VectorXd& df, const Eigen::VectorXd& db, const Eigen::VectorXd& ds,
                       const Theta& dth, double rho);

struct SamplerConfig {
    std::uint64_t seed = 1;
    int count = 1000;
    double scale = 2.0;
};

struct ConditionViolation {
    std::string condition;
    int k = 0;
    std::int64_t node = 0;
    double lhs = 0.0, rhs = 0.0;
    double margin() const { return rhs - lhs; }
};

struct ConditionReport {
    int samples = 0;
    std::vector<ConditionViolation> violations;
    std::vector<std::string> vacuous;  // sides skipped because their constant is 1/0

    bool pass() const { return violations.empty(); }
};

// Samples point pairs and tests the three domination inequalities. Skipped
// sides (whichever of mu, nu is zero) are reported as vacuous, not passed.
ConditionReport check_domination(const CoefficientSet& c, const DomMonCert& cert, const Lattice& lat,
                                 int horizon, const SamplerConfig& sampler, double tol);

// Samples point pairs and tests the one-sided inequalities on the boundary
// map and on the discounted pairing; flipped when the certificate carries the
// mirrored sign.
ConditionReport check_monotonicity(const CoefficientSet& c, const DomMonCert& cert, double rho,
                                   const Lattice& lat, int horizon, const SamplerConfig& sampler, double tol);

// Blend toward the certificate regularizer: at alpha = 1 the original maps,
// at alpha = 0 a decoupled system solvable in closed form. The drift and
// diffusion regularizers carry the inverse discount e^{rho} so that, under
// the discounted pairing, every blend satisfies the same certificate; the
// generator and boundary regularizers enter the pairing at weight one and
// need no rescaling.
CoefficientSet homotopy_coefficients(const CoefficientSet& c, const DomMonCert& cert, double alpha,
                                     double rho);

// Raises the cross Lipschitz bounds (boundary map, drift/diffusion in the
// pair, generator in x) to the floor induced by the certificate matrices, so
// the whole homotopy family shares one set of constants.
LipschitzBounds inflate_lipschitz(const LipschitzBounds& lip, const DomMonCert& cert, double rho,
                                  int horizon, std::vector<std::string>* log = nullptr);

struct WindowReport {
    bool feasible = false;        // exactly the predicate 24 L1^2 L2^2 < 1
    double lower = 0.0;           // ln(4 L1^2)
    double upper = 0.0;           // -ln(6 L2^2)
    double rho = 0.0;
    bool rho_admissible = false;
};

WindowReport parameter_window_check(double forward_lip, double backward_lip, double rho);

}  // namespace fbsde
