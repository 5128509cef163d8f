#include <cmath>

#include <doctest.h>

#include "fbsde/fbsde.hpp"
#include "fbsde/rng.hpp"
#include "support/instances.hpp"

using namespace fbsde;
using testing_support::make_monotone_instance;
using testing_support::perturb_drift;

namespace {

DomMonCert scalar_cert_case1(double mu, double b_gain, double c_gain) {
    DomMonCert cert;
    cert.mu = mu;
    cert.nu = 0.0;
    cert.case_flag = CertCase::Case1;
    cert.M = Eigen::MatrixXd::Identity(1, 1);
    cert.A = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));
    cert.B = constant_matrix_seq(Eigen::MatrixXd::Constant(1, 1, b_gain));
    cert.C = constant_matrix_seq(Eigen::MatrixXd::Constant(1, 1, c_gain));
    return cert;
}

DomMonCert scalar_cert_case2(double nu) {
    DomMonCert cert;
    cert.mu = 0.0;
    cert.nu = nu;
    cert.case_flag = CertCase::Case2;
    cert.M = Eigen::MatrixXd::Zero(1, 1);
    cert.A = constant_matrix_seq(Eigen::MatrixXd::Identity(1, 1));
    cert.B = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));
    cert.C = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));
    return cert;
}

CoefficientSet zero_coeffs(int n) {
    CoefficientSet c;
    c.dim = n;
    c.initial = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n).eval(); };
    c.drift = zero_theta_map(n);
    c.diffusion = zero_theta_map(n);
    c.generator = zero_theta_map(n);
    return c;
}

}  // namespace

TEST_CASE("decoupled endpoint solves in closed form") {
    const Lattice lat(3, rademacher_noise());
    const WeightConfig w{0.1, 3};

    SUBCASE("case 1, zero data gives the zero pair") {
        const FBSDESolution sol = solve_alpha0(scalar_cert_case1(1.0, 0.0, 0.0),
                                               DrivingTerms::zero(1, lat, 3), lat, w);
        CHECK(sol.residual < 1e-14);
        CHECK(pair_norm_sq(sol.x, sol.y, w, lat) == 0.0);
    }

    SUBCASE("case 1, constant backward inhomogeneity") {
        DrivingTerms d = DrivingTerms::zero(1, lat, 3);
        for (int k = 0; k <= 3; ++k) d.phi.level(k).setConstant(0.7);
        const FBSDESolution sol = solve_alpha0(scalar_cert_case1(1.0, 0.0, 0.0), d, lat, w);
        for (int k = 0; k < 3; ++k) CHECK((sol.y.level(k).array() + 0.7).abs().maxCoeff() < 1e-15);
        CHECK(sol.y.level(3).norm() == 0.0);
        CHECK(sol.x.at(0, 0)(0) == doctest::Approx(0.7));  // -mu M'M y0
        CHECK(sol.x.level(1).norm() == 0.0);
        CHECK(sol.residual < 1e-14);
    }

    SUBCASE("case 2, drift inhomogeneity feeds the backward leg") {
        DrivingTerms d = DrivingTerms::zero(1, lat, 3);
        for (int k = 0; k <= 3; ++k) d.psi.level(k).setConstant(1.3);
        const FBSDESolution sol = solve_alpha0(scalar_cert_case2(1.0), d, lat, w);
        CHECK(sol.x.at(0, 0)(0) == 0.0);
        for (int k = 1; k <= 3; ++k) CHECK((sol.x.level(k).array() - 1.3).abs().maxCoeff() < 1e-15);
        CHECK(sol.y.at(0, 0)(0) == 0.0);
        for (int k = 1; k < 3; ++k) CHECK((sol.y.level(k).array() - 1.3).abs().maxCoeff() < 1e-15);
        CHECK(sol.residual < 1e-14);
    }

    SUBCASE("case flag inconsistency is rejected") {
        DomMonCert bad = scalar_cert_case1(0.0, 0.0, 0.0);  // mu = 0 contradicts case 1
        CHECK_THROWS_AS(solve_alpha0(bad, DrivingTerms::zero(1, lat, 3), lat, w), CaseMismatchError);
    }
}

TEST_CASE("homotopy step map") {
    Rng rng(42);
    const Lattice lat(3, rademacher_noise());
    const WeightConfig w{0.2, 3};
    const auto inst = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 3);
    const DrivingTerms d = DrivingTerms::zero(1, lat, 3);
    const SolverOptions opts;

    const FBSDESolution base = solve_alpha0(inst.cert, d, lat, w);

    SUBCASE("zero step returns the base solution") {
        const FBSDESolution same = continuation_step(base, 0.0, 0.0, inst.coeffs, inst.cert, d, lat, w, opts);
        CHECK(std::sqrt(pair_norm_sq(same.x - base.x, same.y - base.y, w, lat)) < 1e-12);
    }

    SUBCASE("zero data with vanishing coefficients fixes the origin") {
        const CoefficientSet zc = zero_coeffs(1);
        const FBSDESolution z0 = solve_alpha0(inst.cert, d, lat, w);
        const FBSDESolution step = continuation_step(z0, 0.0, 0.25, zc, inst.cert, d, lat, w, opts);
        CHECK(pair_norm_sq(step.x, step.y, w, lat) < 1e-20);
        CHECK(step.trace.back().iterations <= 2);
    }

    SUBCASE("flattened and nested inner solves agree from the decoupled end") {
        const FBSDESolution flat =
            continuation_step(base, 0.0, 0.2, inst.coeffs, inst.cert, d, lat, w, opts, false);
        const FBSDESolution nested =
            continuation_step(base, 0.0, 0.2, inst.coeffs, inst.cert, d, lat, w, opts, true);
        CHECK(std::sqrt(pair_norm_sq(flat.x - nested.x, flat.y - nested.y, w, lat)) < 1e-8);
        CHECK_THROWS_AS(
            continuation_step(base, 0.5, 0.1, inst.coeffs, inst.cert, d, lat, w, opts, true),
            ConfigError);
    }
}

TEST_CASE("continuation against direct sweeps on random instances") {
    Rng rng(7001);
    int solved = 0;
    for (int t = 0; t < 12; ++t) {
        const int n = 1 + t % 2;
        const int depth = 3 + t % 3;
        const double rho = rng.uniform(-0.2, 0.5);
        const CertCase cs = t % 2 == 0 ? CertCase::Case1 : CertCase::Case2;
        const Lattice lat(depth, rademacher_noise());
        const WeightConfig w{rho, depth};
        const auto inst = make_monotone_instance(rng, n, rho, cs, depth);
        const DrivingTerms d = DrivingTerms::zero(n, lat, depth);
        SolverOptions opts;
        opts.inner_tol = 1e-11;

        const FBSDESolution cont = solve_continuation(inst.coeffs, inst.cert, d, lat, w, opts);
        const FBSDESolution direct = solve_direct(inst.coeffs, inst.cert, d, lat, w, opts);
        ++solved;

        CHECK(cont.residual <= 1e-8);
        CHECK(direct.residual <= 1e-8);
        CHECK(std::sqrt(pair_norm_sq(cont.x - direct.x, cont.y - direct.y, w, lat)) < 1e-6);
        for (const auto& rec : cont.trace)
            if (rec.accepted && rec.delta > 0.0) CHECK(rec.contraction_ratio < 1.0);
    }
    CHECK(solved == 12);
}

TEST_CASE("mirrored-sign instances solve as well") {
    Rng rng(7002);
    const Lattice lat(4, rademacher_noise());
    const WeightConfig w{0.15, 4};
    const auto inst = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 4, MonotoneSign::Symmetric);
    const DrivingTerms d = DrivingTerms::zero(1, lat, 4);
    SolverOptions opts;

    const FBSDESolution cont = solve_continuation(inst.coeffs, inst.cert, d, lat, w, opts);
    const FBSDESolution direct = solve_direct(inst.coeffs, inst.cert, d, lat, w, opts);
    CHECK(cont.residual <= 1e-8);
    CHECK(std::sqrt(pair_norm_sq(cont.x - direct.x, cont.y - direct.y, w, lat)) < 1e-6);
}

TEST_CASE("system residual measures violations") {
    Rng rng(88);
    const Lattice lat(3, rademacher_noise());
    const WeightConfig w{0.1, 3};
    const auto inst = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 3);
    const DrivingTerms d = DrivingTerms::zero(1, lat, 3);
    SolverOptions opts;
    const FBSDESolution sol = solve_direct(inst.coeffs, inst.cert, d, lat, w, opts);
    CHECK(fbsde_residual(inst.coeffs, d, sol, lat, w) <= opts.inner_tol);

    // a point perturbation is visible in the residual
    FBSDESolution bent = sol;
    bent.y.level(1)(0, 0) += 1e-3;
    CHECK(fbsde_residual(inst.coeffs, d, bent, lat, w) >= 1e-4);

    // zero processes against pure driving data reproduce the data magnitude
    DrivingTerms loud = DrivingTerms::zero(1, lat, 3);
    for (int k = 0; k <= 3; ++k) loud.psi.level(k).setConstant(2.0);
    FBSDESolution zero_sol;
    zero_sol.x = AdaptedProcess(1, lat, 3);
    zero_sol.y = AdaptedProcess(1, lat, 3);
    CHECK(fbsde_residual(zero_coeffs(1), loud, zero_sol, lat, w) == doctest::Approx(2.0));
}

TEST_CASE("duality identity and telescoping defects") {
    Rng rng(3100);
    const Lattice lat(5, rademacher_noise());
    const WeightConfig w{0.25, 5};
    SolverOptions opts;
    opts.inner_tol = 1e-12;

    const auto a = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 5);
    const auto b = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 5);
    const DrivingTerms d = DrivingTerms::zero(1, lat, 5);

    const FBSDESolution sa = solve_direct(a.coeffs, a.cert, d, lat, w, opts);
    const FBSDESolution sb = solve_direct(b.coeffs, b.cert, d, lat, w, opts);

    const double gap = duality_gap(a.coeffs, d, sa, b.coeffs, d, sb, w.rho, lat, 5);
    CHECK(std::abs(gap) < 1e-8);

    for (double defect : telescoping_defects(a.coeffs, d, sa, b.coeffs, d, sb, w.rho, lat, 5))
        CHECK(defect < 1e-10);

    // identical systems: the gap degenerates to zero exactly
    const double self_gap = duality_gap(a.coeffs, d, sa, a.coeffs, d, sa, w.rho, lat, 5);
    CHECK(self_gap == doctest::Approx(0.0));

    // negative control: a non-solution breaks the identity
    FBSDESolution fake = sb;
    for (int k = 0; k <= 5; ++k) fake.y.level(k).array() += 0.25;
    const double broken = duality_gap(a.coeffs, d, sa, b.coeffs, d, fake, w.rho, lat, 5);
    CHECK(std::abs(broken) > 1e-4);
}

TEST_CASE("solution and stability functionals") {
    Rng rng(5150);
    const Lattice lat(4, rademacher_noise());
    const WeightConfig w{0.2, 4};
    SolverOptions opts;
    opts.inner_tol = 1e-12;
    const auto inst = make_monotone_instance(rng, 1, w.rho, CertCase::Case1, 4);
    const DrivingTerms d = DrivingTerms::zero(1, lat, 4);

    const FBSDESolution cont = solve_continuation(inst.coeffs, inst.cert, d, lat, w, opts);
    const FBSDESolution direct = solve_direct(inst.coeffs, inst.cert, d, lat, w, opts);

    SUBCASE("identical systems: uniqueness at fixed truncation") {
        const EstimateRatioReport rep =
            stability_data_ratio(inst.coeffs, d, cont, inst.coeffs, d, direct, lat, w);
        CHECK(rep.data == doctest::Approx(0.0));
        CHECK(rep.solution_norm_sq < 1e-12);
    }

    SUBCASE("zero coefficients: both sides vanish") {
        const CoefficientSet zc = zero_coeffs(1);
        const FBSDESolution zsol = solve_direct(zc, inst.cert, d, lat, w, opts);
        const EstimateRatioReport rep = solution_data_ratio(zc, d, zsol, lat, w);
        CHECK(rep.solution_norm_sq == doctest::Approx(0.0));
        CHECK(rep.data == doctest::Approx(0.0));
    }

    SUBCASE("solution norm is bounded by a finite multiple of the data") {
        const EstimateRatioReport rep = solution_data_ratio(inst.coeffs, d, cont, lat, w);
        CHECK(rep.data > 0.0);
        CHECK(std::isfinite(rep.ratio));
    }

    SUBCASE("perturbation distance scales linearly") {
        const double eps = 1e-3;
        const CoefficientSet big = perturb_drift(inst.coeffs, eps);
        const CoefficientSet small = perturb_drift(inst.coeffs, eps / 2.0);
        const FBSDESolution sol_big = solve_direct(big, inst.cert, d, lat, w, opts);
        const FBSDESolution sol_small = solve_direct(small, inst.cert, d, lat, w, opts);
        const double dist_big = std::sqrt(pair_norm_sq(sol_big.x - cont.x, sol_big.y - cont.y, w, lat));
        const double dist_small =
            std::sqrt(pair_norm_sq(sol_small.x - cont.x, sol_small.y - cont.y, w, lat));
        CHECK(dist_big / dist_small > 1.33);
        CHECK(dist_big / dist_small < 3.0);
    }
}

TEST_CASE("step collapse on an invalid certificate") {
    Rng rng(61);
    const Lattice lat(3, rademacher_noise());
    const WeightConfig w{0.0, 3};

    // strongly expanding coefficients falsely certified as contracting
    CoefficientSet liar = zero_coeffs(1);
    liar.initial = [](const Eigen::VectorXd& y0) { return (25.0 * y0).eval(); };
    liar.generator = [](int, std::int64_t, const Theta& th) {
        return (25.0 * th.x + Eigen::VectorXd::Ones(1)).eval();
    };
    liar.lip.initial = 25.0;
    liar.lip.generator_x = 25.0;
    SolverOptions opts;
    opts.max_inner_iters = 40;
    CHECK_THROWS_AS(
        solve_continuation(liar, scalar_cert_case1(1.0, 0.5, 0.5), DrivingTerms::zero(1, lat, 3), lat, w, opts),
        StepCollapseError);
}
