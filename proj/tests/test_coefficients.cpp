#include <cmath>

#include <doctest.h>

#include "fbsde/coefficients.hpp"
#include "fbsde/rng.hpp"
#include "support/instances.hpp"

using namespace fbsde;
using testing_support::make_monotone_instance;

namespace {

CoefficientSet constant_coeffs(double f, double b, double s) {
    CoefficientSet c;
    c.dim = 1;
    c.initial = [](const Eigen::VectorXd& y0) { return (0.0 * y0).eval(); };
    c.generator = [f](int, std::int64_t, const Theta&) { return Eigen::VectorXd::Constant(1, f).eval(); };
    c.drift = [b](int, std::int64_t, const Theta&) { return Eigen::VectorXd::Constant(1, b).eval(); };
    c.diffusion = [s](int, std::int64_t, const Theta&) { return Eigen::VectorXd::Constant(1, s).eval(); };
    return c;
}

DomMonCert identity_cert_case1(int n, double mu) {
    DomMonCert cert;
    cert.mu = mu;
    cert.nu = 0.0;
    cert.case_flag = CertCase::Case1;
    cert.M = Eigen::MatrixXd::Identity(n, n);
    cert.A = constant_matrix_seq(Eigen::MatrixXd::Zero(1, n));
    cert.B = constant_matrix_seq(Eigen::MatrixXd::Identity(n, n));
    cert.C = constant_matrix_seq(Eigen::MatrixXd::Zero(n, n));
    return cert;
}

}  // namespace

TEST_CASE("certificate case rule") {
    DomMonCert cert = identity_cert_case1(1, 1.0);
    CHECK_NOTHROW(cert.validate());
    cert.nu = 0.5;
    CHECK_THROWS_AS(cert.validate(), CaseMismatchError);
    cert.mu = 0.0;
    cert.case_flag = CertCase::Case2;
    CHECK_NOTHROW(cert.validate());
    cert.nu = 0.0;
    CHECK_THROWS_AS(cert.validate(), CaseMismatchError);
}

TEST_CASE("certificate linear maps") {
    DomMonCert cert;
    cert.A = constant_matrix_seq((Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished());
    cert.B = constant_matrix_seq(Eigen::MatrixXd::Identity(2, 2));
    cert.C = constant_matrix_seq(2.0 * Eigen::MatrixXd::Identity(2, 2));

    CHECK(eval_P(cert, 0, Eigen::Vector2d(0.0, 0.0)).norm() == 0.0);
    CHECK(eval_P(cert, 0, Eigen::Vector2d(1.0, 2.0))(0) == doctest::Approx(1.0));

    const Eigen::VectorXd q = eval_Q(cert, 0, Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0));
    CHECK(q(0) == doctest::Approx(1.0));
    CHECK(q(1) == doctest::Approx(2.0));

    CHECK_THROWS_AS(eval_P(cert, 0, Eigen::Vector3d(1, 2, 3)), ShapeError);
}

TEST_CASE("discounted coefficient sum") {
    const CoefficientSet c = constant_coeffs(1.0, 2.0, 3.0);
    const Theta th{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
    CHECK(upsilon(constant_coeffs(0, 0, 0), 0.0, 0, 0, th).norm() == 0.0);
    CHECK(upsilon(c, 0.0, 0, 0, th)(0) == doctest::Approx(6.0));
    CHECK(upsilon(c, std::log(2.0), 0, 0, th)(0) == doctest::Approx(3.5));
}

TEST_CASE("parameter window: frozen examples and exact equivalence") {
    const WindowReport a = parameter_window_check(0.1, 0.1, 0.0);
    CHECK(a.feasible);
    CHECK(a.lower == doctest::Approx(-3.2188758248682006).epsilon(1e-12));
    CHECK(a.upper == doctest::Approx(2.8134107167600364).epsilon(1e-12));
    CHECK(a.rho_admissible);

    CHECK_FALSE(parameter_window_check(1.0, 1.0, 0.0).feasible);

    const WindowReport c = parameter_window_check(0.4, 0.0, 0.0);
    CHECK(c.feasible);
    CHECK(c.lower == doctest::Approx(-0.4462871026284195).epsilon(1e-12));
    CHECK(std::isinf(c.upper));
    CHECK(c.rho_admissible);

    Rng rng(999);
    for (int t = 0; t < 1000; ++t) {
        const double l1 = rng.uniform(0.0, 1.2), l2 = rng.uniform(0.0, 1.2);
        const bool algebraic = 24.0 * l1 * l1 * l2 * l2 < 1.0;
        CHECK(parameter_window_check(l1, l2, 0.0).feasible == algebraic);
    }
}

TEST_CASE("domination checker on hand-built cases") {
    const Lattice lat(3, rademacher_noise());
    const SamplerConfig sampler{11, 400, 2.0};

    SUBCASE("equality case passes") {
        CoefficientSet c = constant_coeffs(0, 0, 0);
        c.initial = [](const Eigen::VectorXd& y0) { return (-y0).eval(); };  // -mu M'M y with mu=1, M=I
        const ConditionReport rep = check_domination(c, identity_cert_case1(1, 1.0), lat, 3, sampler, 1e-9);
        CHECK(rep.pass());
        CHECK(rep.vacuous.size() == 1);  // generator side skipped in case 1
    }

    SUBCASE("pair-independent drift passes with zero left side") {
        CoefficientSet c = constant_coeffs(0.5, 1.0, -1.0);
        const ConditionReport rep = check_domination(c, identity_cert_case1(1, 2.0), lat, 3, sampler, 1e-9);
        CHECK(rep.pass());
    }

    SUBCASE("drift leaking past the certificate combination is caught") {
        CoefficientSet c = constant_coeffs(0, 0, 0);
        c.drift = [](int, std::int64_t, const Theta& th) { return th.yp; };
        DomMonCert cert = identity_cert_case1(1, 1.0);
        cert.B = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));
        cert.C = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));
        const ConditionReport rep = check_domination(c, cert, lat, 3, sampler, 1e-9);
        CHECK_FALSE(rep.pass());
        CHECK(rep.violations[0].condition == "drift domination");
    }
}

TEST_CASE("monotonicity checker on hand-built cases") {
    const Lattice lat(3, rademacher_noise());
    const SamplerConfig sampler{13, 400, 2.0};

    // boundary-only certificate: the pair combination is switched off
    DomMonCert cert = identity_cert_case1(1, 1.0);
    cert.B = constant_matrix_seq(Eigen::MatrixXd::Zero(1, 1));

    CoefficientSet contracting = constant_coeffs(0, 0, 0);
    contracting.initial = [](const Eigen::VectorXd& y0) { return (-y0).eval(); };
    CHECK(check_monotonicity(contracting, cert, 0.0, lat, 3, sampler, 1e-9).pass());

    CoefficientSet expanding = constant_coeffs(0, 0, 0);
    expanding.initial = [](const Eigen::VectorXd& y0) { return y0.eval(); };
    const ConditionReport rep = check_monotonicity(expanding, cert, 0.0, lat, 3, sampler, 1e-9);
    CHECK_FALSE(rep.pass());
    CHECK(rep.violations[0].condition == "boundary monotonicity");

    // the mirrored orientation accepts the expanding boundary map
    DomMonCert mirrored = cert;
    mirrored.sign = MonotoneSign::Symmetric;
    CHECK(check_monotonicity(expanding, mirrored, 0.0, lat, 3, sampler, 1e-9).pass());
}

TEST_CASE("generated instances pass both checkers in all cases and signs") {
    Rng rng(2024);
    const Lattice lat(3, rademacher_noise());
    for (int t = 0; t < 12; ++t) {
        const int n = 1 + t % 2;
        const double rho = rng.uniform(-0.2, 0.5);
        const CertCase cs = t % 2 == 0 ? CertCase::Case1 : CertCase::Case2;
        const MonotoneSign sign = t < 6 ? MonotoneSign::Standard : MonotoneSign::Symmetric;
        const auto inst = make_monotone_instance(rng, n, rho, cs, 3, sign);
        const SamplerConfig sampler{1000 + static_cast<std::uint64_t>(t), 500, 2.0};
        CHECK(check_domination(inst.coeffs, inst.cert, lat, 3, sampler, 1e-9).pass());
        CHECK(check_monotonicity(inst.coeffs, inst.cert, rho, lat, 3, sampler, 1e-9).pass());
    }
}

TEST_CASE("homotopy blend") {
    Rng rng(55);
    const auto inst = make_monotone_instance(rng, 2, 0.2, CertCase::Case1, 3);
    const Theta th{rng.normal_vector(2), rng.normal_vector(2), rng.normal_vector(2)};
    const Eigen::VectorXd y0 = rng.normal_vector(2);

    SUBCASE("endpoint alpha = 1 reproduces the original maps") {
        const CoefficientSet one = homotopy_coefficients(inst.coeffs, inst.cert, 1.0, inst.rho);
        CHECK((one.drift(1, 0, th) - inst.coeffs.drift(1, 0, th)).norm() < 1e-14);
        CHECK((one.generator(1, 0, th) - inst.coeffs.generator(1, 0, th)).norm() < 1e-14);
        CHECK((one.initial(y0) - inst.coeffs.initial(y0)).norm() < 1e-14);
    }

    SUBCASE("endpoint alpha = 0 is the pure regularizer") {
        const CoefficientSet zero = homotopy_coefficients(inst.coeffs, inst.cert, 0.0, inst.rho);
        CHECK(zero.generator(1, 0, th).norm() == 0.0);  // nu = 0 in case 1
        const Eigen::VectorXd expected =
            -inst.cert.mu * inst.cert.M.transpose() * inst.cert.M * y0;
        CHECK((zero.initial(y0) - expected).norm() < 1e-14);
    }

    SUBCASE("blends interpolate linearly") {
        const CoefficientSet lo = homotopy_coefficients(inst.coeffs, inst.cert, 0.0, inst.rho);
        const CoefficientSet hi = homotopy_coefficients(inst.coeffs, inst.cert, 1.0, inst.rho);
        const CoefficientSet mid = homotopy_coefficients(inst.coeffs, inst.cert, 0.5, inst.rho);
        CHECK((mid.drift(1, 0, th) - 0.5 * (lo.drift(1, 0, th) + hi.drift(1, 0, th))).norm() < 1e-13);
        CHECK((mid.diffusion(1, 0, th) - 0.5 * (lo.diffusion(1, 0, th) + hi.diffusion(1, 0, th))).norm() <
              1e-13);

        // difference of two blends is proportional to (alpha - alpha')
        const CoefficientSet a = homotopy_coefficients(inst.coeffs, inst.cert, 0.7, inst.rho);
        const CoefficientSet b = homotopy_coefficients(inst.coeffs, inst.cert, 0.3, inst.rho);
        const Eigen::VectorXd diff = a.drift(1, 0, th) - b.drift(1, 0, th);
        const Eigen::VectorXd unit = hi.drift(1, 0, th) - lo.drift(1, 0, th);
        CHECK((diff - 0.4 * unit).norm() < 1e-13);
    }

    SUBCASE("every blend still passes the checkers") {
        const Lattice lat(3, rademacher_noise());
        for (double alpha : {0.0, 0.25, 0.75}) {
            const CoefficientSet blend = homotopy_coefficients(inst.coeffs, inst.cert, alpha, inst.rho);
            CHECK(check_domination(blend, inst.cert, lat, 3, {77, 300, 2.0}, 1e-9).pass());
            CHECK(check_monotonicity(blend, inst.cert, inst.rho, lat, 3, {78, 300, 2.0}, 1e-9).pass());
        }
    }
}

TEST_CASE("boundary-map injectivity under full-rank case-1 certificates") {
    Rng rng(321);
    for (int t = 0; t < 8; ++t) {
        const auto inst = make_monotone_instance(rng, 2, 0.1, CertCase::Case1, 3);
        for (int s = 0; s < 50; ++s) {
            const Eigen::VectorXd y = rng.normal_vector(2), ybar = rng.normal_vector(2);
            if ((y - ybar).norm() < 1e-9) continue;
            const double inner = (inst.coeffs.initial(y) - inst.coeffs.initial(ybar)).dot(y - ybar);
            CHECK(inner < 0.0);
        }
    }
}

TEST_CASE("constant inflation raises only the cross bounds") {
    LipschitzBounds lip;
    lip.forward_x = 0.3;
    lip.backward_pair = 0.2;
    lip.initial = 0.1;
    DomMonCert cert = identity_cert_case1(2, 1.5);
    std::vector<std::string> log;
    const LipschitzBounds raised = inflate_lipschitz(lip, cert, 0.0, 1, &log);
    CHECK(raised.forward_x == 0.3);
    CHECK(raised.backward_pair == 0.2);
    CHECK(raised.initial > lip.initial);
    CHECK_FALSE(log.empty());
}
