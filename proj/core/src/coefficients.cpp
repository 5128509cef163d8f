#include "fbsde/coefficients.hpp"

#include <cmath>
#include <limits>

#include "fbsde/rng.hpp"

namespace fbsde {

MatrixSeq constant_matrix_seq(Eigen::MatrixXd m) {
    return [m = std::move(m)](int) { return m; };
}

ThetaMap zero_theta_map(int dim) {
    return [dim](int, std::int64_t, const Theta&) { return Eigen::VectorXd::Zero(dim).eval(); };
}

void DomMonCert::validate() const {
    const bool case1_ok = mu > 0.0 && nu == 0.0;
    const bool case2_ok = mu == 0.0 && nu > 0.0;
    if (case_flag == CertCase::Case1 && !case1_ok)
        throw CaseMismatchError("certificate case 1 requires mu > 0 and nu = 0");
    if (case_flag == CertCase::Case2 && !case2_ok)
        throw CaseMismatchError("certificate case 2 requires mu = 0 and nu > 0");
}

DrivingTerms DrivingTerms::zero(int dim, const Lattice& lat, int horizon) {
    DrivingTerms d;
    d.xi = Eigen::VectorXd::Zero(dim);
    d.phi = AdaptedProcess(dim, lat, horizon);
    d.psi = AdaptedProcess(dim, lat, horizon);
    d.gamma = AdaptedProcess(dim, lat, horizon);
    return d;
}

Eigen::VectorXd eval_P(const DomMonCert& cert, int k, const Eigen::VectorXd& x) {
    const Eigen::MatrixXd a = cert.A(k);
    if (a.cols() != x.size()) throw ShapeError("eval_P: matrix and state dimensions disagree");
    return a * x;
}

Eigen::VectorXd eval_Q(const DomMonCert& cert, int k, const Eigen::VectorXd& yp, const Eigen::VectorXd& zp) {
    const Eigen::MatrixXd b = cert.B(k);
    const Eigen::MatrixXd c = cert.C(k);
    if (b.cols() != yp.size() || c.cols() != zp.size())
        throw ShapeError("eval_Q: matrix and argument dimensions disagree");
    return b * yp + c * zp;
}

Eigen::VectorXd upsilon(const CoefficientSet& c, double rho, int k, std::int64_t node, const Theta& th) {
    const double disc = std::exp(-rho);
    return c.generator(k, node, th) + disc * c.drift(k, node, th) + disc * c.diffusion(k, node, th);
}

double upsilon_pairing(const Eigen::VectorXd& df, const Eigen::VectorXd& db, const Eigen::VectorXd& ds,
                       const Theta& dth, double rho) {
    const double disc = std::exp(-rho);
    return df.dot(dth.x) + disc * db.dot(dth.yp) + disc * ds.dot(dth.zp);
}

namespace {

struct SamplePair {
    Theta th, thbar;
    Eigen::VectorXd y, ybar;
};

// Mixes rough Gaussian points, axis-aligned points and near-duplicates so the
// checks probe both the bulk and the small-difference margins.
SamplePair draw_pair(Rng& rng, int n, double scale, int kind) {
    SamplePair s;
    auto draw = [&](int which) -> Eigen::VectorXd {
        if (which == 1) {  // axis-aligned
            Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
            v[rng.uniform_int(0, n - 1)] = rng.uniform(-scale, scale);
            return v;
        }
        return (scale * rng.normal_vector(n)).eval();
    };
    const int kth = kind % 3;
    s.th = Theta{draw(kth == 1), draw(kth == 1), draw(kth == 1)};
    s.y = draw(kth == 1);
    if (kth == 2) {  // near-duplicate pair
        const double eps = 1e-7;
        s.thbar = Theta{s.th.x + eps * draw(0), s.th.yp + eps * draw(0), s.th.zp + eps * draw(0)};
        s.ybar = s.y + eps * draw(0);
    } else {
        s.thbar = Theta{draw(kth == 1), draw(kth == 1), draw(kth == 1)};
        s.ybar = draw(kth == 1);
    }
    return s;
}

}  // namespace

ConditionReport check_domination(const CoefficientSet& c, const DomMonCert& cert, const Lattice& lat,
                                 int horizon, const SamplerConfig& sampler, double tol) {
    cert.validate();
    ConditionReport rep;
    const bool case1 = cert.case_flag == CertCase::Case1;
    if (case1) {
        rep.vacuous.push_back("generator domination");
    } else {
        rep.vacuous.push_back("boundary domination");
        rep.vacuous.push_back("drift domination");
        rep.vacuous.push_back("diffusion domination");
    }

    Rng rng(sampler.seed);
    const int n = c.dim;
    const int kmax = std::max(horizon - 1, 0);
    for (int i = 0; i < sampler.count; ++i) {
        const int k = rng.uniform_int(0, kmax);
        const std::int64_t node = static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(lat.node_count(k)));
        const SamplePair s = draw_pair(rng, n, sampler.scale, i);
        ++rep.samples;

        if (case1) {
            const double inv_mu = 1.0 / cert.mu;
            {
                const double lhs = (c.initial(s.y) - c.initial(s.ybar)).norm();
                const double rhs = inv_mu * (cert.M * (s.y - s.ybar)).norm();
                if (lhs > rhs + tol) rep.violations.push_back({"boundary domination", k, node, lhs, rhs});
            }
            Theta same_x = s.thbar;
            same_x.x = s.th.x;  // drift/diffusion domination holds the state fixed
            const double rhs = inv_mu * eval_Q(cert, k, s.th.yp - same_x.yp, s.th.zp - same_x.zp).norm();
            {
                const double lhs = (c.drift(k, node, s.th) - c.drift(k, node, same_x)).norm();
                if (lhs > rhs + tol) rep.violations.push_back({"drift domination", k, node, lhs, rhs});
            }
            {
                const double lhs = (c.diffusion(k, node, s.th) - c.diffusion(k, node, same_x)).norm();
                if (lhs > rhs + tol) rep.violations.push_back({"diffusion domination", k, node, lhs, rhs});
            }
        } else {
            Theta same_pair = s.thbar;
            same_pair.yp = s.th.yp;  // generator domination holds the pair fixed
            same_pair.zp = s.th.zp;
            const double lhs = (c.generator(k, node, s.th) - c.generator(k, node, same_pair)).norm();
            const double rhs = (1.0 / cert.nu) * eval_P(cert, k, s.th.x - same_pair.x).norm();
            if (lhs > rhs + tol) rep.violations.push_back({"generator domination", k, node, lhs, rhs});
        }
    }
    return rep;
}

ConditionReport check_monotonicity(const CoefficientSet& c, const DomMonCert& cert, double rho,
                                   const Lattice& lat, int horizon, const SamplerConfig& sampler, double tol) {
    cert.validate();
    ConditionReport rep;
    Rng rng(sampler.seed);
    const int n = c.dim;
    const int kmax = std::max(horizon - 1, 0);
    const double s_sign = cert.orientation();

    for (int i = 0; i < sampler.count; ++i) {
        const int k = rng.uniform_int(0, kmax);
        const std::int64_t node = static_cast<std::int64_t>(rng.next() % static_cast<std::uint64_t>(lat.node_count(k)));
        const SamplePair s = draw_pair(rng, n, sampler.scale, i);
        ++rep.samples;

        {
            const Eigen::VectorXd yhat = s.y - s.ybar;
            const double inner = (c.initial(s.y) - c.initial(s.ybar)).dot(yhat);
            const double quad = cert.mu * (cert.M * yhat).squaredNorm();
            if (s_sign * inner > -quad + tol)
                rep.violations.push_back({"boundary monotonicity", k, node, s_sign * inner, -quad});
        }
        {
            const Eigen::VectorXd df = c.generator(k, node, s.th) - c.generator(k, node, s.thbar);
            const Eigen::VectorXd db = c.drift(k, node, s.th) - c.drift(k, node, s.thbar);
            const Eigen::VectorXd ds = c.diffusion(k, node, s.th) - c.diffusion(k, node, s.thbar);
            const Theta dth{s.th.x - s.thbar.x, s.th.yp - s.thbar.yp, s.th.zp - s.thbar.zp};
            const double inner = upsilon_pairing(df, db, ds, dth, rho);
            const double quad = cert.nu * eval_P(cert, k, dth.x).squaredNorm() +
                                cert.mu * eval_Q(cert, k, dth.yp, dth.zp).squaredNorm();
            if (s_sign * inner > -quad + tol)
                rep.violations.push_back({"coupled monotonicity", k, node, s_sign * inner, -quad});
        }
    }
    return rep;
}

CoefficientSet homotopy_coefficients(const CoefficientSet& c, const DomMonCert& cert, double alpha,
                                     double rho) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("homotopy parameter must lie in [0, 1]");
    cert.validate();
    const double s = cert.orientation();
    const double rmu = s * (1.0 - alpha) * cert.mu * std::exp(rho);  // undoes the pairing discount
    const double rnu = s * (1.0 - alpha) * cert.nu;

    CoefficientSet out;
    out.dim = c.dim;
    out.lip = inflate_lipschitz(c.lip, cert, rho, cert.levels, nullptr);

    const Eigen::MatrixXd mtm = cert.M.transpose() * cert.M;
    const double rmu0 = s * (1.0 - alpha) * cert.mu;
    out.initial = [init = c.initial, alpha, rmu0, mtm](const Eigen::VectorXd& y0) {
        return (alpha * init(y0) - rmu0 * (mtm * y0)).eval();
    };
    out.drift = [drift = c.drift, cert, alpha, rmu](int k, std::int64_t node, const Theta& th) {
        return (alpha * drift(k, node, th) - rmu * (cert.B(k).transpose() * eval_Q(cert, k, th.yp, th.zp)))
            .eval();
    };
    out.diffusion = [diffusion = c.diffusion, cert, alpha, rmu](int k, std::int64_t node, const Theta& th) {
        return (alpha * diffusion(k, node, th) - rmu * (cert.C(k).transpose() * eval_Q(cert, k, th.yp, th.zp)))
            .eval();
    };
    out.generator = [generator = c.generator, cert, alpha, rnu](int k, std::int64_t node, const Theta& th) {
        return (alpha * generator(k, node, th) - rnu * (cert.A(k).transpose() * eval_P(cert, k, th.x))).eval();
    };
    return out;
}

LipschitzBounds inflate_lipschitz(const LipschitzBounds& lip, const DomMonCert& cert, double rho,
                                  int horizon, std::vector<std::string>* log) {
    double sup_a = 0.0, sup_b = 0.0, sup_c = 0.0;
    for (int k = 0; k < std::max(horizon, 1); ++k) {
        sup_a = std::max(sup_a, cert.A(k).norm());
        sup_b = std::max(sup_b, cert.B(k).norm());
        sup_c = std::max(sup_c, cert.C(k).norm());
    }
    const double base = cert.M.norm() + sup_a + sup_b + sup_c;
    const double floor = std::max(cert.mu, cert.nu) * std::max(1.0, std::exp(rho)) * base * base;

    LipschitzBounds out = lip;
    auto raise = [&](double& field, const char* name) {
        if (field < floor) {
            if (log)
                log->push_back(std::string("raised ") + name + " Lipschitz bound from " + std::to_string(field) +
                               " to the certificate floor " + std::to_string(floor));
            field = floor;
        }
    };
    raise(out.initial, "boundary-map");
    raise(out.drift_y, "drift-y");
    raise(out.drift_z, "drift-z");
    raise(out.diffusion_y, "diffusion-y");
    raise(out.diffusion_z, "diffusion-z");
    raise(out.generator_x, "generator-x");
    return out;
}

WindowReport parameter_window_check(double forward_lip, double backward_lip, double rho) {
    WindowReport rep;
    rep.rho = rho;
    const double l1 = forward_lip, l2 = backward_lip;
    rep.feasible = 24.0 * l1 * l1 * l2 * l2 < 1.0;
    rep.lower = l1 > 0.0 ? std::log(4.0 * l1 * l1) : -std::numeric_limits<double>::infinity();
    rep.upper = l2 > 0.0 ? -std::log(6.0 * l2 * l2) : std::numeric_limits<double>::infinity();
    rep.rho_admissible = rep.feasible && rep.lower < rho && rho < rep.upper;
    return rep;
}

}  // namespace fbsde
