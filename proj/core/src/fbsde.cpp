#include "fbsde/fbsde.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fbsde {

namespace {

struct PairSlices {
    Eigen::MatrixXd yp, zp;  // both on level k, derived from y_{k+1}
};

PairSlices pair_slices(const AdaptedProcess& y, int k, const Lattice& lat) {
    return {lat.cond_exp(y.level(k + 1), k + 1), lat.cond_exp_noise(y.level(k + 1), k + 1)};
}

void require_driving(const DrivingTerms& d, int dim, int horizon) {
    if (d.xi.size() != dim || d.phi.dim() != dim || d.phi.horizon() < horizon || d.psi.horizon() < horizon ||
        d.gamma.horizon() < horizon)
        throw ShapeError("driving terms do not match the system dimension/horizon");
}

// The fully regularized coefficient bundle; the alpha = 0 member of the
// homotopy family.
CoefficientSet regularizer_coefficients(const DomMonCert& cert, int dim, double rho) {
    CoefficientSet zero;
    zero.dim = dim;
    zero.initial = [dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim).eval(); };
    zero.drift = zero_theta_map(dim);
    zero.diffusion = zero_theta_map(dim);
    zero.generator = zero_theta_map(dim);
    return homotopy_coefficients(zero, cert, 0.0, rho);
}

}  // namespace

FBSDESolution solve_alpha0(const DomMonCert& cert, const DrivingTerms& d, const Lattice& lat,
                           const WeightConfig& w) {
    cert.validate();
    const int dim = static_cast<int>(d.xi.size());
    const int N = w.horizon;
    if (N < 1 || N > lat.depth()) throw HorizonError("solve_alpha0: horizon must lie in [1, depth]");
    require_driving(d, dim, N);
    const double s = cert.orientation();

    FBSDESolution sol;
    sol.x = AdaptedProcess(dim, lat, N);
    sol.y = AdaptedProcess(dim, lat, N);

    if (cert.case_flag == CertCase::Case1) {
        // Backward part is free of the forward state: y_k = -phi_k.
        const double rgain = s * cert.mu * std::exp(w.rho);
        for (int k = 0; k < N; ++k) sol.y.level(k) = -d.phi.level(k);
        sol.x.level(0).col(0) =
            -s * cert.mu * (cert.M.transpose() * (cert.M * sol.y.at(0, 0))) + d.xi;
        for (int k = 0; k < N; ++k) {
            const PairSlices ps = pair_slices(sol.y, k, lat);
            const NoiseModel& step = lat.noise(k);
            const int br = step.branching();
            for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
                const Eigen::VectorXd q = eval_Q(cert, k, ps.yp.col(u), ps.zp.col(u));
                const Eigen::VectorXd bu = -rgain * (cert.B(k).transpose() * q) + d.psi.at(k, u);
                const Eigen::VectorXd su = -rgain * (cert.C(k).transpose() * q) + d.gamma.at(k, u);
                for (int j = 0; j < br; ++j) sol.x.level(k + 1).col(u * br + j) = bu + su * step.support[j];
            }
        }
    } else {
        // Forward part is free of the backward state: plain recursion from xi.
        sol.x.level(0).col(0) = d.xi;
        for (int k = 0; k < N; ++k) {
            const NoiseModel& step = lat.noise(k);
            const int br = step.branching();
            for (std::int64_t u = 0; u < lat.node_count(k); ++u)
                for (int j = 0; j < br; ++j)
                    sol.x.level(k + 1).col(u * br + j) = d.psi.at(k, u) + d.gamma.at(k, u) * step.support[j];
        }
        for (int k = 0; k < N; ++k)
            for (std::int64_t u = 0; u < lat.node_count(k); ++u)
                sol.y.level(k).col(u) =
                    s * cert.nu * (cert.A(k).transpose() * eval_P(cert, k, sol.x.at(k, u))) - d.phi.at(k, u);
    }

    if (!sol.x.all_finite() || !sol.y.all_finite())
        throw NonFiniteError("solve_alpha0 produced non-finite values");
    sol.residual = fbsde_residual(regularizer_coefficients(cert, dim, w.rho), d, sol, lat, w);
    sol.total_inner_iterations = 1;
    return sol;
}

FBSDESolution solve_direct(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                           const Lattice& lat, const WeightConfig& w, const SolverOptions& opts,
                           const FBSDESolution* warm) {
    const int N = w.horizon;
    if (N < 1 || N > lat.depth()) throw HorizonError("solve_direct: horizon must lie in [1, depth]");
    require_driving(d, c.dim, N);
    if (opts.damping <= 0.0 || opts.damping > 1.0) throw ConfigError("damping must lie in (0, 1]");

    FBSDESolution sol;
    if (warm) {
        sol.x = warm->x;
        sol.y = warm->y;
    } else {
        sol.x = AdaptedProcess(c.dim, lat, N);
        sol.y = AdaptedProcess(c.dim, lat, N);
    }

    double best = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < opts.max_inner_iters; ++iter) {
        // backward sweep given the current forward state
        sol.y.level(N).setZero();
        for (int k = N - 1; k >= 0; --k) {
            const PairSlices ps = pair_slices(sol.y, k, lat);
            for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
                const Theta th{sol.x.at(k, u), ps.yp.col(u), ps.zp.col(u)};
                sol.y.level(k).col(u) = -(c.generator(k, u, th) + d.phi.at(k, u));
            }
        }
        // damped boundary update, then forward sweep given the backward state
        sol.x.level(0).col(0) = (1.0 - opts.damping) * sol.x.at(0, 0) +
                                opts.damping * (c.initial(sol.y.at(0, 0)) + d.xi);
        for (int k = 0; k < N; ++k) {
            const PairSlices ps = pair_slices(sol.y, k, lat);
            const NoiseModel& step = lat.noise(k);
            const int br = step.branching();
            for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
                const Theta th{sol.x.at(k, u), ps.yp.col(u), ps.zp.col(u)};
                const Eigen::VectorXd bu = c.drift(k, u, th) + d.psi.at(k, u);
                const Eigen::VectorXd su = c.diffusion(k, u, th) + d.gamma.at(k, u);
                for (int j = 0; j < br; ++j) sol.x.level(k + 1).col(u * br + j) = bu + su * step.support[j];
            }
        }
        ++sol.total_inner_iterations;

        if (!sol.x.all_finite() || !sol.y.all_finite())
            throw DivergenceError("direct sweeps produced non-finite values");
        sol.residual = fbsde_residual(c, d, sol, lat, w);
        if (sol.residual <= opts.inner_tol) return sol;
        if (sol.residual > 1e6 * (1.0 + best))
            throw DivergenceError("direct sweeps diverged: residual " + std::to_string(sol.residual));
        best = std::min(best, sol.residual);
    }
    throw DivergenceError("direct sweeps did not reach the residual target after " +
                          std::to_string(opts.max_inner_iters) + " iterations; best " + std::to_string(best));
}

namespace {

// Driving terms of the step map: the original terms shifted by delta times
// the target coefficients and the certificate regularizer, both evaluated on
// the given iterate.
DrivingTerms step_driving(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                          const FBSDESolution& cur, double delta, double rho, const Lattice& lat,
                          int horizon) {
    const double s = cert.orientation();
    const double rgain = s * delta * cert.mu * std::exp(rho);
    DrivingTerms td = d;
    for (int k = 0; k < horizon; ++k) {
        const PairSlices ps = pair_slices(cur.y, k, lat);
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Theta th{cur.x.at(k, u), ps.yp.col(u), ps.zp.col(u)};
            const Eigen::VectorXd q = eval_Q(cert, k, th.yp, th.zp);
            const Eigen::VectorXd p = eval_P(cert, k, th.x);
            td.psi.level(k).col(u) += delta * c.drift(k, u, th) + rgain * (cert.B(k).transpose() * q);
            td.gamma.level(k).col(u) += delta * c.diffusion(k, u, th) + rgain * (cert.C(k).transpose() * q);
            td.phi.level(k).col(u) +=
                delta * c.generator(k, u, th) + s * delta * cert.nu * (cert.A(k).transpose() * p);
        }
    }
    const Eigen::VectorXd y0 = cur.y.at(0, 0);
    td.xi += delta * c.initial(y0) + s * delta * cert.mu * (cert.M.transpose() * (cert.M * y0));
    return td;
}

}  // namespace

FBSDESolution continuation_step(const FBSDESolution& base, double alpha0, double delta,
                                const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                                const Lattice& lat, const WeightConfig& w, const SolverOptions& opts,
                                bool nested_inner) {
    if (nested_inner && alpha0 != 0.0)
        throw ConfigError("nested inner solves are only available from alpha0 = 0");
    const CoefficientSet calpha =
        nested_inner ? CoefficientSet{} : homotopy_coefficients(c, cert, alpha0, w.rho);

    SolverOptions inner = opts;
    inner.inner_tol = opts.inner_tol * 0.1;

    FBSDESolution cur = base;
    double prev_dist = std::numeric_limits<double>::infinity();
    double worst_ratio = 0.0;
    int inner_total = base.total_inner_iterations;
    int grew = 0;
    for (int iter = 1; iter <= opts.max_inner_iters; ++iter) {
        const DrivingTerms td = step_driving(c, cert, d, cur, delta, w.rho, lat, w.horizon);
        FBSDESolution next;
        if (nested_inner) {
            next = solve_alpha0(cert, td, lat, w);
        } else {
            // the sweep damping is an internal control of the inner solve:
            // halve it on divergence before giving up on the step
            bool solved = false;
            for (SolverOptions attempt = inner; attempt.damping >= opts.damping / 16.0;
                 attempt.damping *= 0.5) {
                try {
                    next = solve_direct(calpha, cert, td, lat, w, attempt, &cur);
                    solved = true;
                    break;
                } catch (const DivergenceError&) {
                }
            }
            if (!solved)
                throw NonContractionError("inner solve failed during the homotopy step at alpha = " +
                                          std::to_string(alpha0));
        }
        inner_total += next.total_inner_iterations;

        const double dist = std::sqrt(pair_norm_sq(next.x - cur.x, next.y - cur.y, w, lat));
        const double ratio = prev_dist > 0.0 ? dist / prev_dist : 0.0;
        worst_ratio = std::max(worst_ratio, std::isfinite(ratio) ? ratio : 0.0);
        cur = next;
        cur.total_inner_iterations = inner_total;

        if (dist <= opts.inner_tol) {
            cur.residual =
                fbsde_residual(homotopy_coefficients(c, cert, alpha0 + delta, w.rho), d, cur, lat, w);
            cur.trace = base.trace;
            cur.trace.push_back({alpha0, alpha0 + delta, delta, iter, worst_ratio, cur.residual, true});
            return cur;
        }
        if (std::isfinite(prev_dist) && ratio >= 1.0) {
            if (++grew >= 4)
                throw NonContractionError("homotopy step map is not contracting: iterate distance " +
                                          std::to_string(dist));
        } else {
            grew = 0;
        }
        prev_dist = dist;
    }
    throw NonContractionError("homotopy step did not converge within the iteration budget");
}

FBSDESolution solve_continuation(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                                 const Lattice& lat, const WeightConfig& w, const SolverOptions& opts) {
    if (opts.delta_init <= 0.0 || opts.delta_init > 1.0) throw ConfigError("delta_init must lie in (0, 1]");

    FBSDESolution sol = solve_alpha0(cert, d, lat, w);
    sol.trace.push_back({0.0, 0.0, 0.0, 1, 0.0, sol.residual, true});

    double alpha = 0.0;
    double delta = opts.delta_init;
    while (alpha < 1.0 - 1e-14) {
        const double step = std::min(delta, 1.0 - alpha);
        try {
            sol = continuation_step(sol, alpha, step, c, cert, d, lat, w, opts);
            alpha += step;
            delta = std::min(2.0 * step, opts.delta_init);
        } catch (const NonContractionError&) {
            sol.trace.push_back({alpha, alpha + step, step, 0, 1.0, 0.0, false});
            delta = step / 2.0;
            if (delta < 1e-6)
                throw StepCollapseError("homotopy step collapsed below 1e-6 at alpha = " +
                                        std::to_string(alpha) + "; certificate likely invalid");
        }
    }

    sol.residual = fbsde_residual(c, d, sol, lat, w);
    if (sol.residual > opts.inner_tol) {
        // final polish with the target coefficients; keep the unpolished
        // iterate when the sweeps do not settle
        try {
            FBSDESolution polished = solve_direct(c, cert, d, lat, w, opts, &sol);
            polished.trace = sol.trace;
            sol = polished;
        } catch (const DivergenceError&) {
        }
    }
    return sol;
}

FBSDESolution solve_fbsde(const CoefficientSet& c, const DomMonCert& cert, const DrivingTerms& d,
                          const Lattice& lat, const WeightConfig& w, const SolverOptions& opts) {
    return opts.mode == SolverOptions::Mode::Continuation ? solve_continuation(c, cert, d, lat, w, opts)
                                                          : solve_direct(c, cert, d, lat, w, opts);
}

double fbsde_residual(const CoefficientSet& c, const DrivingTerms& d, const FBSDESolution& sol,
                      const Lattice& lat, const WeightConfig& w) {
    const int N = w.horizon;
    double worst = (sol.x.at(0, 0) - c.initial(sol.y.at(0, 0)) - d.xi).lpNorm<Eigen::Infinity>();
    worst = std::max(worst, sol.y.level(N).lpNorm<Eigen::Infinity>());
    for (int k = 0; k < N; ++k) {
        const PairSlices ps = pair_slices(sol.y, k, lat);
        const NoiseModel& step = lat.noise(k);
        const int br = step.branching();
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Theta th{sol.x.at(k, u), ps.yp.col(u), ps.zp.col(u)};
            const double backward =
                (sol.y.at(k, u) + c.generator(k, u, th) + d.phi.at(k, u)).lpNorm<Eigen::Infinity>();
            worst = std::max(worst, backward);
            const Eigen::VectorXd bu = c.drift(k, u, th) + d.psi.at(k, u);
            const Eigen::VectorXd su = c.diffusion(k, u, th) + d.gamma.at(k, u);
            for (int j = 0; j < br; ++j) {
                const double forward =
                    (sol.x.at(k + 1, u * br + j) - bu - su * step.support[j]).lpNorm<Eigen::Infinity>();
                worst = std::max(worst, forward);
            }
        }
    }
    return worst;
}

EstimateRatioReport solution_data_ratio(const CoefficientSet& c, const DrivingTerms& d,
                                        const FBSDESolution& sol, const Lattice& lat, const WeightConfig& w) {
    EstimateRatioReport rep;
    rep.solution_norm_sq = pair_norm_sq(sol.x, sol.y, w, lat);

    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(c.dim);
    const Theta th0{zero, zero, zero};
    double data = (c.initial(zero) + d.xi).squaredNorm();
    for (int k = 0; k < w.horizon; ++k) {
        double drift_sum = 0.0, diff_sum = 0.0, gen_sum = 0.0;
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const double m = lat.path_measure(k, u);
            drift_sum += m * (c.drift(k, u, th0) + d.psi.at(k, u)).squaredNorm();
            diff_sum += m * (c.diffusion(k, u, th0) + d.gamma.at(k, u)).squaredNorm();
            gen_sum += m * (c.generator(k, u, th0) + d.phi.at(k, u)).squaredNorm();
        }
        data += std::exp(-w.rho * k) * (drift_sum + diff_sum) + std::exp(-w.rho * (k + 1)) * gen_sum;
    }
    rep.data = data;
    rep.ratio = data > 0.0 ? rep.solution_norm_sq / data : (rep.solution_norm_sq > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return rep;
}

EstimateRatioReport stability_data_ratio(const CoefficientSet& ca, const DrivingTerms& da,
                                         const FBSDESolution& sa, const CoefficientSet& cb,
                                         const DrivingTerms& db, const FBSDESolution& sb, const Lattice& lat,
                                         const WeightConfig& w) {
    EstimateRatioReport rep;
    rep.solution_norm_sq = pair_norm_sq(sa.x - sb.x, sa.y - sb.y, w, lat);

    double data = (ca.initial(sb.y.at(0, 0)) + da.xi - cb.initial(sb.y.at(0, 0)) - db.xi).squaredNorm();
    for (int k = 0; k < w.horizon; ++k) {
        const PairSlices ps = pair_slices(sb.y, k, lat);
        double drift_sum = 0.0, diff_sum = 0.0, gen_sum = 0.0;
        for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
            const Theta th{sb.x.at(k, u), ps.yp.col(u), ps.zp.col(u)};
            const double m = lat.path_measure(k, u);
            drift_sum += m * (ca.drift(k, u, th) + da.psi.at(k, u) - cb.drift(k, u, th) - db.psi.at(k, u))
                                 .squaredNorm();
            diff_sum += m * (ca.diffusion(k, u, th) + da.gamma.at(k, u) - cb.diffusion(k, u, th) -
                             db.gamma.at(k, u))
                                .squaredNorm();
            gen_sum += m * (ca.generator(k, u, th) + da.phi.at(k, u) - cb.generator(k, u, th) -
                            db.phi.at(k, u))
                               .squaredNorm();
        }
        data += std::exp(-w.rho * k) * (drift_sum + diff_sum) + std::exp(-w.rho * (k + 1)) * gen_sum;
    }
    rep.data = data;
    rep.ratio = data > 0.0 ? rep.solution_norm_sq / data : (rep.solution_norm_sq > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return rep;
}

namespace {

// Discounted pairing of the full coefficient difference (inhomogeneities
// included) between the two systems at one level; the common integrand of the
// duality gap and the telescoping identity.
double pairing_level(const CoefficientSet& ca, const DrivingTerms& da, const FBSDESolution& sa,
                     const CoefficientSet& cb, const DrivingTerms& db, const FBSDESolution& sb, double rho,
                     const Lattice& lat, int k) {
    const PairSlices pa = pair_slices(sa.y, k, lat);
    const PairSlices pb = pair_slices(sb.y, k, lat);
    double level_sum = 0.0;
    for (std::int64_t u = 0; u < lat.node_count(k); ++u) {
        const Theta tha{sa.x.at(k, u), pa.yp.col(u), pa.zp.col(u)};
        const Theta thb{sb.x.at(k, u), pb.yp.col(u), pb.zp.col(u)};
        const Eigen::VectorXd df =
            ca.generator(k, u, tha) + da.phi.at(k, u) - cb.generator(k, u, thb) - db.phi.at(k, u);
        const Eigen::VectorXd dbv =
            ca.drift(k, u, tha) + da.psi.at(k, u) - cb.drift(k, u, thb) - db.psi.at(k, u);
        const Eigen::VectorXd dsv =
            ca.diffusion(k, u, tha) + da.gamma.at(k, u) - cb.diffusion(k, u, thb) - db.gamma.at(k, u);
        const Theta dth{tha.x - thb.x, tha.yp - thb.yp, tha.zp - thb.zp};
        level_sum += lat.path_measure(k, u) * upsilon_pairing(df, dbv, dsv, dth, rho);
    }
    return level_sum;
}

}  // namespace

double duality_gap(const CoefficientSet& ca, const DrivingTerms& da, const FBSDESolution& sa,
                   const CoefficientSet& cb, const DrivingTerms& db, const FBSDESolution& sb, double rho,
                   const Lattice& lat, int horizon) {
    double gap = 0.0;
    for (int k = 0; k < horizon; ++k)
        gap += std::exp(-rho * k) * pairing_level(ca, da, sa, cb, db, sb, rho, lat, k);
    const Eigen::VectorXd yhat0 = sa.y.at(0, 0) - sb.y.at(0, 0);
    gap += (ca.initial(sa.y.at(0, 0)) + da.xi - cb.initial(sb.y.at(0, 0)) - db.xi).dot(yhat0);
    return gap;
}

std::vector<double> telescoping_defects(const CoefficientSet& ca, const DrivingTerms& da,
                                        const FBSDESolution& sa, const CoefficientSet& cb,
                                        const DrivingTerms& db, const FBSDESolution& sb, double rho,
                                        const Lattice& lat, int horizon) {
    std::vector<double> defects;
    defects.reserve(static_cast<std::size_t>(horizon));
    auto cross = [&](int k) {
        double total = 0.0;
        for (std::int64_t u = 0; u < lat.node_count(k); ++u)
            total += lat.path_measure(k, u) *
                     (sa.x.at(k, u) - sb.x.at(k, u)).dot(sa.y.at(k, u) - sb.y.at(k, u));
        return total;
    };
    for (int k = 0; k < horizon; ++k) {
        const double lhs = std::exp(-rho * (k + 1)) * cross(k + 1) - std::exp(-rho * k) * cross(k);
        const double rhs = std::exp(-rho * k) * pairing_level(ca, da, sa, cb, db, sb, rho, lat, k);
        defects.push_back(std::abs(lhs - rhs));
    }
    return defects;
}

}  // namespace fbsde
