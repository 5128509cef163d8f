#include "fbsde/lq.hpp"

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "fbsde/rng.hpp"

namespace fbsde {

NodeVectorSeq zero_node_vector(int dim) {
    return [dim](int, std::int64_t) { return Eigen::VectorXd::Zero(dim).eval(); };
}

NodeVectorSeq constant_node_vector(Eigen::VectorXd v) {
    return [v = std::move(v)](int, std::int64_t) { return v; };
}

namespace {

double op_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

double min_eig(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double max_eig(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

void require_symmetric(const Eigen::MatrixXd& m, const std::string& what) {
    if ((m - m.transpose()).norm() > 1e-10 * (1.0 + m.norm())) throw ConfigError(what + " must be symmetric");
}

void require_dims(const Eigen::MatrixXd& m, int rows, int cols, const std::string& what) {
    if (m.rows() != rows || m.cols() != cols)
        throw ShapeError(what + " must be " + std::to_string(rows) + "x" + std::to_string(cols));
}

// guard against 1/0 when taking domination bounds
double inv_or_inf(double v) { return v > 0.0 ? 1.0 / v : std::numeric_limits<double>::infinity(); }

}  // namespace

void ForwardLQSpec::validate(int horizon) const {
    if (state_dim < 1 || control_dim < 1) throw ConfigError("dimensions must be positive");
    if (!A || !B || !C || !D || !Q || !R) throw ConfigError("forward spec is missing matrix sequences");
    require_symmetric(M, "initial-state weight");
    require_dims(M, state_dim, state_dim, "initial-state weight");
    if (min_eig(M) <= 0.0) throw ConfigError("initial-state weight must be positive definite");

    double sup_a = 0.0, sup_c = 0.0;
    for (int k = 0; k < horizon; ++k) {
        require_dims(A(k), state_dim, state_dim, "state gain");
        require_dims(C(k), state_dim, state_dim, "noise-state gain");
        require_dims(B(k), state_dim, control_dim, "control gain");
        require_dims(D(k), state_dim, control_dim, "noise-control gain");
        require_symmetric(Q(k), "state weight");
        require_symmetric(R(k), "control weight");
        if (k == 0 && Q(0).norm() > 1e-14) throw ConfigError("state weight must vanish at level 0");
        if (min_eig(Q(k)) < -1e-12) throw ConfigError("state weights must be nonnegative definite");
        if (min_eig(R(k)) <= 0.0) throw ConfigError("control weights must be uniformly positive definite");
        sup_a = std::max(sup_a, A(k).norm());
        sup_c = std::max(sup_c, C(k).norm());
    }
    const double s = sup_a + sup_c;
    if (s > 0.0 && rho <= std::log(6.0 * s * s))
        throw WindowError("forward problem needs rho > ln(6 (|A|+|C|)^2) = " + std::to_string(std::log(6.0 * s * s)));
}

void BackwardLQSpec::validate(int horizon) const {
    if (state_dim < 1 || control_dim < 1) throw ConfigError("dimensions must be positive");
    if (!A || !B || !C || !Q || !L || !R) throw ConfigError("backward spec is missing matrix sequences");
    require_symmetric(M, "initial-value weight");
    require_dims(M, state_dim, state_dim, "initial-value weight");
    if (min_eig(M) <= 0.0) throw ConfigError("initial-value weight must be positive definite");

    double sup_a = 0.0, sup_b = 0.0;
    for (int k = 0; k < horizon; ++k) {
        require_dims(A(k), state_dim, state_dim, "y' gain");
        require_dims(B(k), state_dim, state_dim, "z' gain");
        require_dims(C(k), state_dim, control_dim, "control gain");
        require_symmetric(Q(k), "y' weight");
        require_symmetric(L(k), "z' weight");
        require_symmetric(R(k), "control weight");
        if (min_eig(Q(k)) < -1e-12 || min_eig(L(k)) < -1e-12)
            throw ConfigError("state weights must be nonnegative definite");
        if (min_eig(R(k)) <= 0.0) throw ConfigError("control weights must be uniformly positive definite");
        sup_a = std::max(sup_a, A(k).norm());
        sup_b = std::max(sup_b, B(k).norm());
    }
    const double s = sup_a + sup_b;
    if (s > 0.0 && rho >= -std::log(6.0 * s * s))
        throw WindowError("backward problem needs rho < -ln(6 (|A|+|B|)^2) = " +
                          std::to_string(-std::log(6.0 * s * s)));
}

namespace {

// First-order condition of the forward problem solved for the control.
std::function<Eigen::VectorXd(int, const Eigen::VectorXd&, const Eigen::VectorXd&)> flq_control_map(
    const ForwardLQSpec& spec) {
    const double disc = std::exp(-spec.rho);
    return [spec, disc](int k, const Eigen::VectorXd& yp, const Eigen::VectorXd& zp) {
        const Eigen::VectorXd pair = disc * (spec.B(k).transpose() * yp + spec.D(k).transpose() * zp);
        return (-spec.R(k).ldlt().solve(pair)).eval();
    };
}

}  // namespace

HamiltonianSystem assemble_flq_hamiltonian(const ForwardLQSpec& spec, int horizon) {
    spec.validate(horizon);
    const int n = spec.state_dim;
    const double disc = std::exp(-spec.rho);
    const Eigen::MatrixXd minv = spec.M.inverse();
    const auto control = flq_control_map(spec);

    HamiltonianSystem ham;
    ham.coeffs.dim = n;
    ham.coeffs.initial = [minv](const Eigen::VectorXd& y0) { return (-(minv * y0)).eval(); };
    ham.coeffs.drift = [spec, control](int k, std::int64_t node, const Theta& th) {
        Eigen::VectorXd v = spec.A(k) * th.x + spec.B(k) * control(k, th.yp, th.zp);
        if (spec.b) v += spec.b(k, node);
        return v;
    };
    ham.coeffs.diffusion = [spec, control](int k, std::int64_t node, const Theta& th) {
        Eigen::VectorXd v = spec.C(k) * th.x + spec.D(k) * control(k, th.yp, th.zp);
        if (spec.sigma) v += spec.sigma(k, node);
        return v;
    };
    ham.coeffs.generator = [spec, disc](int k, std::int64_t node, const Theta& th) {
        (void)node;
        return (-(disc * (spec.A(k).transpose() * th.yp + spec.C(k).transpose() * th.zp) + spec.Q(k) * th.x))
            .eval();
    };

    double sup_ax = 0.0, sup_q = 0.0, dy = 0.0, dz = 0.0, sy = 0.0, sz = 0.0;
    double mu = std::min(1.0, std::sqrt(min_eig(spec.M)));
    for (int k = 0; k < horizon; ++k) {
        const Eigen::MatrixXd rinv = spec.R(k).inverse();
        sup_ax = std::max({sup_ax, op_norm(spec.A(k)), op_norm(spec.C(k))});
        sup_q = std::max(sup_q, op_norm(spec.Q(k)));
        dy = std::max(dy, op_norm(disc * spec.B(k) * rinv * spec.B(k).transpose()));
        dz = std::max(dz, op_norm(disc * spec.B(k) * rinv * spec.D(k).transpose()));
        sy = std::max(sy, op_norm(disc * spec.D(k) * rinv * spec.B(k).transpose()));
        sz = std::max(sz, op_norm(disc * spec.D(k) * rinv * spec.D(k).transpose()));
        mu = std::min({mu, inv_or_inf(max_eig(spec.R(k))), inv_or_inf(op_norm(spec.B(k) * rinv)),
                       inv_or_inf(op_norm(spec.D(k) * rinv))});
    }
    ham.coeffs.lip.initial = op_norm(minv);
    ham.coeffs.lip.forward_x = sup_ax;
    ham.coeffs.lip.backward_pair = disc * sup_ax;
    ham.coeffs.lip.generator_x = sup_q;
    ham.coeffs.lip.drift_y = dy;
    ham.coeffs.lip.drift_z = dz;
    ham.coeffs.lip.diffusion_y = sy;
    ham.coeffs.lip.diffusion_z = sz;

    ham.cert.mu = mu;
    ham.cert.nu = 0.0;
    ham.cert.case_flag = CertCase::Case1;
    ham.cert.sign = MonotoneSign::Standard;
    ham.cert.levels = horizon;
    ham.cert.M = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(spec.M).operatorInverseSqrt();
    ham.cert.A = constant_matrix_seq(Eigen::MatrixXd::Zero(1, n));
    ham.cert.B = [spec, disc](int k) { return (disc * spec.B(k).transpose()).eval(); };
    ham.cert.C = [spec, disc](int k) { return (disc * spec.D(k).transpose()).eval(); };
    return ham;
}

HamiltonianSystem assemble_blq_hamiltonian(const BackwardLQSpec& spec, int horizon) {
    spec.validate(horizon);
    const int n = spec.state_dim;
    const double growth = std::exp(spec.rho);

    HamiltonianSystem ham;
    ham.coeffs.dim = n;
    ham.coeffs.initial = [m = spec.M](const Eigen::VectorXd& y0) { return (-(m * y0)).eval(); };
    ham.coeffs.drift = [spec, growth](int k, std::int64_t, const Theta& th) {
        return (growth * (spec.A(k).transpose() * th.x - spec.Q(k) * th.yp)).eval();
    };
    ham.coeffs.diffusion = [spec, growth](int k, std::int64_t, const Theta& th) {
        return (growth * (spec.B(k).transpose() * th.x - spec.L(k) * th.zp)).eval();
    };
    ham.coeffs.generator = [spec](int k, std::int64_t node, const Theta& th) {
        Eigen::VectorXd v =
            spec.A(k) * th.yp + spec.B(k) * th.zp + spec.C(k) * spec.R(k).ldlt().solve(spec.C(k).transpose() * th.x);
        if (spec.forcing) v += spec.forcing(k, node);
        return (-v).eval();
    };

    double sup_x = 0.0, sup_pair = 0.0, sup_q = 0.0, sup_l = 0.0, sup_gen_x = 0.0;
    double nu = std::numeric_limits<double>::infinity();
    for (int k = 0; k < horizon; ++k) {
        const Eigen::MatrixXd rinv = spec.R(k).inverse();
        sup_x = std::max({sup_x, op_norm(spec.A(k)), op_norm(spec.B(k))});
        sup_pair = sup_x;
        sup_q = std::max(sup_q, op_norm(spec.Q(k)));
        sup_l = std::max(sup_l, op_norm(spec.L(k)));
        sup_gen_x = std::max(sup_gen_x, op_norm(spec.C(k) * rinv * spec.C(k).transpose()));
        nu = std::min({nu, inv_or_inf(max_eig(spec.R(k))), inv_or_inf(op_norm(spec.C(k) * rinv))});
    }
    if (!std::isfinite(nu)) nu = 1.0;  // control never enters; any positive constant certifies
    ham.coeffs.lip.initial = op_norm(spec.M);
    ham.coeffs.lip.forward_x = growth * sup_x;
    ham.coeffs.lip.backward_pair = sup_pair;
    ham.coeffs.lip.generator_x = sup_gen_x;
    ham.coeffs.lip.drift_y = growth * sup_q;
    ham.coeffs.lip.drift_z = 0.0;
    ham.coeffs.lip.diffusion_y = 0.0;
    ham.coeffs.lip.diffusion_z = growth * sup_l;

    ham.cert.mu = 0.0;
    ham.cert.nu = nu;
    ham.cert.case_flag = CertCase::Case2;
    ham.cert.sign = MonotoneSign::Standard;
    ham.cert.levels = horizon;
    ham.cert.M = Eigen::MatrixXd::Zero(1, n);
    ham.cert.A = [spec](int k) { return spec.C(k).transpose().eval(); };
    ham.cert.B = constant_matrix_seq(Eigen::MatrixXd::Zero(1, n));
    ham.cert.C = constant_matrix_seq(Eigen::MatrixXd::Zero(1, n));
    return ham;
}

AdaptedProcess flq_state(const ForwardLQSpec& spec, const Eigen::VectorXd& xi, const AdaptedProcess& u,
                         const Lattice& lat, const WeightConfig& w) {
    const int N = w.horizon;
    if (u.horizon() < N - 1) throw HorizonError("control does not cover the horizon");
    AdaptedProcess x(spec.state_dim, lat, N);
    x.level(0).col(0) = xi;
    for (int k = 0; k < N; ++k) {
        const NoiseModel& step = lat.noise(k);
        const int br = step.branching();
        for (std::int64_t node = 0; node < lat.node_count(k); ++node) {
            const Eigen::VectorXd xk = x.at(k, node);
            const Eigen::VectorXd uk = u.at(k, node);
            Eigen::VectorXd bu = spec.A(k) * xk + spec.B(k) * uk;
            Eigen::VectorXd su = spec.C(k) * xk + spec.D(k) * uk;
            if (spec.b) bu += spec.b(k, node);
            if (spec.sigma) su += spec.sigma(k, node);
            for (int j = 0; j < br; ++j) x.level(k + 1).col(node * br + j) = bu + su * step.support[j];
        }
    }
    return x;
}

namespace {

double quadratic_level_sum(const Eigen::MatrixXd& weight, const Eigen::MatrixXd& values,
                           const Eigen::VectorXd& measures) {
    double total = 0.0;
    for (std::int64_t u = 0; u < values.cols(); ++u)
        total += measures[u] * values.col(u).dot(weight * values.col(u));
    return total;
}

}  // namespace

double flq_cost(const ForwardLQSpec& spec, const Eigen::VectorXd& xi, const AdaptedProcess& u,
                const Lattice& lat, const WeightConfig& w) {
    const AdaptedProcess x = flq_state(spec, xi, u, lat, w);
    double total = xi.dot(spec.M * xi);
    for (int k = 0; k < w.horizon; ++k)
        total += std::exp(-spec.rho * k) * (quadratic_level_sum(spec.Q(k), x.level(k), lat.path_measures(k)) +
                                            quadratic_level_sum(spec.R(k), u.level(k), lat.path_measures(k)));
    return 0.5 * total;
}

LQSolution solve_flq(const ForwardLQSpec& spec, const Lattice& lat, const WeightConfig& w,
                     const SolverOptions& opts) {
    const int N = w.horizon;
    const HamiltonianSystem ham = assemble_flq_hamiltonian(spec, N);
    const DrivingTerms d0 = DrivingTerms::zero(spec.state_dim, lat, N);
    FBSDESolution fb = solve_fbsde(ham.coeffs, ham.cert, d0, lat, w, opts);

    const auto control = flq_control_map(spec);
    const double disc = std::exp(-spec.rho);

    LQSolution out;
    out.state = fb.x;
    out.adjoint = fb.y;
    out.initial = ham.coeffs.initial(fb.y.at(0, 0));
    out.control = AdaptedProcess(spec.control_dim, lat, N - 1);
    double stat = 0.0;
    for (int k = 0; k < N; ++k) {
        const Eigen::MatrixXd yp = lat.cond_exp(fb.y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(fb.y.level(k + 1), k + 1);
        for (std::int64_t node = 0; node < lat.node_count(k); ++node) {
            const Eigen::VectorXd uk = control(k, yp.col(node), zp.col(node));
            out.control.level(k).col(node) = uk;
            const Eigen::VectorXd first_order =
                disc * (spec.B(k).transpose() * yp.col(node) + spec.D(k).transpose() * zp.col(node)) +
                spec.R(k) * uk;
            stat = std::max(stat, first_order.lpNorm<Eigen::Infinity>());
        }
    }
    out.stationarity_residual = stat;
    out.cost = flq_cost(spec, out.initial, out.control, lat, w);
    out.hamiltonian = std::move(fb);
    return out;
}

AdaptedProcess blq_state(const BackwardLQSpec& spec, const AdaptedProcess& v, const Lattice& lat,
                         const WeightConfig& w) {
    const int N = w.horizon;
    if (v.horizon() < N - 1) throw HorizonError("control does not cover the horizon");
    AdaptedProcess y(spec.state_dim, lat, N);
    for (int k = N - 1; k >= 0; --k) {
        const Eigen::MatrixXd yp = lat.cond_exp(y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(y.level(k + 1), k + 1);
        for (std::int64_t node = 0; node < lat.node_count(k); ++node) {
            Eigen::VectorXd val = spec.A(k) * yp.col(node) + spec.B(k) * zp.col(node) + spec.C(k) * v.at(k, node);
            if (spec.forcing) val += spec.forcing(k, node);
            y.level(k).col(node) = val;
        }
    }
    return y;
}

double blq_cost(const BackwardLQSpec& spec, const AdaptedProcess& v, const Lattice& lat,
                const WeightConfig& w) {
    const AdaptedProcess y = blq_state(spec, v, lat, w);
    const Eigen::VectorXd y0 = y.at(0, 0);
    double total = y0.dot(spec.M * y0);
    for (int k = 0; k < w.horizon; ++k) {
        const Eigen::MatrixXd yp = lat.cond_exp(y.level(k + 1), k + 1);
        const Eigen::MatrixXd zp = lat.cond_exp_noise(y.level(k + 1), k + 1);
        total += std::exp(-spec.rho * k) * (quadratic_level_sum(spec.Q(k), yp, lat.path_measures(k)) +
                                            quadratic_level_sum(spec.L(k), zp, lat.path_measures(k)) +
                                            quadratic_level_sum(spec.R(k), v.level(k), lat.path_measures(k)));
    }
    return 0.5 * total;
}

LQSolution solve_blq(const BackwardLQSpec& spec, const Lattice& lat, const WeightConfig& w,
                     const SolverOptions& opts) {
    const int N = w.horizon;
    const HamiltonianSystem ham = assemble_blq_hamiltonian(spec, N);
    const DrivingTerms d0 = DrivingTerms::zero(spec.state_dim, lat, N);
    FBSDESolution fb = solve_fbsde(ham.coeffs, ham.cert, d0, lat, w, opts);

    LQSolution out;
    out.state = fb.y;
    out.adjoint = fb.x;
    out.control = AdaptedProcess(spec.control_dim, lat, N - 1);
    double stat = 0.0;
    for (int k = 0; k < N; ++k) {
        for (std::int64_t node = 0; node < lat.node_count(k); ++node) {
            const Eigen::VectorXd xk = fb.x.at(k, node);
            const Eigen::VectorXd vk = spec.R(k).ldlt().solve(spec.C(k).transpose() * xk);
            out.control.level(k).col(node) = vk;
            stat = std::max(stat, (spec.C(k).transpose() * xk - spec.R(k) * vk).lpNorm<Eigen::Infinity>());
        }
    }
    out.stationarity_residual = stat;
    out.cost = blq_cost(spec, out.control, lat, w);
    out.hamiltonian = std::move(fb);
    return out;
}

namespace {

AdaptedProcess random_control(int dim, const Lattice& lat, int horizon, double scale, Rng& rng) {
    AdaptedProcess p(dim, lat, horizon);
    for (int k = 0; k <= horizon; ++k)
        for (std::int64_t node = 0; node < lat.node_count(k); ++node)
            p.level(k).col(node) = scale * rng.normal_vector(dim);
    return p;
}

}  // namespace

OptimalityReport verify_flq(const ForwardLQSpec& spec, const LQSolution& sol, const Lattice& lat,
                            const WeightConfig& w, int trials, std::uint64_t seed) {
    const int N = w.horizon;
    OptimalityReport rep;
    rep.trials = trials;
    rep.stationarity_residual = sol.stationarity_residual;
    rep.min_gap = std::numeric_limits<double>::infinity();

    // exact re-simulation of the candidate pair keeps the comparison
    // consistent to rounding
    const AdaptedProcess xbar = flq_state(spec, sol.initial, sol.control, lat, w);

    Rng rng(seed);
    const double scale = 0.4;
    for (int t = 0; t < trials; ++t) {
        const Eigen::VectorXd dxi = scale * rng.normal_vector(spec.state_dim);
        const AdaptedProcess du = random_control(spec.control_dim, lat, N - 1, scale, rng);
        const Eigen::VectorXd xi = sol.initial + dxi;
        const AdaptedProcess u = sol.control + du;

        const double gap = flq_cost(spec, xi, u, lat, w) - sol.cost;
        const AdaptedProcess dx = flq_state(spec, xi, u, lat, w) - xbar;
        double qf = dxi.dot(spec.M * dxi);
        for (int k = 0; k < N; ++k)
            qf += std::exp(-spec.rho * k) *
                  (quadratic_level_sum(spec.Q(k), dx.level(k), lat.path_measures(k)) +
                   quadratic_level_sum(spec.R(k), du.level(k), lat.path_measures(k)));
        qf *= 0.5;

        rep.min_gap = std::min(rep.min_gap, gap);
        rep.max_gap_defect = std::max(rep.max_gap_defect, std::abs(gap - qf));
    }
    if (trials == 0) rep.min_gap = 0.0;
    return rep;
}

OptimalityReport verify_blq(const BackwardLQSpec& spec, const LQSolution& sol, const Lattice& lat,
                            const WeightConfig& w, int trials, std::uint64_t seed) {
    const int N = w.horizon;
    OptimalityReport rep;
    rep.trials = trials;
    rep.stationarity_residual = sol.stationarity_residual;
    rep.min_gap = std::numeric_limits<double>::infinity();

    const AdaptedProcess ybar = blq_state(spec, sol.control, lat, w);
    const double cost_bar = blq_cost(spec, sol.control, lat, w);

    Rng rng(seed);
    const double scale = 0.4;
    for (int t = 0; t < trials; ++t) {
        const AdaptedProcess dv = random_control(spec.control_dim, lat, N - 1, scale, rng);
        const AdaptedProcess v = sol.control + dv;

        const double gap = blq_cost(spec, v, lat, w) - cost_bar;
        const AdaptedProcess dy = blq_state(spec, v, lat, w) - ybar;
        const Eigen::VectorXd dy0 = dy.at(0, 0);
        double qf = dy0.dot(spec.M * dy0);
        for (int k = 0; k < N; ++k) {
            const Eigen::MatrixXd dyp = lat.cond_exp(dy.level(k + 1), k + 1);
            const Eigen::MatrixXd dzp = lat.cond_exp_noise(dy.level(k + 1), k + 1);
            qf += std::exp(-spec.rho * k) * (quadratic_level_sum(spec.Q(k), dyp, lat.path_measures(k)) +
                                             quadratic_level_sum(spec.L(k), dzp, lat.path_measures(k)) +
                                             quadratic_level_sum(spec.R(k), dv.level(k), lat.path_measures(k)));
        }
        qf *= 0.5;

        rep.min_gap = std::min(rep.min_gap, gap);
        rep.max_gap_defect = std::max(rep.max_gap_defect, std::abs(gap - qf));
    }
    if (trials == 0) rep.min_gap = 0.0;
    return rep;
}

namespace {

// Shared normal-equations build: the cost is an exact quadratic in the packed
// decision vector, so basis probing recovers the Hessian and gradient exactly.
struct ProbedQuadratic {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd gradient;
    double offset = 0.0;
};

ProbedQuadratic probe_quadratic(const std::function<double(const Eigen::VectorXd&)>& eval, int dims) {
    ProbedQuadratic q;
    q.hessian.resize(dims, dims);
    q.gradient.resize(dims);
    q.offset = eval(Eigen::VectorXd::Zero(dims));
    Eigen::VectorXd plus(dims);
    for (int i = 0; i < dims; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dims);
        e[i] = 1.0;
        plus[i] = eval(e);
        const double minus = eval(-e);
        q.gradient[i] = 0.5 * (plus[i] - minus);
        q.hessian(i, i) = plus[i] + minus - 2.0 * q.offset;
    }
    for (int i = 0; i < dims; ++i) {
        for (int j = i + 1; j < dims; ++j) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(dims);
            e[i] = 1.0;
            e[j] = 1.0;
            const double hij = eval(e) - plus[i] - plus[j] + q.offset;
            q.hessian(i, j) = hij;
            q.hessian(j, i) = hij;
        }
    }
    return q;
}

std::int64_t control_variable_count(const Lattice& lat, int horizon) {
    std::int64_t total = 0;
    for (int k = 0; k < horizon; ++k) total += lat.node_count(k);
    return total;
}

}  // namespace

QPOracleResult flq_qp_oracle(const ForwardLQSpec& spec, const Lattice& lat, const WeightConfig& w) {
    const int N = w.horizon;
    const int n = spec.state_dim, m = spec.control_dim;
    const std::int64_t dims64 = n + m * control_variable_count(lat, N);
    if (dims64 > 4096) throw SizeError("oracle dimension " + std::to_string(dims64) + " too large");
    const int dims = static_cast<int>(dims64);

    auto unpack = [&](const Eigen::VectorXd& vars) {
        Eigen::VectorXd xi = vars.head(n);
        AdaptedProcess u(m, lat, N - 1);
        int at = n;
        for (int k = 0; k < N; ++k)
            for (std::int64_t node = 0; node < lat.node_count(k); ++node, at += m)
                u.level(k).col(node) = vars.segment(at, m);
        return std::make_pair(std::move(xi), std::move(u));
    };
    auto eval = [&](const Eigen::VectorXd& vars) {
        auto [xi, u] = unpack(vars);
        return flq_cost(spec, xi, u, lat, w);
    };

    const ProbedQuadratic q = probe_quadratic(eval, dims);
    const Eigen::VectorXd best = q.hessian.ldlt().solve(-q.gradient);

    QPOracleResult result;
    result.cost = eval(best);
    auto [xi, u] = unpack(best);
    result.initial = std::move(xi);
    result.control = std::move(u);
    return result;
}

QPOracleResult blq_qp_oracle(const BackwardLQSpec& spec, const Lattice& lat, const WeightConfig& w) {
    const int N = w.horizon;
    const int m = spec.control_dim;
    const std::int64_t dims64 = m * control_variable_count(lat, N);
    if (dims64 > 4096) throw SizeError("oracle dimension " + std::to_string(dims64) + " too large");
    const int dims = static_cast<int>(dims64);

    auto unpack = [&](const Eigen::VectorXd& vars) {
        AdaptedProcess v(m, lat, N - 1);
        int at = 0;
        for (int k = 0; k < N; ++k)
            for (std::int64_t node = 0; node < lat.node_count(k); ++node, at += m)
                v.level(k).col(node) = vars.segment(at, m);
        return v;
    };
    auto eval = [&](const Eigen::VectorXd& vars) { return blq_cost(spec, unpack(vars), lat, w); };

    const ProbedQuadratic q = probe_quadratic(eval, dims);
    const Eigen::VectorXd best = q.hessian.ldlt().solve(-q.gradient);

    QPOracleResult result;
    result.cost = eval(best);
    result.control = unpack(best);
    return result;
}

}  // namespace fbsde
