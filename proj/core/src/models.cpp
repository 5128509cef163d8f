#include "fbsde/models.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace fbsde {

using nlohmann::json;

Eigen::MatrixXd parse_matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(what + ": expected a 2-d array");
    const std::size_t rows = j.size(), cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].size() != cols) throw ConfigError(what + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    if (!m.allFinite()) throw ConfigError(what + ": non-finite entries");
    return m;
}

Eigen::VectorXd parse_vector(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    if (!v.allFinite()) throw ConfigError(what + ": non-finite entries");
    return v;
}

namespace {

double op_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0 || m.norm() == 0.0) return 0.0;
    return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

Eigen::MatrixXd matrix_or(const json& params, const std::string& key, int rows, int cols, double diag) {
    if (params.contains(key)) return parse_matrix(params.at(key), key);
    return diag * Eigen::MatrixXd::Identity(rows, cols);
}

Eigen::VectorXd vector_or_zero(const json& params, const std::string& key, int dim) {
    if (params.contains(key)) return parse_vector(params.at(key), key);
    return Eigen::VectorXd::Zero(dim);
}

// Linear maps in all slots; the certificate is whatever the caller supplies.
ModelInstance build_linear(const json& params, const DomMonCert* user_cert) {
    const int n = params.value("dim", 1);
    if (!user_cert) throw ConfigError("the linear model needs an explicit certificate");

    ModelInstance inst;
    inst.cert = *user_cert;
    inst.coeffs.dim = n;

    const Eigen::MatrixXd lg = matrix_or(params.value("boundary", json::object()), "gain", n, n, 0.0);
    const Eigen::VectorXd lo = vector_or_zero(params.value("boundary", json::object()), "offset", n);
    inst.coeffs.initial = [lg, lo](const Eigen::VectorXd& y0) { return (lg * y0 + lo).eval(); };

    struct Slot {
        Eigen::MatrixXd x, y, z;
        Eigen::VectorXd offset;
    };
    auto parse_slot = [&](const std::string& key) {
        const json block = params.value(key, json::object());
        return Slot{matrix_or(block, "x", n, n, 0.0), matrix_or(block, "y", n, n, 0.0),
                    matrix_or(block, "z", n, n, 0.0), vector_or_zero(block, "offset", n)};
    };
    const Slot bs = parse_slot("drift"), ss = parse_slot("diffusion"), fs = parse_slot("generator");
    auto as_map = [](const Slot& s) {
        return [s](int, std::int64_t, const Theta& th) {
            return (s.x * th.x + s.y * th.yp + s.z * th.zp + s.offset).eval();
        };
    };
    inst.coeffs.drift = as_map(bs);
    inst.coeffs.diffusion = as_map(ss);
    inst.coeffs.generator = as_map(fs);

    inst.coeffs.lip.initial = op_norm(lg);
    inst.coeffs.lip.forward_x = std::max(op_norm(bs.x), op_norm(ss.x));
    inst.coeffs.lip.backward_pair = std::max(op_norm(fs.y), op_norm(fs.z));
    inst.coeffs.lip.drift_y = op_norm(bs.y);
    inst.coeffs.lip.drift_z = op_norm(bs.z);
    inst.coeffs.lip.diffusion_y = op_norm(ss.y);
    inst.coeffs.lip.diffusion_z = op_norm(ss.z);
    inst.coeffs.lip.generator_x = op_norm(fs.x);
    return inst;
}

// Componentwise smooth clamp g(t) = t + eps tanh(t): Lipschitz 1 + eps and
// strongly monotone with constant 1. The pair dependence of drift and
// diffusion factors through the certificate combination q = beta y' + gamma z'
// and the linear x cross terms cancel in the discounted pairing, so the
// derived certificate holds by construction.
ModelInstance build_saturating(const json& params, double rho) {
    const int n = params.value("dim", 1);
    const double a_boundary = params.value("boundary_gain", 1.0);
    const double a_gen = params.value("generator_gain", 0.5);
    const double kappa = params.value("pair_gain", 0.4);
    const double beta = params.value("pair_y", 1.0);
    const double gamma = params.value("pair_z", 0.5);
    const double kx = params.value("drift_x", 0.2);
    const double eps = params.value("epsilon", 0.25);
    if (a_boundary <= 0.0 || kappa <= 0.0 || beta < 0.0 || gamma < 0.0 || eps < 0.0 || a_gen < 0.0 || kx < 0.0)
        throw ConfigError("saturating model: gains must be nonnegative, boundary_gain and pair_gain positive");
    if (kx > 0.0 && rho <= std::log(6.0 * kx * kx))
        throw WindowError("saturating model needs rho > ln(6 drift_x^2)");

    const Eigen::VectorXd ob = vector_or_zero(params, "boundary_offset", n);
    const Eigen::VectorXd od = vector_or_zero(params, "drift_offset", n);
    const Eigen::VectorXd os = vector_or_zero(params, "diffusion_offset", n);
    const Eigen::VectorXd of = vector_or_zero(params, "generator_offset", n);

    auto clamp = [eps](const Eigen::VectorXd& v) {
        return (v.array() + eps * v.array().tanh()).matrix().eval();
    };
    const double disc = std::exp(-rho), grow = std::exp(rho);

    ModelInstance inst;
    inst.coeffs.dim = n;
    inst.coeffs.initial = [a_boundary, clamp, ob](const Eigen::VectorXd& y0) {
        return (-a_boundary * clamp(y0) + ob).eval();
    };
    inst.coeffs.drift = [kx, grow, kappa, beta, gamma, clamp, od](int, std::int64_t, const Theta& th) {
        return (kx * th.x - grow * kappa * beta * clamp(beta * th.yp + gamma * th.zp) + od).eval();
    };
    inst.coeffs.diffusion = [grow, kappa, beta, gamma, clamp, os](int, std::int64_t, const Theta& th) {
        return (-grow * kappa * gamma * clamp(beta * th.yp + gamma * th.zp) + os).eval();
    };
    inst.coeffs.generator = [a_gen, disc, kx, clamp, of](int, std::int64_t, const Theta& th) {
        return (-a_gen * clamp(th.x) - disc * kx * th.yp + of).eval();
    };

    inst.coeffs.lip.initial = a_boundary * (1.0 + eps);
    inst.coeffs.lip.forward_x = kx;
    inst.coeffs.lip.backward_pair = disc * kx;
    inst.coeffs.lip.drift_y = grow * kappa * beta * beta * (1.0 + eps);
    inst.coeffs.lip.drift_z = grow * kappa * beta * gamma * (1.0 + eps);
    inst.coeffs.lip.diffusion_y = grow * kappa * gamma * beta * (1.0 + eps);
    inst.coeffs.lip.diffusion_z = grow * kappa * gamma * gamma * (1.0 + eps);
    inst.coeffs.lip.generator_x = a_gen * (1.0 + eps);

    double mu = std::min({a_boundary, 1.0 / (a_boundary * (1.0 + eps)), kappa});
    if (beta > 0.0) mu = std::min(mu, disc / (kappa * beta * (1.0 + eps)));
    if (gamma > 0.0) mu = std::min(mu, disc / (kappa * gamma * (1.0 + eps)));
    inst.cert.mu = mu;
    inst.cert.nu = 0.0;
    inst.cert.case_flag = CertCase::Case1;
    inst.cert.M = Eigen::MatrixXd::Identity(n, n);
    inst.cert.A = constant_matrix_seq(Eigen::MatrixXd::Zero(1, n));
    inst.cert.B = constant_matrix_seq(beta * Eigen::MatrixXd::Identity(n, n));
    inst.cert.C = constant_matrix_seq(gamma * Eigen::MatrixXd::Identity(n, n));
    return inst;
}

MatrixSeq level_weight_seq(Eigen::MatrixXd m, bool zero_at_origin) {
    return [m = std::move(m), zero_at_origin](int k) {
        if (zero_at_origin && k == 0) return Eigen::MatrixXd::Zero(m.rows(), m.cols()).eval();
        return m;
    };
}

ModelInstance build_lq_flq(const json& params, double rho, int horizon) {
    ForwardLQSpec spec;
    spec.state_dim = params.value("state_dim", 1);
    spec.control_dim = params.value("control_dim", 1);
    const int n = spec.state_dim, m = spec.control_dim;
    spec.A = constant_matrix_seq(matrix_or(params, "A", n, n, 0.0));
    spec.C = constant_matrix_seq(matrix_or(params, "C", n, n, 0.0));
    spec.B = constant_matrix_seq(matrix_or(params, "B", n, m, 0.0));
    spec.D = constant_matrix_seq(matrix_or(params, "D", n, m, 0.0));
    spec.M = matrix_or(params, "M", n, n, 1.0);
    spec.Q = level_weight_seq(matrix_or(params, "Q", n, n, 0.0), true);  // level-0 weight vanishes
    spec.R = constant_matrix_seq(matrix_or(params, "R", m, m, 1.0));
    spec.b = constant_node_vector(vector_or_zero(params, "b", n));
    spec.sigma = constant_node_vector(vector_or_zero(params, "sigma", n));
    spec.rho = rho;

    ModelInstance inst;
    HamiltonianSystem ham = assemble_flq_hamiltonian(spec, horizon);
    inst.coeffs = std::move(ham.coeffs);
    inst.cert = std::move(ham.cert);
    inst.flq = std::move(spec);
    return inst;
}

ModelInstance build_lq_blq(const json& params, double rho, int horizon) {
    BackwardLQSpec spec;
    spec.state_dim = params.value("state_dim", 1);
    spec.control_dim = params.value("control_dim", 1);
    const int n = spec.state_dim, m = spec.control_dim;
    spec.A = constant_matrix_seq(matrix_or(params, "A", n, n, 0.0));
    spec.B = constant_matrix_seq(matrix_or(params, "B", n, n, 0.0));
    spec.C = constant_matrix_seq(matrix_or(params, "C", n, m, 1.0));
    spec.M = matrix_or(params, "M", n, n, 1.0);
    spec.Q = constant_matrix_seq(matrix_or(params, "Q", n, n, 0.0));
    spec.L = constant_matrix_seq(matrix_or(params, "L", n, n, 0.0));
    spec.R = constant_matrix_seq(matrix_or(params, "R", m, m, 1.0));
    spec.forcing = constant_node_vector(vector_or_zero(params, "forcing", n));
    spec.rho = rho;

    ModelInstance inst;
    HamiltonianSystem ham = assemble_blq_hamiltonian(spec, horizon);
    inst.coeffs = std::move(ham.coeffs);
    inst.cert = std::move(ham.cert);
    inst.blq = std::move(spec);
    return inst;
}

}  // namespace

ModelInstance build_model(const std::string& name, const json& params, double rho, int horizon,
                          const DomMonCert* user_cert) {
    if (name == "linear") return build_linear(params, user_cert);
    if (name == "saturating") {
        ModelInstance inst = build_saturating(params, rho);
        if (user_cert) inst.cert = *user_cert;  // allow overriding the derived certificate
        return inst;
    }
    if (name == "lq-flq") return build_lq_flq(params, rho, horizon);
    if (name == "lq-blq") return build_lq_blq(params, rho, horizon);
    throw ConfigError("unknown model '" + name + "'");
}

std::vector<std::string> registered_models() { return {"linear", "saturating", "lq-flq", "lq-blq"}; }

}  // namespace fbsde
