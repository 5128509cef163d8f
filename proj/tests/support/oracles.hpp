#pragma once

// Brute-force oracles used by the test suites. They rely only on the node
// index contract (child j of node u at level k has index u*s_k + j) and on
// the raw noise weights, recomputing measures from scratch so the lattice
// operators are checked against an independent path.

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fbsde/lattice.hpp"

namespace oracle {

// Branch digits of a node, earliest step first.
inline std::vector<int> branch_path(const fbsde::Lattice& lat, int level, std::int64_t node) {
    std::vector<int> digits(level);
    std::int64_t rest = node;
    for (int k = level - 1; k >= 0; --k) {
        const int s = lat.noise(k).branching();
        digits[k] = static_cast<int>(rest % s);
        rest /= s;
    }
    return digits;
}

inline double path_probability(const fbsde::Lattice& lat, int level, std::int64_t node) {
    double p = 1.0;
    const std::vector<int> digits = branch_path(lat, level, node);
    for (int k = 0; k < level; ++k) p *= lat.noise(k).probabilities[digits[k]];
    return p;
}

// E[v | F_{k-1}] by direct summation over descendants of each level-k node.
inline Eigen::MatrixXd cond_exp(const fbsde::Lattice& lat, const Eigen::MatrixXd& v, int child_level) {
    const int k = child_level - 1;
    const std::int64_t parents = lat.node_count(k);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), parents);
    for (std::int64_t c = 0; c < lat.node_count(child_level); ++c) {
        const std::vector<int> digits = branch_path(lat, child_level, c);
        std::int64_t parent = 0;
        for (int i = 0; i < k; ++i) parent = parent * lat.noise(i).branching() + digits[i];
        out.col(parent) += lat.noise(k).probabilities[digits[k]] * v.col(c);
    }
    return out;
}

// E[v w_k | F_{k-1}] the same way, weighting by the noise value of the final
// branch.
inline Eigen::MatrixXd cond_exp_noise(const fbsde::Lattice& lat, const Eigen::MatrixXd& v, int child_level) {
    const int k = child_level - 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), lat.node_count(k));
    for (std::int64_t c = 0; c < lat.node_count(child_level); ++c) {
        const std::vector<int> digits = branch_path(lat, child_level, c);
        std::int64_t parent = 0;
        for (int i = 0; i < k; ++i) parent = parent * lat.noise(i).branching() + digits[i];
        out.col(parent) +=
            lat.noise(k).probabilities[digits[k]] * lat.noise(k).support[digits[k]] * v.col(c);
    }
    return out;
}

inline Eigen::VectorXd expectation(const fbsde::Lattice& lat, const Eigen::MatrixXd& v, int level) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(v.rows());
    for (std::int64_t u = 0; u < lat.node_count(level); ++u) out += path_probability(lat, level, u) * v.col(u);
    return out;
}

}  // namespace oracle
