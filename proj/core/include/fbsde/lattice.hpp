#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "fbsde/errors.hpp"

namespace fbsde {

// One step of the driving martingale difference sequence: a finite support
// with weights summing to one, zero mean and unit second moment.
struct NoiseModel {
    std::vector<double> support;
    std::vector<double> probabilities;

    int branching() const { return static_cast<int>(support.size()); }

    // Throws MomentError when the weights or the first two moments are off
    // by more than tol.
    void validate(double tol = 1e-12) const;
};

NoiseModel rademacher_noise();

struct NodeId {
    int level = 0;
    std::int64_t index = 0;
};

// Scenario lattice encoding the filtration of the noise sequence. Depth-k
// nodes are the atoms of the sigma-algebra generated by the first k noise
// steps, so a variable attached to level k is measurable one step behind the
// noise revealed between levels k and k+1. Level 0 is the single root (the
// trivial sigma-algebra): level-0 quantities are deterministic.
//
// Node indices positionally encode the branch history, least recent branch
// most significant: child j of node u at level k has index u * s_k + j.
class Lattice {
public:
    static constexpr std::int64_t default_node_cap = std::int64_t(1) << 24;

    Lattice(int depth, NoiseModel noise, std::int64_t node_cap = default_node_cap);
    explicit Lattice(std::vector<NoiseModel> per_level, std::int64_t node_cap = default_node_cap);

    int depth() const { return static_cast<int>(steps_.size()); }

    // Noise revealed while branching from level k to level k+1.
    const NoiseModel& noise(int level) const;

    std::int64_t node_count(int level) const;

    std::int64_t child_of(int level, std::int64_t node, int branch) const {
        return node * steps_[level].branching() + branch;
    }
    std::int64_t parent_of(int level, std::int64_t node) const {
        return node / steps_[level - 1].branching();
    }
    int branch_of(int level, std::int64_t node) const {
        return static_cast<int>(node % steps_[level - 1].branching());
    }

    double path_measure(int level, std::int64_t node) const { return measures_[level][node]; }
    const Eigen::VectorXd& path_measures(int level) const { return measures_[level]; }

    // E[v | F_{k-1}] for v attached to level k+1 = child_level; the result is
    // attached to level k. Columns index nodes, rows components.
    Eigen::MatrixXd cond_exp(const Eigen::MatrixXd& v, int child_level) const;

    // E[v w_k | F_{k-1}] with w_k the noise revealed into child_level.
    Eigen::MatrixXd cond_exp_noise(const Eigen::MatrixXd& v, int child_level) const;

    // Path-measure average of a level variable.
    Eigen::VectorXd expectation(const Eigen::MatrixXd& v, int level) const;

private:
    void build(std::int64_t node_cap);
    void require_child_level(const Eigen::MatrixXd& v, int child_level) const;

    std::vector<NoiseModel> steps_;          // noise per step k = 0..depth-1
    std::vector<std::int64_t> counts_;       // node counts per level 0..depth
    std::vector<Eigen::VectorXd> measures_;  // path measures per level
};

}  // namespace fbsde
