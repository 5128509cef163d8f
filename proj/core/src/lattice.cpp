#include "fbsde/lattice.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace fbsde {

void NoiseModel::validate(double tol) const {
    if (support.empty() || support.size() != probabilities.size())
        throw MomentError("noise model: support and probabilities must be non-empty and equal-sized");
    double mass = 0.0, mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (probabilities[i] <= 0.0)
            throw MomentError("noise model: probabilities must be strictly positive");
        mass += probabilities[i];
        mean += probabilities[i] * support[i];
        second += probabilities[i] * support[i] * support[i];
    }
    if (std::abs(mass - 1.0) > tol)
        throw MomentError("noise model: probabilities sum to " + std::to_string(mass));
    if (std::abs(mean) > tol)
        throw MomentError("noise model: conditional mean is " + std::to_string(mean) + ", expected 0");
    if (std::abs(second - 1.0) > tol)
        throw MomentError("noise model: second moment is " + std::to_string(second) + ", expected 1");
}

NoiseModel rademacher_noise() { return NoiseModel{{1.0, -1.0}, {0.5, 0.5}}; }

Lattice::Lattice(int depth, NoiseModel noise, std::int64_t node_cap) {
    if (depth < 1) throw SizeError("lattice depth must be >= 1");
    noise.validate();
    steps_.assign(static_cast<std::size_t>(depth), noise);
    build(node_cap);
}

Lattice::Lattice(std::vector<NoiseModel> per_level, std::int64_t node_cap) : steps_(std::move(per_level)) {
    if (steps_.empty()) throw SizeError("lattice depth must be >= 1");
    for (const auto& n : steps_) n.validate();
    build(node_cap);
}

void Lattice::build(std::int64_t node_cap) {
    const int d = depth();
    counts_.resize(d + 1);
    counts_[0] = 1;
    for (int k = 0; k < d; ++k) {
        const std::int64_t s = steps_[k].branching();
        if (counts_[k] > node_cap / s)
            throw SizeError("lattice level " + std::to_string(k + 1) + " exceeds the node cap");
        counts_[k + 1] = counts_[k] * s;
    }
    measures_.resize(d + 1);
    measures_[0] = Eigen::VectorXd::Ones(1);
    for (int k = 0; k < d; ++k) {
        const int s = steps_[k].branching();
        measures_[k + 1].resize(counts_[k + 1]);
        for (std::int64_t u = 0; u < counts_[k]; ++u)
            for (int j = 0; j < s; ++j)
                measures_[k + 1][u * s + j] = measures_[k][u] * steps_[k].probabilities[j];
    }
}

const NoiseModel& Lattice::noise(int level) const {
    if (level < 0 || level >= depth())
        throw LevelMismatchError("no noise step at level " + std::to_string(level));
    return steps_[level];
}

std::int64_t Lattice::node_count(int level) const {
    if (level < 0 || level > depth())
        throw LevelMismatchError("level " + std::to_string(level) + " outside lattice of depth " +
                                 std::to_string(depth()));
    return counts_[level];
}

void Lattice::require_child_level(const Eigen::MatrixXd& v, int child_level) const {
    if (child_level < 1 || child_level > depth())
        throw LevelMismatchError("conditional expectation needs a child level in [1, depth]");
    if (v.cols() != counts_[child_level])
        throw LevelMismatchError("variable has " + std::to_string(v.cols()) + " nodes, level " +
                                 std::to_string(child_level) + " has " + std::to_string(counts_[child_level]));
}

Eigen::MatrixXd Lattice::cond_exp(const Eigen::MatrixXd& v, int child_level) const {
    require_child_level(v, child_level);
    const NoiseModel& step = steps_[child_level - 1];
    const int s = step.branching();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), counts_[child_level - 1]);
    for (std::int64_t u = 0; u < out.cols(); ++u)
        for (int j = 0; j < s; ++j) out.col(u) += step.probabilities[j] * v.col(u * s + j);
    return out;
}

Eigen::MatrixXd Lattice::cond_exp_noise(const Eigen::MatrixXd& v, int child_level) const {
    require_child_level(v, child_level);
    const NoiseModel& step = steps_[child_level - 1];
    const int s = step.branching();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.rows(), counts_[child_level - 1]);
    for (std::int64_t u = 0; u < out.cols(); ++u)
        for (int j = 0; j < s; ++j) out.col(u) += step.probabilities[j] * step.support[j] * v.col(u * s + j);
    return out;
}

Eigen::VectorXd Lattice::expectation(const Eigen::MatrixXd& v, int level) const {
    if (level < 0 || level > depth() || v.cols() != counts_[level])
        throw LevelMismatchError("expectation: variable does not match level " + std::to_string(level));
    return v * measures_[level];
}

}  // namespace fbsde
