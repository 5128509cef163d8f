#pragma once

#include <vector>

#include <Eigen/Core>

#include "fbsde/lattice.hpp"

namespace fbsde {

// Vector-valued process with g_k attached to the depth-k nodes of a lattice,
// which makes each g_k measurable one step behind the noise by construction.
// Levels run 0..horizon.
class AdaptedProcess {
public:
    AdaptedProcess() = default;
    AdaptedProcess(int dim, const Lattice& lat, int horizon);

    int dim() const { return levels_.empty() ? 0 : static_cast<int>(levels_[0].rows()); }
    int horizon() const { return static_cast<int>(levels_.size()) - 1; }

    Eigen::MatrixXd& level(int k) { return levels_[static_cast<std::size_t>(k)]; }
    const Eigen::MatrixXd& level(int k) const { return levels_[static_cast<std::size_t>(k)]; }

    Eigen::VectorXd at(int k, std::int64_t node) const { return levels_[static_cast<std::size_t>(k)].col(node); }

    bool all_finite() const;

    AdaptedProcess& operator+=(const AdaptedProcess& other);
    AdaptedProcess& operator-=(const AdaptedProcess& other);
    AdaptedProcess& operator*=(double c);

private:
    std::vector<Eigen::MatrixXd> levels_;
};

AdaptedProcess operator+(AdaptedProcess a, const AdaptedProcess& b);
AdaptedProcess operator-(AdaptedProcess a, const AdaptedProcess& b);

// Zero-pads a process out to a longer horizon.
AdaptedProcess extend(const AdaptedProcess& g, const Lattice& lat, int horizon);

// Discounted truncation window: sums run over levels 0..horizon with weights
// e^{-rho k}.
struct WeightConfig {
    double rho = 0.0;
    int horizon = 0;
};

// sum_k e^{-rho k} E|g_k|^2 over levels 0..horizon.
double weighted_norm_sq(const AdaptedProcess& g, const WeightConfig& w, const Lattice& lat);

// Squared norm of the pair (x, y): sum of the two weighted norms.
double pair_norm_sq(const AdaptedProcess& x, const AdaptedProcess& y, const WeightConfig& w, const Lattice& lat);

// sum_{k >= from_level} e^{-rho k} E|g_k|^2 over the available levels;
// quantifies what the truncation at the horizon discards.
double tail_bound(const AdaptedProcess& g, const WeightConfig& w, const Lattice& lat, int from_level);

}  // namespace fbsde
