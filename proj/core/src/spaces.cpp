#include "fbsde/spaces.hpp"

#include <cmath>
#include <string>

namespace fbsde {

AdaptedProcess::AdaptedProcess(int dim, const Lattice& lat, int horizon) {
    if (horizon < 0 || horizon > lat.depth())
        throw HorizonError("process horizon " + std::to_string(horizon) + " outside lattice depth " +
                           std::to_string(lat.depth()));
    levels_.reserve(static_cast<std::size_t>(horizon) + 1);
    for (int k = 0; k <= horizon; ++k) levels_.push_back(Eigen::MatrixXd::Zero(dim, lat.node_count(k)));
}

bool AdaptedProcess::all_finite() const {
    for (const auto& m : levels_)
        if (!m.allFinite()) return false;
    return true;
}

namespace {
void require_same_shape(const AdaptedProcess& a, const AdaptedProcess& b) {
    if (a.horizon() != b.horizon() || a.dim() != b.dim())
        throw ShapeError("process shapes differ: dim " + std::to_string(a.dim()) + "/" + std::to_string(b.dim()) +
                         ", horizon " + std::to_string(a.horizon()) + "/" + std::to_string(b.horizon()));
}
}  // namespace

AdaptedProcess& AdaptedProcess::operator+=(const AdaptedProcess& other) {
    require_same_shape(*this, other);
    for (std::size_t k = 0; k < levels_.size(); ++k) levels_[k] += other.levels_[k];
    return *this;
}

AdaptedProcess& AdaptedProcess::operator-=(const AdaptedProcess& other) {
    require_same_shape(*this, other);
    for (std::size_t k = 0; k < levels_.size(); ++k) levels_[k] -= other.levels_[k];
    return *this;
}

AdaptedProcess& AdaptedProcess::operator*=(double c) {
    for (auto& m : levels_) m *= c;
    return *this;
}

AdaptedProcess operator+(AdaptedProcess a, const AdaptedProcess& b) { return a += b; }
AdaptedProcess operator-(AdaptedProcess a, const AdaptedProcess& b) { return a -= b; }

AdaptedProcess extend(const AdaptedProcess& g, const Lattice& lat, int horizon) {
    if (horizon < g.horizon()) throw HorizonError("extend cannot shrink a process");
    AdaptedProcess out(g.dim(), lat, horizon);
    for (int k = 0; k <= g.horizon(); ++k) out.level(k) = g.level(k);
    return out;
}

double weighted_norm_sq(const AdaptedProcess& g, const WeightConfig& w, const Lattice& lat) {
    if (w.horizon > g.horizon() || w.horizon > lat.depth())
        throw HorizonError("weighted norm horizon exceeds the available levels");
    double total = 0.0;
    for (int k = 0; k <= w.horizon; ++k) {
        const Eigen::VectorXd sq = g.level(k).colwise().squaredNorm().transpose();
        total += std::exp(-w.rho * k) * sq.dot(lat.path_measures(k));
    }
    return total;
}

double pair_norm_sq(const AdaptedProcess& x, const AdaptedProcess& y, const WeightConfig& w, const Lattice& lat) {
    if (x.horizon() != y.horizon())
        throw ShapeError("pair norm: horizons differ");
    return weighted_norm_sq(x, w, lat) + weighted_norm_sq(y, w, lat);
}

double tail_bound(const AdaptedProcess& g, const WeightConfig& w, const Lattice& lat, int from_level) {
    double total = 0.0;
    for (int k = std::max(from_level, 0); k <= g.horizon(); ++k) {
        const Eigen::VectorXd sq = g.level(k).colwise().squaredNorm().transpose();
        total += std::exp(-w.rho * k) * sq.dot(lat.path_measures(k));
    }
    return total;
}

}  // namespace fbsde
