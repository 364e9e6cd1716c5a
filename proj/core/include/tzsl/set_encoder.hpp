#pragma once

#include <cstdint>

#include <Eigen/Core>

namespace tzsl {

// An unordered set of 3D points, one row per point.
struct PointSet {
    Eigen::Matrix<double, Eigen::Dynamic, 3> points;

    Eigen::Index size() const { return points.rows(); }
};

// Frozen permutation-invariant encoder: a per-point two-layer map
// (3 -> hidden -> out, tanh after each layer) followed by a coordinatewise
// max over the point features. The weights are drawn once from the seed and
// never trained.
class SetEncoder {
public:
    SetEncoder(Eigen::Index hidden_dim, Eigen::Index out_dim, std::uint64_t seed);

    Eigen::Index hidden_dim() const { return w1_.cols(); }
    Eigen::Index out_dim() const { return w2_.cols(); }

    // Coordinatewise max over per-point features. Exactly invariant to any
    // reordering of the rows of the point set.
    Eigen::VectorXd encode(const PointSet& points) const;

private:
    Eigen::MatrixXd w1_;  // 3 x hidden
    Eigen::VectorXd b1_;
    Eigen::MatrixXd w2_;  // hidden x out
    Eigen::VectorXd b2_;
};

}  // namespace tzsl
