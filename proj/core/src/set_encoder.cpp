#include "tzsl/set_encoder.hpp"

#include <cmath>

#include "tzsl/error.hpp"
#include "tzsl/rng.hpp"

namespace tzsl {

namespace {

void fill_xavier_uniform(Eigen::MatrixXd& weights, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(weights.rows() + weights.cols()));
    for (Eigen::Index r = 0; r < weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < weights.cols(); ++c) {
            weights(r, c) = rng.uniform(-bound, bound);
        }
    }
}

}  // namespace

SetEncoder::SetEncoder(Eigen::Index hidden_dim, Eigen::Index out_dim, std::uint64_t seed) {
    if (hidden_dim <= 0 || out_dim <= 0) {
        throw ArgumentError("SetEncoder: dimensions must be positive");
    }
    Rng rng(seed);
    w1_.resize(3, hidden_dim);
    fill_xavier_uniform(w1_, rng);
    b1_ = Eigen::VectorXd::Zero(hidden_dim);
    w2_.resize(hidden_dim, out_dim);
    fill_xavier_uniform(w2_, rng);
    b2_ = Eigen::VectorXd::Zero(out_dim);
}

Eigen::VectorXd SetEncoder::encode(const PointSet& points) const {
    if (points.size() == 0) {
        throw ArgumentError("SetEncoder::encode: point set is empty");
    }
    if (!points.points.allFinite()) {
        throw ValidationError("SetEncoder::encode: point set has non-finite coordinates");
    }
    Eigen::VectorXd pooled;
    for (Eigen::Index p = 0; p < points.size(); ++p) {
        const Eigen::RowVector3d x = points.points.row(p);
        const Eigen::VectorXd hidden = ((x * w1_).transpose() + b1_).array().tanh();
        const Eigen::VectorXd feature =
            ((hidden.transpose() * w2_).transpose() + b2_).array().tanh();
        if (p == 0) {
            pooled = feature;
        } else {
            pooled = pooled.cwiseMax(feature);
        }
    }
    return pooled;
}

}  // namespace tzsl
