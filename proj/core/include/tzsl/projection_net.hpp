#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace tzsl {

// Projection direction: S2F maps semantic vectors into feature space, F2S
// maps features into semantic space.
enum class Direction { kS2F, kF2S };
enum class Activation { kTanh, kRelu };

std::string to_string(Direction direction);
std::string to_string(Activation activation);
Direction direction_from_string(const std::string& text);
Activation activation_from_string(const std::string& text);

struct Dims {
    Eigen::Index in = 0;
    Eigen::Index hidden = 0;
    Eigen::Index out = 0;

    bool operator==(const Dims&) const = default;
};

class ProjectionNet;

// Partial derivatives of a scalar loss, one block per parameter.
struct Gradients {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;

    static Gradients zeros(const Dims& dims);
    Gradients& operator+=(const Gradients& other);
    Gradients& scale(double factor);
    bool all_finite() const;
    // Name of the first parameter block holding a non-finite value, or empty.
    std::string first_non_finite() const;
};

// Batched intermediate values kept for the backward pass.
struct ForwardCache {
    Eigen::MatrixXd inputs;   // B x in
    Eigen::MatrixXd hidden;   // B x hidden, post-activation
    Eigen::MatrixXd outputs;  // B x out, post-activation
};

// Two affine layers with an elementwise nonlinearity after each:
//   y = act(act(x W1 + b1) W2 + b2)
// Inputs and outputs are row vectors; batches are one row per sample.
class ProjectionNet {
public:
    // Xavier-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases,
    // deterministic in the seed.
    ProjectionNet(Direction direction, Dims dims, Activation activation, std::uint64_t seed);

    // All-zero parameters; test hook.
    static ProjectionNet zeros(Direction direction, Dims dims, Activation activation);

    Direction direction() const { return direction_; }
    Activation activation() const { return activation_; }
    const Dims& dims() const { return dims_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& batch) const;
    ForwardCache forward_cached(const Eigen::MatrixXd& batch) const;

    // Backpropagates d(loss)/d(outputs) through the cached forward pass and
    // accumulates parameter gradients. The cache must come from this net
    // with its current parameters.
    void accumulate_backward(const ForwardCache& cache, const Eigen::MatrixXd& output_grad,
                             Gradients& grads) const;

    // Sum of squared weight-matrix entries; biases excluded.
    double l2_penalty() const;
    // Adds d(lambda * l2_penalty)/d(params) = 2*lambda*W to `grads`.
    void accumulate_l2_gradient(double lambda, Gradients& grads) const;

    const Eigen::MatrixXd& w1() const { return w1_; }
    const Eigen::VectorXd& b1() const { return b1_; }
    const Eigen::MatrixXd& w2() const { return w2_; }
    const Eigen::VectorXd& b2() const { return b2_; }

    Eigen::MatrixXd& w1() { return w1_; }
    Eigen::VectorXd& b1() { return b1_; }
    Eigen::MatrixXd& w2() { return w2_; }
    Eigen::VectorXd& b2() { return b2_; }

    bool operator==(const ProjectionNet& other) const;

private:
    ProjectionNet(Direction direction, Dims dims, Activation activation);

    Eigen::MatrixXd activate(Eigen::MatrixXd values) const;

    Direction direction_;
    Activation activation_;
    Dims dims_;
    Eigen::MatrixXd w1_;  // in x hidden
    Eigen::VectorXd b1_;
    Eigen::MatrixXd w2_;  // hidden x out
    Eigen::VectorXd b2_;
};

// Adam optimizer state; beta1/beta2/epsilon fixed to the standard values.
struct AdamState {
    Gradients first_moment;
    Gradients second_moment;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double learning_rate = 1e-4;

    static AdamState init(const ProjectionNet& net, double learning_rate);
};

// One Adam update with bias correction; increments state.step.
void adam_step(ProjectionNet& net, const Gradients& grads, AdamState& state);

// Checkpoint JSON: {direction, dims, activation, w1, b1, w2, b2, adam?}
// with full-precision decimals.
std::string checkpoint_to_json(const ProjectionNet& net,
                               const std::optional<AdamState>& adam = std::nullopt);
std::pair<ProjectionNet, std::optional<AdamState>> checkpoint_from_json(const std::string& text);
void save_checkpoint(const ProjectionNet& net, const std::filesystem::path& path,
                     const std::optional<AdamState>& adam = std::nullopt);
std::pair<ProjectionNet, std::optional<AdamState>> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace tzsl
