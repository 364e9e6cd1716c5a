#include "tzsl/projection_net.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tzsl/error.hpp"
#include "tzsl/io.hpp"
#include "tzsl/rng.hpp"

namespace tzsl {

namespace {

using nlohmann::json;

void fill_xavier_uniform(Eigen::MatrixXd& weights, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(weights.rows() + weights.cols()));
    for (Eigen::Index r = 0; r < weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < weights.cols(); ++c) {
            weights(r, c) = rng.uniform(-bound, bound);
        }
    }
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(m(r, c));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

Eigen::MatrixXd matrix_from_json(const json& rows, Eigen::Index expected_rows,
                                 Eigen::Index expected_cols, const char* name) {
    if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != expected_rows) {
        throw ParseError(std::string("checkpoint: field '") + name + "' has wrong row count");
    }
    Eigen::MatrixXd out(expected_rows, expected_cols);
    for (Eigen::Index r = 0; r < expected_rows; ++r) {
        const json& row = rows[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != expected_cols) {
            throw ParseError(std::string("checkpoint: field '") + name +
                             "' has wrong column count");
        }
        for (Eigen::Index c = 0; c < expected_cols; ++c) {
            out(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    }
    return out;
}

Eigen::VectorXd vector_from_json(const json& values, Eigen::Index expected, const char* name) {
    if (!values.is_array() || static_cast<Eigen::Index>(values.size()) != expected) {
        throw ParseError(std::string("checkpoint: field '") + name + "' has wrong length");
    }
    Eigen::VectorXd out(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        out(i) = values[static_cast<std::size_t>(i)].get<double>();
    }
    return out;
}

template <typename Block>
void adam_update_block(Block& param, const Block& grad, Block& m, Block& v,
                       const AdamState& state) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = (state.beta2 * v.array() + (1.0 - state.beta2) * grad.array().square()).matrix();
    const double m_correction = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double v_correction = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    param.array() -= state.learning_rate * (m.array() / m_correction) /
                     ((v.array() / v_correction).sqrt() + state.epsilon);
}

}  // namespace

std::string to_string(Direction direction) {
    return direction == Direction::kS2F ? "S2F" : "F2S";
}

std::string to_string(Activation activation) {
    return activation == Activation::kTanh ? "tanh" : "relu";
}

Direction direction_from_string(const std::string& text) {
    if (text == "S2F" || text == "s2f") return Direction::kS2F;
    if (text == "F2S" || text == "f2s") return Direction::kF2S;
    throw ParseError("unknown direction '" + text + "'");
}

Activation activation_from_string(const std::string& text) {
    if (text == "tanh") return Activation::kTanh;
    if (text == "relu") return Activation::kRelu;
    throw ParseError("unknown activation '" + text + "'");
}

Gradients Gradients::zeros(const Dims& dims) {
    Gradients g;
    g.w1 = Eigen::MatrixXd::Zero(dims.in, dims.hidden);
    g.b1 = Eigen::VectorXd::Zero(dims.hidden);
    g.w2 = Eigen::MatrixXd::Zero(dims.hidden, dims.out);
    g.b2 = Eigen::VectorXd::Zero(dims.out);
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    w1 += other.w1;
    b1 += other.b1;
    w2 += other.w2;
    b2 += other.b2;
    return *this;
}

Gradients& Gradients::scale(double factor) {
    w1 *= factor;
    b1 *= factor;
    w2 *= factor;
    b2 *= factor;
    return *this;
}

bool Gradients::all_finite() const {
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

std::string Gradients::first_non_finite() const {
    if (!w1.allFinite()) return "w1";
    if (!b1.allFinite()) return "b1";
    if (!w2.allFinite()) return "w2";
    if (!b2.allFinite()) return "b2";
    return {};
}

ProjectionNet::ProjectionNet(Direction direction, Dims dims, Activation activation)
    : direction_(direction), activation_(activation), dims_(dims) {
    if (dims.in <= 0 || dims.hidden <= 0 || dims.out <= 0) {
        throw ArgumentError("ProjectionNet: dims must be positive");
    }
}

ProjectionNet::ProjectionNet(Direction direction, Dims dims, Activation activation,
                             std::uint64_t seed)
    : ProjectionNet(direction, dims, activation) {
    Rng rng(seed);
    w1_.resize(dims.in, dims.hidden);
    fill_xavier_uniform(w1_, rng);
    b1_ = Eigen::VectorXd::Zero(dims.hidden);
    w2_.resize(dims.hidden, dims.out);
    fill_xavier_uniform(w2_, rng);
    b2_ = Eigen::VectorXd::Zero(dims.out);
}

ProjectionNet ProjectionNet::zeros(Direction direction, Dims dims, Activation activation) {
    ProjectionNet net(direction, dims, activation);
    net.w1_ = Eigen::MatrixXd::Zero(dims.in, dims.hidden);
    net.b1_ = Eigen::VectorXd::Zero(dims.hidden);
    net.w2_ = Eigen::MatrixXd::Zero(dims.hidden, dims.out);
    net.b2_ = Eigen::VectorXd::Zero(dims.out);
    return net;
}

Eigen::MatrixXd ProjectionNet::activate(Eigen::MatrixXd values) const {
    if (activation_ == Activation::kTanh) {
        return values.array().tanh().matrix();
    }
    return values.cwiseMax(0.0);
}

Eigen::VectorXd ProjectionNet::forward(const Eigen::VectorXd& input) const {
    return forward(Eigen::MatrixXd(input.transpose())).row(0).transpose();
}

Eigen::MatrixXd ProjectionNet::forward(const Eigen::MatrixXd& batch) const {
    if (batch.cols() != dims_.in) {
        throw ArgumentError("ProjectionNet::forward: input has " + std::to_string(batch.cols()) +
                            " columns, expected " + std::to_string(dims_.in));
    }
    const Eigen::MatrixXd hidden = activate((batch * w1_).rowwise() + b1_.transpose());
    return activate((hidden * w2_).rowwise() + b2_.transpose());
}

ForwardCache ProjectionNet::forward_cached(const Eigen::MatrixXd& batch) const {
    if (batch.cols() != dims_.in) {
        throw ArgumentError("ProjectionNet::forward_cached: input has " +
                            std::to_string(batch.cols()) + " columns, expected " +
                            std::to_string(dims_.in));
    }
    ForwardCache cache;
    cache.inputs = batch;
    cache.hidden = activate((batch * w1_).rowwise() + b1_.transpose());
    cache.outputs = activate((cache.hidden * w2_).rowwise() + b2_.transpose());
    return cache;
}

void ProjectionNet::accumulate_backward(const ForwardCache& cache,
                                        const Eigen::MatrixXd& output_grad,
                                        Gradients& grads) const {
    if (output_grad.rows() != cache.outputs.rows() || output_grad.cols() != cache.outputs.cols()) {
        throw ArgumentError("ProjectionNet::accumulate_backward: gradient shape mismatch");
    }
    // Activation derivative from post-activation values: tanh' = 1 - y^2,
    // relu' = [y > 0] (y > 0 iff the pre-activation was > 0).
    const auto act_grad = [this](const Eigen::MatrixXd& post) -> Eigen::MatrixXd {
        if (activation_ == Activation::kTanh) {
            return (1.0 - post.array().square()).matrix();
        }
        return (post.array() > 0.0).cast<double>().matrix();
    };

    const Eigen::MatrixXd dz2 = output_grad.cwiseProduct(act_grad(cache.outputs));
    grads.w2 += cache.hidden.transpose() * dz2;
    grads.b2 += dz2.colwise().sum().transpose();

    const Eigen::MatrixXd dhidden = dz2 * w2_.transpose();
    const Eigen::MatrixXd dz1 = dhidden.cwiseProduct(act_grad(cache.hidden));
    grads.w1 += cache.inputs.transpose() * dz1;
    grads.b1 += dz1.colwise().sum().transpose();
}

double ProjectionNet::l2_penalty() const {
    return w1_.squaredNorm() + w2_.squaredNorm();
}

void ProjectionNet::accumulate_l2_gradient(double lambda, Gradients& grads) const {
    grads.w1 += 2.0 * lambda * w1_;
    grads.w2 += 2.0 * lambda * w2_;
}

bool ProjectionNet::operator==(const ProjectionNet& other) const {
    return direction_ == other.direction_ && activation_ == other.activation_ &&
           dims_ == other.dims_ && w1_ == other.w1_ && b1_ == other.b1_ && w2_ == other.w2_ &&
           b2_ == other.b2_;
}

AdamState AdamState::init(const ProjectionNet& net, double learning_rate) {
    AdamState state;
    state.first_moment = Gradients::zeros(net.dims());
    state.second_moment = Gradients::zeros(net.dims());
    state.learning_rate = learning_rate;
    return state;
}

void adam_step(ProjectionNet& net, const Gradients& grads, AdamState& state) {
    const Dims& dims = net.dims();
    if (grads.w1.rows() != dims.in || grads.w1.cols() != dims.hidden ||
        grads.b1.size() != dims.hidden || grads.w2.rows() != dims.hidden ||
        grads.w2.cols() != dims.out || grads.b2.size() != dims.out) {
        throw ArgumentError("adam_step: gradient shapes do not match the net");
    }
    state.step += 1;
    adam_update_block(net.w1(), grads.w1, state.first_moment.w1, state.second_moment.w1, state);
    adam_update_block(net.b1(), grads.b1, state.first_moment.b1, state.second_moment.b1, state);
    adam_update_block(net.w2(), grads.w2, state.first_moment.w2, state.second_moment.w2, state);
    adam_update_block(net.b2(), grads.b2, state.first_moment.b2, state.second_moment.b2, state);
}

std::string checkpoint_to_json(const ProjectionNet& net, const std::optional<AdamState>& adam) {
    json doc;
    doc["direction"] = to_string(net.direction());
    doc["activation"] = to_string(net.activation());
    doc["dims"] = {net.dims().in, net.dims().hidden, net.dims().out};
    doc["w1"] = matrix_to_json(net.w1());
    doc["b1"] = vector_to_json(net.b1());
    doc["w2"] = matrix_to_json(net.w2());
    doc["b2"] = vector_to_json(net.b2());
    if (adam.has_value()) {
        json a;
        a["step"] = adam->step;
        a["learning_rate"] = adam->learning_rate;
        a["beta1"] = adam->beta1;
        a["beta2"] = adam->beta2;
        a["epsilon"] = adam->epsilon;
        a["m_w1"] = matrix_to_json(adam->first_moment.w1);
        a["m_b1"] = vector_to_json(adam->first_moment.b1);
        a["m_w2"] = matrix_to_json(adam->first_moment.w2);
        a["m_b2"] = vector_to_json(adam->first_moment.b2);
        a["v_w1"] = matrix_to_json(adam->second_moment.w1);
        a["v_b1"] = vector_to_json(adam->second_moment.b1);
        a["v_w2"] = matrix_to_json(adam->second_moment.w2);
        a["v_b2"] = vector_to_json(adam->second_moment.b2);
        doc["adam"] = std::move(a);
    }
    return doc.dump(2) + "\n";
}

std::pair<ProjectionNet, std::optional<AdamState>> checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        const Direction direction = direction_from_string(doc.at("direction").get<std::string>());
        const Activation activation =
            activation_from_string(doc.at("activation").get<std::string>());
        const auto& dims_json = doc.at("dims");
        if (!dims_json.is_array() || dims_json.size() != 3) {
            throw ParseError("checkpoint: 'dims' must have three entries");
        }
        const Dims dims{dims_json[0].get<Eigen::Index>(), dims_json[1].get<Eigen::Index>(),
                        dims_json[2].get<Eigen::Index>()};

        ProjectionNet net = ProjectionNet::zeros(direction, dims, activation);
        net.w1() = matrix_from_json(doc.at("w1"), dims.in, dims.hidden, "w1");
        net.b1() = vector_from_json(doc.at("b1"), dims.hidden, "b1");
        net.w2() = matrix_from_json(doc.at("w2"), dims.hidden, dims.out, "w2");
        net.b2() = vector_from_json(doc.at("b2"), dims.out, "b2");

        std::optional<AdamState> adam;
        if (doc.contains("adam")) {
            const json& a = doc.at("adam");
            AdamState state = AdamState::init(net, a.at("learning_rate").get<double>());
            state.step = a.at("step").get<long>();
            state.beta1 = a.at("beta1").get<double>();
            state.beta2 = a.at("beta2").get<double>();
            state.epsilon = a.at("epsilon").get<double>();
            state.first_moment.w1 = matrix_from_json(a.at("m_w1"), dims.in, dims.hidden, "m_w1");
            state.first_moment.b1 = vector_from_json(a.at("m_b1"), dims.hidden, "m_b1");
            state.first_moment.w2 = matrix_from_json(a.at("m_w2"), dims.hidden, dims.out, "m_w2");
            state.first_moment.b2 = vector_from_json(a.at("m_b2"), dims.out, "m_b2");
            state.second_moment.w1 = matrix_from_json(a.at("v_w1"), dims.in, dims.hidden, "v_w1");
            state.second_moment.b1 = vector_from_json(a.at("v_b1"), dims.hidden, "v_b1");
            state.second_moment.w2 = matrix_from_json(a.at("v_w2"), dims.hidden, dims.out, "v_w2");
            state.second_moment.b2 = vector_from_json(a.at("v_b2"), dims.out, "v_b2");
            adam = std::move(state);
        }
        return {std::move(net), std::move(adam)};
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const ProjectionNet& net, const std::filesystem::path& path,
                     const std::optional<AdamState>& adam) {
    write_text_atomic(path, checkpoint_to_json(net, adam));
}

std::pair<ProjectionNet, std::optional<AdamState>> load_checkpoint(
    const std::filesystem::path& path) {
    return checkpoint_from_json(read_text(path));
}

}  // namespace tzsl
