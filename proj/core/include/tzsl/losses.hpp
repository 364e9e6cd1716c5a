#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "tzsl/embedding_store.hpp"
#include "tzsl/projection_net.hpp"

namespace tzsl {

enum class TaskMode { kZsl, kGzsl };

// Candidate label space for pseudo-labeling and the hubness terms. The
// seen-and-unseen space is the default; unseen-only is meant for pure-ZSL
// transduction where the unlabeled pool contains no seen instances.
enum class LabelSpacePolicy { kSeenAndUnseen, kUnseenOnly };

std::string to_string(TaskMode mode);
std::string to_string(LabelSpacePolicy policy);
TaskMode task_mode_from_string(const std::string& text);
LabelSpacePolicy label_space_from_string(const std::string& text);

struct LossWeights {
    double alpha1 = 0.4;    // triplet
    double alpha2 = 0.001;  // hubness
    double alpha3 = 0.001;  // unbiasing
    double margin = 1.0;
    double lambda = 1e-4;   // weight decay on the supervised term

    void validate() const;  // all components must be >= 0
};

// Entry (i, k) = squared Euclidean distance between row i of `a` and row k
// of `b`. Accumulation runs in index order so results are reproducible.
Eigen::MatrixXd sq_dist_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct LabeledBatch {
    Eigen::MatrixXd features;         // B x m
    std::vector<std::string> labels;  // size B, all seen classes
};

// Supervised projection losses:
//   S2F: (1/N) sum ||feature_i - net(semantic_i)||^2 + lambda ||W||^2
//   F2S: (1/N) sum ||net(feature_i) - semantic_i||^2 + lambda ||W||^2
double loss_s2f(const LabeledBatch& batch, const SemanticTable& table, const ProjectionNet& net,
                double lambda);
double loss_f2s(const LabeledBatch& batch, const SemanticTable& table, const ProjectionNet& net,
                double lambda);

// Triplet anchor selection. Positives: nearest unseen class (ZSL) or
// nearest class overall with seen winners discarded (GZSL). Negatives:
// nearest seen class. All distances are measured between the anchor and the
// class prototypes in match space; ties break toward the lowest table index.
std::string select_positive_zsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                                const ProjectionNet& net);
std::optional<std::string> select_positive_gzsl(const Eigen::VectorXd& feature,
                                                const SemanticTable& table,
                                                const ProjectionNet& net);
std::string select_negative(const Eigen::VectorXd& feature, const SemanticTable& table,
                            const ProjectionNet& net);

std::string pseudo_label(const Eigen::VectorXd& feature, const SemanticTable& table,
                         const ProjectionNet& net, LabelSpacePolicy label_space);
std::vector<std::string> pseudo_label_batch(const Eigen::MatrixXd& features,
                                            const SemanticTable& table, const ProjectionNet& net,
                                            LabelSpacePolicy label_space);

struct TripletBatch {
    Eigen::MatrixXd anchors;      // B x m raw features
    std::vector<int> positive;    // class table index; -1 when discarded
    std::vector<int> negative;    // class table index; -1 when discarded
    std::vector<char> discarded;  // size B

    int active_count() const;
};

TripletBatch assign_triplets(const Eigen::MatrixXd& features, const SemanticTable& table,
                             const ProjectionNet& net, TaskMode mode);

// active == 0 signals an all-discarded batch; value is 0 in that case.
struct TripletLoss {
    double value = 0.0;
    int active = 0;
};

// (1/N') sum over non-discarded anchors of
//   max{0, d^2(anchor, positive) + margin - d^2(anchor, negative)}.
TripletLoss loss_triplet(const TripletBatch& batch, const SemanticTable& table,
                         const ProjectionNet& net, double margin);

struct PredictionHistogram {
    std::vector<std::string> classes;  // candidate label space, table order
    std::vector<long> counts;
    long total = 0;  // batch size N; always equals the sum of counts
};

PredictionHistogram histogram(const std::vector<std::string>& labels,
                              const std::vector<std::string>& label_space);

// Skewness loss over per-sample counts:
//   (1 / (N Var[H]^{3/2})) sum_i (H(label_i) - E[H])^3
// E and Var are the population mean/variance of the count vector over the
// full label space, zero counts included. Var = 0 yields 0.
double skewness_loss_raw(const PredictionHistogram& hist,
                         const std::vector<std::string>& labels);

// Mean over the batch of -log softmax(-squared distances) at each sample's
// pseudo-label; log-domain with max subtraction.
double confidence_weight(const Eigen::MatrixXd& features, const SemanticTable& table,
                         const ProjectionNet& net, LabelSpacePolicy label_space);
// Same with the per-sample labels pinned by the caller instead of recomputed
// argmins; this is the value the finite-difference tests probe.
double confidence_weight_given_labels(const Eigen::MatrixXd& features, const SemanticTable& table,
                                      const ProjectionNet& net, LabelSpacePolicy label_space,
                                      const std::vector<std::string>& labels);

// Hubness loss: confidence weight times the raw skewness loss, both computed
// from this batch's pseudo-labels. The pseudo-label identities and histogram
// counts are constants for differentiation; gradients flow only through the
// confidence weight.
double loss_hubness(const Eigen::MatrixXd& features, const SemanticTable& table,
                    const ProjectionNet& net, LabelSpacePolicy label_space);
double loss_hubness_given_labels(const Eigen::MatrixXd& features, const SemanticTable& table,
                                 const ProjectionNet& net, LabelSpacePolicy label_space,
                                 const std::vector<std::string>& labels);

// Unbiasing loss: -(1/N) sum_i log of the total softmax mass the unseen
// classes receive, softmax over all S+U classes of -squared distances.
// Always >= 0.
double loss_unbias(const Eigen::MatrixXd& features, const SemanticTable& table,
                   const ProjectionNet& net);

struct TransductiveLoss {
    double triplet = 0.0;  // raw component values
    double hubness = 0.0;
    double unbias = 0.0;
    double total = 0.0;  // alpha1*triplet + alpha2*hubness + alpha3*unbias
    double discarded_fraction = 0.0;
};

// Combined transductive objective over one unlabeled batch; anchors are
// re-assigned with the current net. Components with a zero weight are
// skipped and contribute exactly 0.
TransductiveLoss loss_transductive(const Eigen::MatrixXd& features, const SemanticTable& table,
                                   const ProjectionNet& net, const LossWeights& weights,
                                   TaskMode mode,
                                   LabelSpacePolicy label_space = LabelSpacePolicy::kSeenAndUnseen);

// --- loss_and_grad -------------------------------------------------------
// A LossSpec is one of the objectives above bound to a batch. Gradients are
// exact analytic derivatives with argmin selections and histogram counts
// held constant.

struct SupervisedSpec {
    LabeledBatch batch;
    double lambda = 0.0;
};

struct TripletSpec {
    TripletBatch batch;
    double margin = 0.0;
};

struct HubnessSpec {
    Eigen::MatrixXd features;
    LabelSpacePolicy label_space = LabelSpacePolicy::kSeenAndUnseen;
};

struct UnbiasSpec {
    Eigen::MatrixXd features;
};

struct TransductiveSpec {
    Eigen::MatrixXd features;
    LossWeights weights;
    TaskMode mode = TaskMode::kGzsl;
    LabelSpacePolicy label_space = LabelSpacePolicy::kSeenAndUnseen;
};

using LossSpec = std::variant<SupervisedSpec, TripletSpec, HubnessSpec, UnbiasSpec,
                              TransductiveSpec>;

struct LossAndGrad {
    double value = 0.0;
    Gradients grads;
};

LossAndGrad loss_and_grad(const ProjectionNet& net, const SemanticTable& table,
                          const LossSpec& spec);

// Trainer entry point: component values plus the combined gradient.
struct TransductiveLossAndGrad {
    TransductiveLoss parts;
    Gradients grads;
};

TransductiveLossAndGrad transductive_loss_and_grad(const ProjectionNet& net,
                                                   const SemanticTable& table,
                                                   const Eigen::MatrixXd& features,
                                                   const LossWeights& weights, TaskMode mode,
                                                   LabelSpacePolicy label_space);

}  // namespace tzsl
