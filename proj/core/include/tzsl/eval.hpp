#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tzsl/embedding_store.hpp"
#include "tzsl/losses.hpp"
#include "tzsl/projection_net.hpp"

namespace tzsl {

enum class Aggregation { kPerClassMean, kOverall };

std::string to_string(Aggregation aggregation);
Aggregation aggregation_from_string(const std::string& text);

struct EvalReport {
    double acc_seen = 0.0;    // percent
    double acc_unseen = 0.0;  // percent
    double hm = 0.0;          // percent
    double overall_top1 = 0.0;
    std::map<std::string, double> per_class;
    PredictionHistogram prediction_histogram;
    double nk_skewness = 0.0;  // k = 1
    TaskMode mode = TaskMode::kGzsl;
    Aggregation aggregation = Aggregation::kPerClassMean;
};

// Nearest projected prototype over the unseen classes; ties break toward
// the lowest table index.
std::string predict_zsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                        const ProjectionNet& net);
// Nearest projected prototype over all classes.
std::string predict_gzsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                         const ProjectionNet& net);

// Overall: correct/total * 100. Per-class mean: unweighted mean of the
// classwise accuracies; classes absent from the ground truth are excluded.
double top1_accuracy(const std::vector<std::string>& predictions,
                     const std::vector<std::string>& ground_truth, Aggregation aggregation);

// 2ab/(a+b), defined 0 when both are 0. Inputs must lie in [0, 100].
double harmonic_mean(double acc_seen, double acc_unseen);

// Skewness of the per-prototype count of appearances in the k nearest
// prototypes of the test samples; prototypes are the match-space vectors of
// the given label space. Population moments over the prototypes; zero
// variance yields 0.
double nk_skewness(const Eigen::MatrixXd& test_features, const SemanticTable& table,
                   const ProjectionNet& net, int k,
                   LabelSpacePolicy label_space = LabelSpacePolicy::kSeenAndUnseen);

// ZSL: unseen-test rows against the unseen classes. GZSL: seen-test and
// unseen-test rows against all classes. Test rows must carry labels.
EvalReport evaluate(const EmbeddingSet& data, const SemanticTable& table,
                    const ProjectionNet& net, TaskMode mode,
                    Aggregation aggregation = Aggregation::kPerClassMean);

std::string report_to_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::filesystem::path& path);
// Side tables for plotting: class_id,accuracy and class_id,count.
std::string per_class_to_csv(const EvalReport& report);
std::string histogram_to_csv(const PredictionHistogram& histogram);

}  // namespace tzsl
