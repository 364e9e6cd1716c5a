#include "tzsl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tzsl/error.hpp"
#include "tzsl/io.hpp"

namespace tzsl {

namespace {

using nlohmann::json;

std::map<std::string, double> classwise_accuracy(const std::vector<std::string>& predictions,
                                                 const std::vector<std::string>& ground_truth) {
    std::map<std::string, std::pair<long, long>> tallies;  // class -> (correct, total)
    for (std::size_t i = 0; i < ground_truth.size(); ++i) {
        auto& [correct, total] = tallies[ground_truth[i]];
        total += 1;
        if (predictions[i] == ground_truth[i]) {
            correct += 1;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [cls, tally] : tallies) {
        out[cls] = 100.0 * static_cast<double>(tally.first) / static_cast<double>(tally.second);
    }
    return out;
}

}  // namespace

std::string to_string(Aggregation aggregation) {
    return aggregation == Aggregation::kPerClassMean ? "per-class-mean" : "overall";
}

Aggregation aggregation_from_string(const std::string& text) {
    if (text == "per-class-mean") return Aggregation::kPerClassMean;
    if (text == "overall") return Aggregation::kOverall;
    throw ParseError("unknown aggregation '" + text + "'");
}

std::string predict_zsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                        const ProjectionNet& net) {
    if (table.unseen_count() == 0) {
        throw ArgumentError("predict_zsl: table has no unseen classes");
    }
    // Unsquared distance in the inference rule; same argmin as squared, so
    // prediction shares the pseudo-label kernel.
    return pseudo_label(feature, table, net, LabelSpacePolicy::kUnseenOnly);
}

std::string predict_gzsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                         const ProjectionNet& net) {
    return pseudo_label(feature, table, net, LabelSpacePolicy::kSeenAndUnseen);
}

double top1_accuracy(const std::vector<std::string>& predictions,
                     const std::vector<std::string>& ground_truth, Aggregation aggregation) {
    if (predictions.empty() || predictions.size() != ground_truth.size()) {
        throw ArgumentError("top1_accuracy: empty input or length mismatch");
    }
    if (aggregation == Aggregation::kOverall) {
        long correct = 0;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
            if (predictions[i] == ground_truth[i]) {
                ++correct;
            }
        }
        return 100.0 * static_cast<double>(correct) / static_cast<double>(predictions.size());
    }
    const auto per_class = classwise_accuracy(predictions, ground_truth);
    double sum = 0.0;
    for (const auto& [cls, acc] : per_class) {
        sum += acc;
    }
    return sum / static_cast<double>(per_class.size());
}

double harmonic_mean(double acc_seen, double acc_unseen) {
    if (acc_seen < 0.0 || acc_seen > 100.0 || acc_unseen < 0.0 || acc_unseen > 100.0) {
        throw ArgumentError("harmonic_mean: accuracies must lie in [0, 100]");
    }
    if (acc_seen == 0.0 && acc_unseen == 0.0) {
        return 0.0;
    }
    return 2.0 * acc_seen * acc_unseen / (acc_seen + acc_unseen);
}

double nk_skewness(const Eigen::MatrixXd& test_features, const SemanticTable& table,
                   const ProjectionNet& net, int k, LabelSpacePolicy label_space) {
    const std::vector<int> space = label_space == LabelSpacePolicy::kUnseenOnly
                                       ? table.unseen_indices()
                                       : table.all_indices();
    const Eigen::Index n = static_cast<Eigen::Index>(space.size());
    if (k < 1 || k > n) {
        throw ArgumentError("nk_skewness: k must lie in [1, number of prototypes]");
    }
    if (test_features.rows() == 0) {
        throw ArgumentError("nk_skewness: no test features");
    }

    // Prototypes in match space, one per class of the label space.
    Eigen::MatrixXd prototypes;
    Eigen::MatrixXd anchors;
    if (net.direction() == Direction::kS2F) {
        prototypes = net.forward(table.gather(space));
        anchors = test_features;
    } else {
        prototypes = table.gather(space);
        anchors = net.forward(test_features);
    }
    const Eigen::MatrixXd d2 = sq_dist_matrix(anchors, prototypes);

    std::vector<long> counts(space.size(), 0);
    std::vector<int> order(space.size());
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (d2(i, a) != d2(i, b)) {
                return d2(i, a) < d2(i, b);
            }
            return a < b;  // deterministic tie rule
        });
        for (int j = 0; j < k; ++j) {
            counts[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] += 1;
        }
    }

    const double count_n = static_cast<double>(counts.size());
    double mean = 0.0;
    for (const long c : counts) {
        mean += static_cast<double>(c);
    }
    mean /= count_n;
    double variance = 0.0;
    double cubed = 0.0;
    for (const long c : counts) {
        const double d = static_cast<double>(c) - mean;
        variance += d * d;
        cubed += d * d * d;
    }
    variance /= count_n;
    if (variance == 0.0) {
        return 0.0;
    }
    return cubed / (count_n * std::pow(variance, 1.5));
}

EvalReport evaluate(const EmbeddingSet& data, const SemanticTable& table,
                    const ProjectionNet& net, TaskMode mode, Aggregation aggregation) {
    EvalReport report;
    report.mode = mode;
    report.aggregation = aggregation;

    const LabelSpacePolicy space_policy =
        mode == TaskMode::kZsl ? LabelSpacePolicy::kUnseenOnly : LabelSpacePolicy::kSeenAndUnseen;
    const std::vector<int> space_cols = mode == TaskMode::kZsl ? table.unseen_indices()
                                                               : table.all_indices();
    if (space_cols.empty()) {
        throw ArgumentError("evaluate: evaluation label space is empty");
    }

    std::vector<int> seen_rows;
    std::vector<int> unseen_rows = data.indices_with_split(Split::kUnseenTest);
    if (mode == TaskMode::kGzsl) {
        seen_rows = data.indices_with_split(Split::kSeenTest);
    }
    std::vector<int> rows = seen_rows;
    rows.insert(rows.end(), unseen_rows.begin(), unseen_rows.end());
    if (rows.empty()) {
        throw ArgumentError("evaluate: no test instances for mode " + to_string(mode));
    }
    for (const int row : rows) {
        if (!data.instance(row).has_label()) {
            throw ArgumentError("evaluate: test instance '" + data.instance(row).id +
                                "' has no ground-truth label");
        }
    }

    const Eigen::MatrixXd features = data.gather(rows);
    const std::vector<std::string> predictions =
        pseudo_label_batch(features, table, net, space_policy);
    std::vector<std::string> truth;
    truth.reserve(rows.size());
    for (const int row : rows) {
        truth.push_back(data.instance(row).label);
    }

    report.overall_top1 = top1_accuracy(predictions, truth, Aggregation::kOverall);
    report.per_class = classwise_accuracy(predictions, truth);

    const auto slice = [&](std::size_t begin, std::size_t count) {
        return std::pair(std::vector<std::string>(predictions.begin() + begin,
                                                  predictions.begin() + begin + count),
                         std::vector<std::string>(truth.begin() + begin,
                                                  truth.begin() + begin + count));
    };
    if (mode == TaskMode::kGzsl && !seen_rows.empty()) {
        const auto [preds, labels] = slice(0, seen_rows.size());
        report.acc_seen = top1_accuracy(preds, labels, aggregation);
    }
    if (!unseen_rows.empty()) {
        const auto [preds, labels] = slice(seen_rows.size(), unseen_rows.size());
        report.acc_unseen = top1_accuracy(preds, labels, aggregation);
    }
    report.hm = harmonic_mean(report.acc_seen, report.acc_unseen);

    std::vector<std::string> space_ids;
    space_ids.reserve(space_cols.size());
    for (const int col : space_cols) {
        space_ids.push_back(table.entry(col).id);
    }
    report.prediction_histogram = histogram(predictions, space_ids);
    report.nk_skewness = nk_skewness(features, table, net, 1, space_policy);
    return report;
}

std::string report_to_json(const EvalReport& report) {
    json doc;
    doc["mode"] = to_string(report.mode);
    doc["aggregation"] = to_string(report.aggregation);
    doc["acc_seen"] = report.acc_seen;
    doc["acc_unseen"] = report.acc_unseen;
    doc["hm"] = report.hm;
    doc["overall_top1"] = report.overall_top1;
    doc["nk_skewness"] = report.nk_skewness;
    doc["per_class"] = json::object();
    for (const auto& [cls, acc] : report.per_class) {
        doc["per_class"][cls] = acc;
    }
    doc["prediction_histogram"] = {
        {"classes", report.prediction_histogram.classes},
        {"counts", report.prediction_histogram.counts},
        {"total", report.prediction_histogram.total},
    };
    return doc.dump(2) + "\n";
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
    write_text_atomic(path, report_to_json(report));
}

std::string per_class_to_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "class_id,accuracy\n";
    for (const auto& [cls, acc] : report.per_class) {
        out << cls << ',' << format_double(acc) << '\n';
    }
    return out.str();
}

std::string histogram_to_csv(const PredictionHistogram& histogram) {
    std::ostringstream out;
    out << "class_id,count\n";
    for (std::size_t i = 0; i < histogram.classes.size(); ++i) {
        out << histogram.classes[i] << ',' << histogram.counts[i] << '\n';
    }
    return out.str();
}

}  // namespace tzsl
