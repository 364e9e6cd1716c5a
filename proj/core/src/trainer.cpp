#include "tzsl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tzsl/error.hpp"
#include "tzsl/eval.hpp"
#include "tzsl/io.hpp"
#include "tzsl/rng.hpp"

namespace tzsl {

namespace {

// Shuffled cyclic sampler over a row-index pool; reshuffles on wrap.
class PoolSampler {
public:
    PoolSampler(std::vector<int> rows, Rng& rng) : rows_(std::move(rows)), rng_(rng) {
        rng_.shuffle(rows_);
    }

    std::vector<int> draw(int count) {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) {
            if (cursor_ == rows_.size()) {
                rng_.shuffle(rows_);
                cursor_ = 0;
            }
            out.push_back(rows_[cursor_++]);
        }
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    std::vector<int> rows_;
    Rng& rng_;
    std::size_t cursor_ = 0;
};

Dims net_dims(const EmbeddingSet& data, const SemanticTable& table, const TrainConfig& cfg) {
    if (cfg.direction == Direction::kS2F) {
        return {table.semantic_dim(), cfg.hidden_dim, data.feature_dim()};
    }
    return {data.feature_dim(), cfg.hidden_dim, table.semantic_dim()};
}

LabeledBatch gather_labeled(const EmbeddingSet& data, const std::vector<int>& rows) {
    LabeledBatch batch;
    batch.features = data.gather(rows);
    batch.labels.reserve(rows.size());
    for (const int row : rows) {
        batch.labels.push_back(data.instance(row).label);
    }
    return batch;
}

std::vector<int> unlabeled_pool(const EmbeddingSet& data, TaskMode mode) {
    std::vector<int> rows;
    if (mode == TaskMode::kGzsl) {
        rows = data.indices_with_split(Split::kSeenTest);
    }
    const std::vector<int> unseen = data.indices_with_split(Split::kUnseenTest);
    rows.insert(rows.end(), unseen.begin(), unseen.end());
    return rows;
}

// Early stopping needs labeled test rows; in GZSL mode both test splits
// must be nonempty or the metric is degenerate.
bool can_validate(const EmbeddingSet& data, TaskMode mode) {
    const std::vector<int> unseen = data.indices_with_split(Split::kUnseenTest);
    if (unseen.empty()) {
        return false;
    }
    std::vector<int> rows = unseen;
    if (mode == TaskMode::kGzsl) {
        const std::vector<int> seen = data.indices_with_split(Split::kSeenTest);
        if (seen.empty()) {
            return false;
        }
        rows.insert(rows.end(), seen.begin(), seen.end());
    }
    return std::all_of(rows.begin(), rows.end(),
                       [&](int row) { return data.instance(row).has_label(); });
}

double validation_metric(const EmbeddingSet& data, const SemanticTable& table,
                         const ProjectionNet& net, TaskMode mode) {
    const EvalReport report = evaluate(data, table, net, mode);
    return mode == TaskMode::kZsl ? report.acc_unseen : report.hm;
}

NumericError with_epoch(const NumericError& error, const char* stage, int epoch) {
    return NumericError(std::string(stage) + " epoch " + std::to_string(epoch) + ": " +
                        error.what());
}

}  // namespace

void TrainConfig::validate() const {
    weights.validate();
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValidationError("TrainConfig: learning rate must be positive");
    }
    if (labeled_batch < 1 || unlabeled_batch < 1) {
        throw ValidationError("TrainConfig: batch sizes must be >= 1");
    }
    if (inductive_epochs < 1 || transductive_epochs < 1) {
        throw ValidationError("TrainConfig: epoch counts must be >= 1");
    }
    if (hidden_dim < 1) {
        throw ValidationError("TrainConfig: hidden_dim must be >= 1");
    }
    if (early_stop_patience < 0) {
        throw ValidationError("TrainConfig: early_stop_patience must be >= 0");
    }
}

std::string train_log_to_csv(const TrainLog& log) {
    std::ostringstream out;
    out << "epoch,stage,supervised_loss,triplet_loss,hubness_loss,unbias_loss,total,"
           "discarded_fraction\n";
    for (const EpochRecord& rec : log.records) {
        out << rec.epoch << ',' << rec.stage << ',' << format_double(rec.supervised_loss) << ','
            << format_double(rec.triplet_loss) << ',' << format_double(rec.hubness_loss) << ','
            << format_double(rec.unbias_loss) << ',' << format_double(rec.total) << ','
            << format_double(rec.discarded_fraction) << '\n';
    }
    return out.str();
}

void save_train_log(const TrainLog& log, const std::filesystem::path& path) {
    write_text_atomic(path, train_log_to_csv(log));
}

TrainResult train_inductive(const EmbeddingSet& data, const SemanticTable& table,
                            const TrainConfig& cfg) {
    cfg.validate();
    data.validate_against(table);
    const std::vector<int> train_rows = data.indices_with_split(Split::kSeenTrain);
    if (train_rows.empty()) {
        throw ArgumentError("train_inductive: no seen-train instances");
    }

    ProjectionNet net(cfg.direction, net_dims(data, table, cfg), cfg.activation,
                      derive_seed(cfg.seed, "init"));
    AdamState adam = AdamState::init(net, cfg.learning_rate);
    Rng rng(derive_seed(cfg.seed, "inductive"));

    TrainLog log;
    std::vector<int> order = train_rows;
    for (int epoch = 1; epoch <= cfg.inductive_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.labeled_batch)) {
            const std::size_t count =
                std::min<std::size_t>(static_cast<std::size_t>(cfg.labeled_batch),
                                      order.size() - start);
            const std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                        order.begin() + static_cast<std::ptrdiff_t>(start + count));
            try {
                const LossAndGrad step = loss_and_grad(
                    net, table, SupervisedSpec{gather_labeled(data, rows), cfg.weights.lambda});
                adam_step(net, step.grads, adam);
                loss_sum += step.value * static_cast<double>(count);
            } catch (const NumericError& error) {
                throw with_epoch(error, "inductive", epoch);
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = "inductive";
        rec.supervised_loss = loss_sum / static_cast<double>(order.size());
        rec.total = rec.supervised_loss;
        log.records.push_back(rec);
    }
    return {std::move(net), std::move(log)};
}

TrainResult train_transductive(const ProjectionNet& inductive_net, const EmbeddingSet& data,
                               const SemanticTable& table, const TrainConfig& cfg) {
    cfg.validate();
    data.validate_against(table);

    ProjectionNet net = inductive_net;
    if (net.direction() != cfg.direction) {
        throw ArgumentError("train_transductive: checkpoint direction does not match the config");
    }
    const Dims expected = net_dims(data, table, cfg);
    if (net.dims().in != expected.in || net.dims().out != expected.out) {
        throw ArgumentError("train_transductive: checkpoint dims do not match the data");
    }

    const std::vector<int> labeled_rows = data.indices_with_split(Split::kSeenTrain);
    if (labeled_rows.empty()) {
        throw ArgumentError("train_transductive: no seen-train instances");
    }
    const std::vector<int> unlabeled_rows = unlabeled_pool(data, cfg.mode);
    if (unlabeled_rows.empty()) {
        throw ArgumentError("train_transductive: no unlabeled test instances for mode " +
                            to_string(cfg.mode));
    }

    AdamState adam = AdamState::init(net, cfg.learning_rate);
    Rng rng(derive_seed(cfg.seed, "transductive"));
    PoolSampler labeled(labeled_rows, rng);
    PoolSampler unlabeled(unlabeled_rows, rng);

    // One epoch sweeps the larger pool once; the smaller pool cycles.
    const std::size_t labeled_steps =
        (labeled.size() + static_cast<std::size_t>(cfg.labeled_batch) - 1) /
        static_cast<std::size_t>(cfg.labeled_batch);
    const std::size_t unlabeled_steps =
        (unlabeled.size() + static_cast<std::size_t>(cfg.unlabeled_batch) - 1) /
        static_cast<std::size_t>(cfg.unlabeled_batch);
    const std::size_t steps_per_epoch = std::max<std::size_t>(
        1, labeled.size() >= unlabeled.size() ? labeled_steps : unlabeled_steps);

    const bool early_stop = cfg.early_stop_patience > 0 && can_validate(data, cfg.mode);
    double best_metric = -1.0;
    int best_age = 0;
    ProjectionNet best_net = net;

    TrainLog log;
    for (int epoch = 1; epoch <= cfg.transductive_epochs; ++epoch) {
        double supervised_sum = 0.0;
        double triplet_sum = 0.0;
        double hubness_sum = 0.0;
        double unbias_sum = 0.0;
        double total_sum = 0.0;
        double discarded_sum = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            const std::vector<int> lab = labeled.draw(cfg.labeled_batch);
            const std::vector<int> unl = unlabeled.draw(cfg.unlabeled_batch);
            try {
                const LossAndGrad supervised = loss_and_grad(
                    net, table, SupervisedSpec{gather_labeled(data, lab), cfg.weights.lambda});
                TransductiveLossAndGrad transductive = transductive_loss_and_grad(
                    net, table, data.gather(unl), cfg.weights, cfg.mode, cfg.label_space);
                transductive.grads += supervised.grads;
                adam_step(net, transductive.grads, adam);

                supervised_sum += supervised.value;
                triplet_sum += transductive.parts.triplet;
                hubness_sum += transductive.parts.hubness;
                unbias_sum += transductive.parts.unbias;
                total_sum += supervised.value + transductive.parts.total;
                discarded_sum += transductive.parts.discarded_fraction;
            } catch (const NumericError& error) {
                throw with_epoch(error, "transductive", epoch);
            }
        }
        const double steps = static_cast<double>(steps_per_epoch);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = "transductive";
        rec.supervised_loss = supervised_sum / steps;
        rec.triplet_loss = triplet_sum / steps;
        rec.hubness_loss = hubness_sum / steps;
        rec.unbias_loss = unbias_sum / steps;
        rec.total = total_sum / steps;
        rec.discarded_fraction = discarded_sum / steps;
        log.records.push_back(rec);

        if (early_stop) {
            const double metric = validation_metric(data, table, net, cfg.mode);
            if (metric > best_metric) {
                best_metric = metric;
                best_net = net;
                best_age = 0;
            } else if (++best_age >= cfg.early_stop_patience) {
                net = best_net;
                break;
            }
        }
    }
    if (early_stop) {
        net = best_net;
    }
    return {std::move(net), std::move(log)};
}

}  // namespace tzsl
