#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tzsl/embedding_store.hpp"
#include "tzsl/losses.hpp"
#include "tzsl/projection_net.hpp"

namespace tzsl {

struct TrainConfig {
    TaskMode mode = TaskMode::kGzsl;
    Direction direction = Direction::kS2F;
    LossWeights weights;
    double learning_rate = 1e-4;
    int labeled_batch = 64;    // N
    int unlabeled_batch = 64;  // N'
    int inductive_epochs = 100;
    int transductive_epochs = 50;
    Eigen::Index hidden_dim = 512;
    Activation activation = Activation::kTanh;
    std::uint64_t seed = 0;
    LabelSpacePolicy label_space = LabelSpacePolicy::kSeenAndUnseen;
    // Transductive stage stops after this many epochs without improvement of
    // the validation metric (unseen top-1 for ZSL, HM for GZSL) and restores
    // the best weights. 0 disables; it is also skipped when the test rows
    // carry no labels or one side of the GZSL test split is empty.
    int early_stop_patience = 10;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;  // 1-based within its stage
    std::string stage;
    double supervised_loss = 0.0;
    double triplet_loss = 0.0;
    double hubness_loss = 0.0;
    double unbias_loss = 0.0;
    double total = 0.0;
    double discarded_fraction = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> records;
};

// CSV with one row per epoch:
// epoch,stage,supervised_loss,triplet_loss,hubness_loss,unbias_loss,total,discarded_fraction
std::string train_log_to_csv(const TrainLog& log);
void save_train_log(const TrainLog& log, const std::filesystem::path& path);

struct TrainResult {
    ProjectionNet net;
    TrainLog log;
};

// Inductive stage: Adam over shuffled seen-train mini-batches of the
// supervised projection loss. Deterministic in (data, cfg, seed).
TrainResult train_inductive(const EmbeddingSet& data, const SemanticTable& table,
                            const TrainConfig& cfg);

// Transductive stage: starts from the inductive weights; every step draws
// one labeled and one unlabeled batch, re-assigns anchors with the current
// weights, and steps Adam on supervised + weighted transductive loss. The
// unlabeled pool is unseen-test (ZSL) or seen-test plus unseen-test (GZSL);
// ground-truth labels on those rows are never used by any loss.
TrainResult train_transductive(const ProjectionNet& inductive_net, const EmbeddingSet& data,
                               const SemanticTable& table, const TrainConfig& cfg);

}  // namespace tzsl
