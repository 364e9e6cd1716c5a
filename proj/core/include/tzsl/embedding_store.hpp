#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace tzsl {

enum class Split { kSeenTrain, kSeenTest, kUnseenTest };
enum class Partition { kSeen, kUnseen };

std::string to_string(Split split);
std::string to_string(Partition partition);
Split split_from_string(const std::string& text);
Partition partition_from_string(const std::string& text);

// One embedded instance. `label` is empty for unlabeled rows; test rows may
// carry labels, which are used by evaluation only.
struct Instance {
    std::string id;
    std::string label;
    Split split = Split::kSeenTrain;
    Eigen::VectorXd feature;

    bool has_label() const { return !label.empty(); }
};

// Per-class semantic vector with its seen/unseen partition tag. Class order
// is the table order; argmin ties are always broken toward the lowest index.
struct ClassEntry {
    std::string id;
    std::string name;
    Partition partition = Partition::kSeen;
    Eigen::VectorXd vector;
};

class SemanticTable {
public:
    SemanticTable(std::vector<ClassEntry> entries, Eigen::Index semantic_dim);

    Eigen::Index semantic_dim() const { return semantic_dim_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t seen_count() const { return seen_count_; }
    std::size_t unseen_count() const { return entries_.size() - seen_count_; }

    const std::vector<ClassEntry>& entries() const { return entries_; }
    const ClassEntry& entry(int index) const;
    bool contains(const std::string& class_id) const;
    int index_of(const std::string& class_id) const;  // throws ReferenceError

    std::vector<int> seen_indices() const;
    std::vector<int> unseen_indices() const;
    std::vector<int> all_indices() const;

    // Stacks the semantic vectors of the given classes, one row per class,
    // preserving the order of `indices`.
    Eigen::MatrixXd gather(const std::vector<int>& indices) const;

private:
    std::vector<ClassEntry> entries_;
    Eigen::Index semantic_dim_ = 0;
    std::size_t seen_count_ = 0;
};

class EmbeddingSet {
public:
    EmbeddingSet(std::vector<Instance> instances, Eigen::Index feature_dim);

    Eigen::Index feature_dim() const { return feature_dim_; }
    std::size_t size() const { return instances_.size(); }
    const std::vector<Instance>& instances() const { return instances_; }
    const Instance& instance(int index) const;

    std::vector<int> indices_with_split(Split split) const;

    // Stacks features of the given rows, one row per instance.
    Eigen::MatrixXd gather(const std::vector<int>& rows) const;

    // Checks label references: every label exists in the table and every
    // seen-train label belongs to the seen partition.
    void validate_against(const SemanticTable& table) const;

private:
    std::vector<Instance> instances_;
    Eigen::Index feature_dim_ = 0;
};

// Parameters of the deterministic synthetic benchmark generator.
struct SyntheticSpec {
    enum class Mode { kClusters, kPointSets };

    int num_seen_classes = 10;
    int num_unseen_classes = 5;
    Eigen::Index feature_dim = 64;
    Eigen::Index semantic_dim = 16;
    int instances_per_class = 100;
    double cluster_spread = 0.3;   // within-class standard deviation
    double semantic_noise = 0.05;  // prototype deviation from the linear image
    Mode mode = Mode::kClusters;
    std::uint64_t seed = 0;

    void validate() const;
};

std::string to_string(SyntheticSpec::Mode mode);
SyntheticSpec::Mode synthetic_mode_from_string(const std::string& text);

// File formats (see README): embeddings CSV has header
// instance_id,label,split,f0,...,f{m-1}; semantics CSV has header
// class_id,name,partition,e0,...,e{d-1}. Floats are written with the
// shortest representation that round-trips exactly.
SemanticTable load_semantics(const std::filesystem::path& path);
EmbeddingSet load_embeddings(const std::filesystem::path& path, const SemanticTable& table);
void save_semantics(const SemanticTable& table, const std::filesystem::path& path);
void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path);

// Deterministic synthetic benchmark: class semantics are standard normal,
// class feature prototypes are a fixed linear image of the semantics plus
// semantic_noise, instances are prototype plus isotropic cluster_spread
// noise. Seen classes split 80/20 into seen-train/seen-test by instance
// index; unseen classes are entirely unseen-test. With mode=pointsets the
// per-instance features are produced by the frozen SetEncoder applied to
// jittered class point sets.
std::pair<EmbeddingSet, SemanticTable> make_synthetic(const SyntheticSpec& spec);

// Re-tags k randomly chosen seen classes as unseen for cross-validation.
// Returns (reduced, validation): `reduced` is the original table minus the
// held-out classes; `validation` contains the remaining seen classes plus
// the k held-out classes re-tagged unseen (the original unseen classes are
// excluded so validation never touches them).
std::pair<SemanticTable, SemanticTable> hold_out_unseen_validation(const SemanticTable& table,
                                                                   int k, std::uint64_t seed);

}  // namespace tzsl
