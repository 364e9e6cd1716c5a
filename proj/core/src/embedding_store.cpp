#include "tzsl/embedding_store.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tzsl/error.hpp"
#include "tzsl/io.hpp"
#include "tzsl/rng.hpp"
#include "tzsl/set_encoder.hpp"

namespace tzsl {

namespace {

constexpr Eigen::Index kPointSetSize = 64;
constexpr Eigen::Index kPointSetHidden = 32;

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (const char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

// Splits file contents into lines, dropping a trailing '\r' per line so
// CRLF files load too. Line numbers are 1-based file positions.
std::vector<std::pair<int, std::string>> numbered_lines(const std::string& text) {
    std::vector<std::pair<int, std::string>> lines;
    std::string current;
    int line_no = 1;
    for (const char c : text) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r') {
                current.pop_back();
            }
            lines.emplace_back(line_no, current);
            current.clear();
            ++line_no;
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        if (current.back() == '\r') {
            current.pop_back();
        }
        lines.emplace_back(line_no, current);
    }
    return lines;
}

void check_vector_header(const std::vector<std::string>& fields, std::size_t fixed,
                         const char* prefix, const std::filesystem::path& path) {
    for (std::size_t i = fixed; i < fields.size(); ++i) {
        const std::string expected = prefix + std::to_string(i - fixed);
        if (fields[i] != expected) {
            throw ParseError(path.string() + ": line 1: expected header column '" + expected +
                             "', found '" + fields[i] + "'");
        }
    }
}

double parse_feature(const std::string& field, const std::filesystem::path& path, int line_no) {
    try {
        return parse_double(field);
    } catch (const ParseError&) {
        throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                         ": invalid numeric field '" + field + "'");
    }
}

}  // namespace

std::string to_string(Split split) {
    switch (split) {
        case Split::kSeenTrain: return "seen-train";
        case Split::kSeenTest: return "seen-test";
        case Split::kUnseenTest: return "unseen-test";
    }
    throw ArgumentError("unknown split value");
}

std::string to_string(Partition partition) {
    return partition == Partition::kSeen ? "seen" : "unseen";
}

Split split_from_string(const std::string& text) {
    if (text == "seen-train") return Split::kSeenTrain;
    if (text == "seen-test") return Split::kSeenTest;
    if (text == "unseen-test") return Split::kUnseenTest;
    throw ParseError("unknown split '" + text + "'");
}

Partition partition_from_string(const std::string& text) {
    if (text == "seen") return Partition::kSeen;
    if (text == "unseen") return Partition::kUnseen;
    throw ParseError("unknown partition '" + text + "'");
}

std::string to_string(SyntheticSpec::Mode mode) {
    return mode == SyntheticSpec::Mode::kClusters ? "clusters" : "pointsets";
}

SyntheticSpec::Mode synthetic_mode_from_string(const std::string& text) {
    if (text == "clusters") return SyntheticSpec::Mode::kClusters;
    if (text == "pointsets") return SyntheticSpec::Mode::kPointSets;
    throw ParseError("unknown synthetic mode '" + text + "'");
}

SemanticTable::SemanticTable(std::vector<ClassEntry> entries, Eigen::Index semantic_dim)
    : entries_(std::move(entries)), semantic_dim_(semantic_dim) {
    if (semantic_dim_ <= 0) {
        throw ValidationError("SemanticTable: semantic_dim must be positive");
    }
    if (entries_.empty()) {
        throw ValidationError("SemanticTable: table has no classes");
    }
    std::unordered_set<std::string> ids;
    for (const ClassEntry& entry : entries_) {
        if (entry.id.empty()) {
            throw ValidationError("SemanticTable: empty class id");
        }
        if (!ids.insert(entry.id).second) {
            throw ValidationError("SemanticTable: duplicate class id '" + entry.id + "'");
        }
        if (entry.vector.size() != semantic_dim_) {
            throw DimensionError("SemanticTable: class '" + entry.id + "' has vector length " +
                                 std::to_string(entry.vector.size()) + ", expected " +
                                 std::to_string(semantic_dim_));
        }
        if (!entry.vector.allFinite()) {
            throw ValidationError("SemanticTable: class '" + entry.id +
                                  "' has non-finite components");
        }
        if (entry.partition == Partition::kSeen) {
            ++seen_count_;
        }
    }
}

const ClassEntry& SemanticTable::entry(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= entries_.size()) {
        throw ArgumentError("SemanticTable::entry: index out of range");
    }
    return entries_[static_cast<std::size_t>(index)];
}

bool SemanticTable::contains(const std::string& class_id) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const ClassEntry& e) { return e.id == class_id; });
}

int SemanticTable::index_of(const std::string& class_id) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].id == class_id) {
            return static_cast<int>(i);
        }
    }
    throw ReferenceError("unknown class id '" + class_id + "'");
}

std::vector<int> SemanticTable::seen_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].partition == Partition::kSeen) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

std::vector<int> SemanticTable::unseen_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].partition == Partition::kUnseen) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

std::vector<int> SemanticTable::all_indices() const {
    std::vector<int> out(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        out[i] = static_cast<int>(i);
    }
    return out;
}

Eigen::MatrixXd SemanticTable::gather(const std::vector<int>& indices) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(indices.size()), semantic_dim_);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = entry(indices[r]).vector.transpose();
    }
    return out;
}

EmbeddingSet::EmbeddingSet(std::vector<Instance> instances, Eigen::Index feature_dim)
    : instances_(std::move(instances)), feature_dim_(feature_dim) {
    if (feature_dim_ <= 0) {
        throw ValidationError("EmbeddingSet: feature_dim must be positive");
    }
    std::unordered_set<std::string> ids;
    for (const Instance& instance : instances_) {
        if (instance.id.empty()) {
            throw ValidationError("EmbeddingSet: empty instance id");
        }
        if (!ids.insert(instance.id).second) {
            throw ValidationError("EmbeddingSet: duplicate instance id '" + instance.id + "'");
        }
        if (instance.feature.size() != feature_dim_) {
            throw DimensionError("EmbeddingSet: instance '" + instance.id +
                                 "' has feature length " +
                                 std::to_string(instance.feature.size()) + ", expected " +
                                 std::to_string(feature_dim_));
        }
        if (!instance.feature.allFinite()) {
            throw ValidationError("EmbeddingSet: instance '" + instance.id +
                                  "' has non-finite components");
        }
        if (instance.split == Split::kSeenTrain && !instance.has_label()) {
            throw ValidationError("EmbeddingSet: seen-train instance '" + instance.id +
                                  "' has no label");
        }
    }
}

const Instance& EmbeddingSet::instance(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= instances_.size()) {
        throw ArgumentError("EmbeddingSet::instance: index out of range");
    }
    return instances_[static_cast<std::size_t>(index)];
}

std::vector<int> EmbeddingSet::indices_with_split(Split split) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (instances_[i].split == split) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

Eigen::MatrixXd EmbeddingSet::gather(const std::vector<int>& rows) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), feature_dim_);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = instance(rows[r]).feature.transpose();
    }
    return out;
}

void EmbeddingSet::validate_against(const SemanticTable& table) const {
    for (const Instance& instance : instances_) {
        if (!instance.has_label()) {
            continue;
        }
        if (!table.contains(instance.label)) {
            throw ReferenceError("instance '" + instance.id + "' references unknown class '" +
                                 instance.label + "'");
        }
        if (instance.split == Split::kSeenTrain) {
            const ClassEntry& entry = table.entry(table.index_of(instance.label));
            if (entry.partition != Partition::kSeen) {
                throw ReferenceError("seen-train instance '" + instance.id +
                                     "' references unseen class '" + instance.label + "'");
            }
        }
    }
}

SemanticTable load_semantics(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    const auto lines = numbered_lines(text);
    if (lines.empty()) {
        throw ParseError(path.string() + ": empty file");
    }

    const auto header = split_fields(lines[0].second);
    if (header.size() < 4 || header[0] != "class_id" || header[1] != "name" ||
        header[2] != "partition") {
        throw ParseError(path.string() + ": line 1: expected header class_id,name,partition,e0,...");
    }
    check_vector_header(header, 3, "e", path);
    const Eigen::Index dim = static_cast<Eigen::Index>(header.size() - 3);

    std::vector<ClassEntry> entries;
    std::unordered_map<std::string, Partition> seen_partitions;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [line_no, line] = lines[i];
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw DimensionError(path.string() + ": line " + std::to_string(line_no) + ": has " +
                                 std::to_string(fields.size()) + " columns, expected " +
                                 std::to_string(header.size()));
        }
        ClassEntry entry;
        entry.id = fields[0];
        entry.name = fields[1];
        try {
            entry.partition = partition_from_string(fields[2]);
        } catch (const ParseError&) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": unknown partition '" + fields[2] + "'");
        }
        entry.vector.resize(dim);
        for (Eigen::Index c = 0; c < dim; ++c) {
            entry.vector(c) = parse_feature(fields[static_cast<std::size_t>(c) + 3], path, line_no);
        }
        const auto previous = seen_partitions.find(entry.id);
        if (previous != seen_partitions.end()) {
            if (previous->second != entry.partition) {
                throw PartitionError(path.string() + ": line " + std::to_string(line_no) +
                                     ": class '" + entry.id +
                                     "' listed as both seen and unseen");
            }
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                                  ": duplicate class id '" + entry.id + "'");
        }
        seen_partitions.emplace(entry.id, entry.partition);
        entries.push_back(std::move(entry));
    }
    return SemanticTable(std::move(entries), dim);
}

EmbeddingSet load_embeddings(const std::filesystem::path& path, const SemanticTable& table) {
    const std::string text = read_text(path);
    const auto lines = numbered_lines(text);
    if (lines.empty()) {
        throw ParseError(path.string() + ": empty file");
    }

    const auto header = split_fields(lines[0].second);
    if (header.size() < 4 || header[0] != "instance_id" || header[1] != "label" ||
        header[2] != "split") {
        throw ParseError(path.string() + ": line 1: expected header instance_id,label,split,f0,...");
    }
    check_vector_header(header, 3, "f", path);
    const Eigen::Index dim = static_cast<Eigen::Index>(header.size() - 3);

    std::vector<Instance> instances;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [line_no, line] = lines[i];
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != header.size()) {
            throw DimensionError(path.string() + ": line " + std::to_string(line_no) + ": has " +
                                 std::to_string(fields.size()) + " columns, expected " +
                                 std::to_string(header.size()));
        }
        Instance instance;
        instance.id = fields[0];
        instance.label = fields[1];
        try {
            instance.split = split_from_string(fields[2]);
        } catch (const ParseError&) {
            throw ParseError(path.string() + ": line " + std::to_string(line_no) +
                             ": unknown split '" + fields[2] + "'");
        }
        instance.feature.resize(dim);
        for (Eigen::Index c = 0; c < dim; ++c) {
            instance.feature(c) =
                parse_feature(fields[static_cast<std::size_t>(c) + 3], path, line_no);
        }
        if (!instance.feature.allFinite()) {
            throw ValidationError(path.string() + ": line " + std::to_string(line_no) +
                                  ": non-finite feature value");
        }
        instances.push_back(std::move(instance));
    }
    EmbeddingSet set(std::move(instances), dim);
    set.validate_against(table);
    return set;
}

void save_semantics(const SemanticTable& table, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "class_id,name,partition";
    for (Eigen::Index c = 0; c < table.semantic_dim(); ++c) {
        out << ",e" << c;
    }
    out << '\n';
    for (const ClassEntry& entry : table.entries()) {
        out << entry.id << ',' << entry.name << ',' << to_string(entry.partition);
        for (Eigen::Index c = 0; c < table.semantic_dim(); ++c) {
            out << ',' << format_double(entry.vector(c));
        }
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

void save_embeddings(const EmbeddingSet& set, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "instance_id,label,split";
    for (Eigen::Index c = 0; c < set.feature_dim(); ++c) {
        out << ",f" << c;
    }
    out << '\n';
    for (const Instance& instance : set.instances()) {
        out << instance.id << ',' << instance.label << ',' << to_string(instance.split);
        for (Eigen::Index c = 0; c < set.feature_dim(); ++c) {
            out << ',' << format_double(instance.feature(c));
        }
        out << '\n';
    }
    write_text_atomic(path, out.str());
}

void SyntheticSpec::validate() const {
    if (num_seen_classes < 1 || num_unseen_classes < 1) {
        throw ValidationError("SyntheticSpec: class counts must be >= 1");
    }
    if (feature_dim < 1 || semantic_dim < 1) {
        throw ValidationError("SyntheticSpec: dimensions must be >= 1");
    }
    if (instances_per_class < 1) {
        throw ValidationError("SyntheticSpec: instances_per_class must be >= 1");
    }
    if (!(cluster_spread > 0.0) || !std::isfinite(cluster_spread)) {
        throw ValidationError("SyntheticSpec: cluster_spread must be positive");
    }
    if (semantic_noise < 0.0 || !std::isfinite(semantic_noise)) {
        throw ValidationError("SyntheticSpec: semantic_noise must be >= 0");
    }
}

std::pair<EmbeddingSet, SemanticTable> make_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, "synthetic"));

    const int total_classes = spec.num_seen_classes + spec.num_unseen_classes;
    const double map_scale = 0.5 / std::sqrt(static_cast<double>(spec.semantic_dim));

    // Fixed linear map from semantic space. In clusters mode it lands in
    // feature space; in pointsets mode it lays out the base point cloud.
    const Eigen::Index image_rows = spec.mode == SyntheticSpec::Mode::kClusters
                                        ? spec.feature_dim
                                        : 3 * kPointSetSize;
    Eigen::MatrixXd linear_map(image_rows, spec.semantic_dim);
    for (Eigen::Index r = 0; r < linear_map.rows(); ++r) {
        for (Eigen::Index c = 0; c < linear_map.cols(); ++c) {
            linear_map(r, c) = rng.normal() * map_scale;
        }
    }

    SetEncoder encoder(kPointSetHidden, spec.feature_dim, derive_seed(spec.seed, "encoder"));

    const int train_per_class = (4 * spec.instances_per_class + 4) / 5;  // ceil(0.8 * n)

    std::vector<ClassEntry> classes;
    std::vector<Instance> instances;
    classes.reserve(static_cast<std::size_t>(total_classes));
    instances.reserve(static_cast<std::size_t>(total_classes) *
                      static_cast<std::size_t>(spec.instances_per_class));

    for (int c = 0; c < total_classes; ++c) {
        const bool seen = c < spec.num_seen_classes;

        ClassEntry entry;
        entry.id = "c" + std::string(c < 10 ? "00" : c < 100 ? "0" : "") + std::to_string(c);
        entry.name = "synthetic-" + std::to_string(c);
        entry.partition = seen ? Partition::kSeen : Partition::kUnseen;
        entry.vector.resize(spec.semantic_dim);
        for (Eigen::Index k = 0; k < spec.semantic_dim; ++k) {
            entry.vector(k) = rng.normal();
        }

        Eigen::VectorXd image = linear_map * entry.vector;
        for (Eigen::Index k = 0; k < image.size(); ++k) {
            image(k) += spec.semantic_noise * rng.normal();
        }

        for (int i = 0; i < spec.instances_per_class; ++i) {
            Instance instance;
            instance.id = entry.id + "-" + std::to_string(i);
            if (seen) {
                instance.split = i < train_per_class ? Split::kSeenTrain : Split::kSeenTest;
                instance.label = entry.id;
            } else {
                instance.split = Split::kUnseenTest;
                instance.label = entry.id;  // ground truth, consumed by evaluation only
            }
            if (spec.mode == SyntheticSpec::Mode::kClusters) {
                instance.feature.resize(spec.feature_dim);
                for (Eigen::Index k = 0; k < spec.feature_dim; ++k) {
                    instance.feature(k) = image(k) + spec.cluster_spread * rng.normal();
                }
            } else {
                PointSet points;
                points.points.resize(kPointSetSize, 3);
                for (Eigen::Index p = 0; p < kPointSetSize; ++p) {
                    for (Eigen::Index k = 0; k < 3; ++k) {
                        points.points(p, k) =
                            image(3 * p + k) + spec.cluster_spread * rng.normal();
                    }
                }
                instance.feature = encoder.encode(points);
            }
            instances.push_back(std::move(instance));
        }
        classes.push_back(std::move(entry));
    }

    SemanticTable table(std::move(classes), spec.semantic_dim);
    EmbeddingSet set(std::move(instances), spec.feature_dim);
    set.validate_against(table);
    return {std::move(set), std::move(table)};
}

std::pair<SemanticTable, SemanticTable> hold_out_unseen_validation(const SemanticTable& table,
                                                                   int k, std::uint64_t seed) {
    const int seen = static_cast<int>(table.seen_count());
    if (k <= 0 || k >= seen) {
        throw ArgumentError("hold_out_unseen_validation: k must satisfy 0 < k < S (S=" +
                            std::to_string(seen) + ", k=" + std::to_string(k) + ")");
    }

    std::vector<int> candidates = table.seen_indices();
    Rng rng(derive_seed(seed, "hold-out"));
    rng.shuffle(candidates);
    std::unordered_set<int> held(candidates.begin(), candidates.begin() + k);

    std::vector<ClassEntry> reduced;
    std::vector<ClassEntry> validation;
    for (std::size_t i = 0; i < table.entries().size(); ++i) {
        const ClassEntry& entry = table.entries()[i];
        const int index = static_cast<int>(i);
        if (entry.partition == Partition::kUnseen) {
            reduced.push_back(entry);  // validation never sees the real unseen classes
            continue;
        }
        if (held.count(index) != 0) {
            ClassEntry retagged = entry;
            retagged.partition = Partition::kUnseen;
            validation.push_back(std::move(retagged));
        } else {
            reduced.push_back(entry);
            validation.push_back(entry);
        }
    }
    return {SemanticTable(std::move(reduced), table.semantic_dim()),
            SemanticTable(std::move(validation), table.semantic_dim())};
}

}  // namespace tzsl
