#include "tzsl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "tzsl/error.hpp"

namespace tzsl {

namespace {

// Anchors and class prototypes in the space where distances are measured:
// feature space for S2F (prototypes are projected semantics), semantic space
// for F2S (anchors are projected features). Exactly one side carries a
// forward cache; gradients flow through that side only.
struct MatchContext {
    Eigen::MatrixXd anchors;     // B x k
    Eigen::MatrixXd prototypes;  // K x k, all table classes in table order
    std::optional<ForwardCache> anchor_cache;
    std::optional<ForwardCache> proto_cache;
};

void check_dims(const ProjectionNet& net, const SemanticTable& table, Eigen::Index feature_cols) {
    const Dims& dims = net.dims();
    if (net.direction() == Direction::kS2F) {
        if (dims.in != table.semantic_dim()) {
            throw ArgumentError("S2F net expects semantic input of dim " +
                                std::to_string(dims.in) + ", table has dim " +
                                std::to_string(table.semantic_dim()));
        }
        if (dims.out != feature_cols) {
            throw ArgumentError("S2F net produces dim " + std::to_string(dims.out) +
                                ", features have dim " + std::to_string(feature_cols));
        }
    } else {
        if (dims.in != feature_cols) {
            throw ArgumentError("F2S net expects feature input of dim " +
                                std::to_string(dims.in) + ", features have dim " +
                                std::to_string(feature_cols));
        }
        if (dims.out != table.semantic_dim()) {
            throw ArgumentError("F2S net produces dim " + std::to_string(dims.out) +
                                ", table has dim " + std::to_string(table.semantic_dim()));
        }
    }
}

MatchContext make_context(const ProjectionNet& net, const SemanticTable& table,
                          const Eigen::MatrixXd& features, bool need_grads) {
    check_dims(net, table, features.cols());
    const Eigen::MatrixXd semantics = table.gather(table.all_indices());
    MatchContext ctx;
    if (net.direction() == Direction::kS2F) {
        ctx.anchors = features;
        if (need_grads) {
            ctx.proto_cache = net.forward_cached(semantics);
            ctx.prototypes = ctx.proto_cache->outputs;
        } else {
            ctx.prototypes = net.forward(semantics);
        }
    } else {
        if (need_grads) {
            ctx.anchor_cache = net.forward_cached(features);
            ctx.anchors = ctx.anchor_cache->outputs;
        } else {
            ctx.anchors = net.forward(features);
        }
        ctx.prototypes = semantics;
    }
    return ctx;
}

double sq_dist_rows(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b,
                    Eigen::Index k) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double diff = a(i, c) - b(k, c);
        sum += diff * diff;
    }
    return sum;
}

Eigen::MatrixXd distances(const MatchContext& ctx) {
    return sq_dist_matrix(ctx.anchors, ctx.prototypes);
}

// First strict minimum: ties break toward the earliest entry of `cols`,
// which the callers keep in table order.
int argmin_over(const Eigen::MatrixXd& d2, Eigen::Index row, const std::vector<int>& cols) {
    int best = cols[0];
    double best_value = d2(row, cols[0]);
    for (std::size_t j = 1; j < cols.size(); ++j) {
        const double value = d2(row, cols[j]);
        if (value < best_value) {
            best_value = value;
            best = cols[j];
        }
    }
    return best;
}

// Position within `cols` of the per-row argmin.
int argmin_position(const Eigen::MatrixXd& d2, Eigen::Index row, const std::vector<int>& cols) {
    int best = 0;
    double best_value = d2(row, cols[0]);
    for (std::size_t j = 1; j < cols.size(); ++j) {
        const double value = d2(row, cols[j]);
        if (value < best_value) {
            best_value = value;
            best = static_cast<int>(j);
        }
    }
    return best;
}

// log sum_j exp(-d2(row, cols[j])) with max subtraction.
double logsumexp_neg(const Eigen::MatrixXd& d2, Eigen::Index row, const std::vector<int>& cols) {
    double shift = -d2(row, cols[0]);
    for (std::size_t j = 1; j < cols.size(); ++j) {
        shift = std::max(shift, -d2(row, cols[j]));
    }
    double sum = 0.0;
    for (const int col : cols) {
        sum += std::exp(-d2(row, col) - shift);
    }
    return shift + std::log(sum);
}

std::vector<int> label_space_columns(const SemanticTable& table, LabelSpacePolicy policy) {
    std::vector<int> cols = policy == LabelSpacePolicy::kUnseenOnly ? table.unseen_indices()
                                                                    : table.all_indices();
    if (cols.empty()) {
        throw ArgumentError("label space is empty");
    }
    return cols;
}

// Chain rule for losses expressed through squared distances:
// dL/d(d2(i, cols[j])) = coeffs(i, j). Adds the resulting gradients w.r.t.
// the anchors and prototypes; either output may be null.
void apply_distance_coeffs(const MatchContext& ctx, const std::vector<int>& cols,
                           const Eigen::MatrixXd& coeffs, Eigen::MatrixXd* danchors,
                           Eigen::MatrixXd* dprotos) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const int col = cols[j];
        const Eigen::VectorXd c = coeffs.col(static_cast<Eigen::Index>(j));
        const Eigen::RowVectorXd proto = ctx.prototypes.row(col);
        if (danchors != nullptr) {
            danchors->noalias() += 2.0 * (c.asDiagonal() * ctx.anchors - c * proto);
        }
        if (dprotos != nullptr) {
            dprotos->row(col) += 2.0 * (c.sum() * proto - c.transpose() * ctx.anchors);
        }
    }
}

// Zeroed gradient buffers for whichever side of the match context carries a
// forward cache, plus the final backpropagation into parameter space.
struct GradBuffers {
    Eigen::MatrixXd danchors;
    Eigen::MatrixXd dprotos;
    Eigen::MatrixXd* da = nullptr;
    Eigen::MatrixXd* dp = nullptr;

    explicit GradBuffers(const MatchContext& ctx) {
        if (ctx.anchor_cache.has_value()) {
            danchors = Eigen::MatrixXd::Zero(ctx.anchors.rows(), ctx.anchors.cols());
            da = &danchors;
        }
        if (ctx.proto_cache.has_value()) {
            dprotos = Eigen::MatrixXd::Zero(ctx.prototypes.rows(), ctx.prototypes.cols());
            dp = &dprotos;
        }
    }

    void add_scaled(const GradBuffers& other, double factor) {
        if (da != nullptr) {
            danchors += factor * other.danchors;
        }
        if (dp != nullptr) {
            dprotos += factor * other.dprotos;
        }
    }

    void backprop(const ProjectionNet& net, const MatchContext& ctx, Gradients& grads) const {
        if (ctx.anchor_cache.has_value()) {
            net.accumulate_backward(*ctx.anchor_cache, danchors, grads);
        }
        if (ctx.proto_cache.has_value()) {
            net.accumulate_backward(*ctx.proto_cache, dprotos, grads);
        }
    }
};

struct TripletCoreResult {
    double value = 0.0;
    int active = 0;
};

TripletCoreResult triplet_core(const MatchContext& ctx, const Eigen::MatrixXd& d2,
                               const TripletBatch& batch, double margin,
                               Eigen::MatrixXd* danchors, Eigen::MatrixXd* dprotos) {
    TripletCoreResult result;
    result.active = batch.active_count();
    if (result.active == 0) {
        return result;
    }
    const double norm = 1.0 / static_cast<double>(result.active);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < ctx.anchors.rows(); ++i) {
        if (batch.discarded[static_cast<std::size_t>(i)]) {
            continue;
        }
        const int pos = batch.positive[static_cast<std::size_t>(i)];
        const int neg = batch.negative[static_cast<std::size_t>(i)];
        const double hinge = d2(i, pos) + margin - d2(i, neg);
        if (hinge <= 0.0) {
            continue;  // flat side of max{0, .}
        }
        sum += hinge;
        if (danchors != nullptr) {
            danchors->row(i) += 2.0 * norm * (ctx.prototypes.row(neg) - ctx.prototypes.row(pos));
        }
        if (dprotos != nullptr) {
            dprotos->row(pos) += 2.0 * norm * (ctx.prototypes.row(pos) - ctx.anchors.row(i));
            dprotos->row(neg) += 2.0 * norm * (ctx.anchors.row(i) - ctx.prototypes.row(neg));
        }
    }
    result.value = sum * norm;
    return result;
}

// Population mean/variance of the count vector, zero counts included.
struct CountStats {
    double mean = 0.0;
    double variance = 0.0;
};

CountStats count_stats(const std::vector<long>& counts) {
    CountStats stats;
    const double k = static_cast<double>(counts.size());
    double sum = 0.0;
    for (const long c : counts) {
        sum += static_cast<double>(c);
    }
    stats.mean = sum / k;
    double sq = 0.0;
    for (const long c : counts) {
        const double d = static_cast<double>(c) - stats.mean;
        sq += d * d;
    }
    stats.variance = sq / k;
    return stats;
}

// Raw skewness loss from per-sample label positions within the space.
double skewness_from_positions(const std::vector<long>& counts,
                               const std::vector<int>& positions) {
    const CountStats stats = count_stats(counts);
    if (stats.variance == 0.0) {
        return 0.0;
    }
    double sum = 0.0;
    for (const int pos : positions) {
        const double d = static_cast<double>(counts[static_cast<std::size_t>(pos)]) - stats.mean;
        sum += d * d * d;
    }
    const double n = static_cast<double>(positions.size());
    return sum / (n * std::pow(stats.variance, 1.5));
}

std::vector<int> argmin_positions(const Eigen::MatrixXd& d2, const std::vector<int>& cols) {
    std::vector<int> positions(static_cast<std::size_t>(d2.rows()));
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
        positions[static_cast<std::size_t>(i)] = argmin_position(d2, i, cols);
    }
    return positions;
}

std::vector<long> counts_from_positions(const std::vector<int>& positions, std::size_t space) {
    std::vector<long> counts(space, 0);
    for (const int pos : positions) {
        counts[static_cast<std::size_t>(pos)] += 1;
    }
    return counts;
}

double pi_from_positions(const Eigen::MatrixXd& d2, const std::vector<int>& cols,
                         const std::vector<int>& positions) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
        const int col = cols[static_cast<std::size_t>(positions[static_cast<std::size_t>(i)])];
        sum += d2(i, col) + logsumexp_neg(d2, i, cols);
    }
    return sum / static_cast<double>(d2.rows());
}

struct HubnessCoreResult {
    double value = 0.0;
    double pi = 0.0;
    double skewness = 0.0;
};

// Pseudo-labels, histogram and the skewness factor are constants for
// differentiation; only the confidence weight carries gradients.
HubnessCoreResult hubness_core(const MatchContext& ctx, const Eigen::MatrixXd& d2,
                               const std::vector<int>& cols,
                               const std::vector<int>& positions, Eigen::MatrixXd* danchors,
                               Eigen::MatrixXd* dprotos) {
    HubnessCoreResult result;
    const std::vector<long> counts = counts_from_positions(positions, cols.size());
    result.skewness = skewness_from_positions(counts, positions);
    result.pi = pi_from_positions(d2, cols, positions);
    result.value = result.pi * result.skewness;

    if ((danchors != nullptr || dprotos != nullptr) && result.skewness != 0.0) {
        const Eigen::Index rows = d2.rows();
        const double norm = result.skewness / static_cast<double>(rows);
        Eigen::MatrixXd coeffs(rows, static_cast<Eigen::Index>(cols.size()));
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double lse = logsumexp_neg(d2, i, cols);
            for (std::size_t j = 0; j < cols.size(); ++j) {
                const double softmax = std::exp(-d2(i, cols[j]) - lse);
                const double indicator =
                    static_cast<int>(j) == positions[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
                coeffs(i, static_cast<Eigen::Index>(j)) = norm * (indicator - softmax);
            }
        }
        apply_distance_coeffs(ctx, cols, coeffs, danchors, dprotos);
    }
    return result;
}

double unbias_core(const MatchContext& ctx, const Eigen::MatrixXd& d2,
                   const std::vector<int>& all_cols, const std::vector<int>& unseen_cols,
                   Eigen::MatrixXd* danchors, Eigen::MatrixXd* dprotos) {
    const Eigen::Index rows = d2.rows();
    const double norm = 1.0 / static_cast<double>(rows);
    std::unordered_set<int> unseen_set(unseen_cols.begin(), unseen_cols.end());

    double value = 0.0;
    Eigen::MatrixXd coeffs;
    const bool need_grads = danchors != nullptr || dprotos != nullptr;
    if (need_grads) {
        coeffs = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(all_cols.size()));
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double lse_all = logsumexp_neg(d2, i, all_cols);
        const double lse_unseen = logsumexp_neg(d2, i, unseen_cols);
        value += lse_all - lse_unseen;
        if (need_grads) {
            for (std::size_t j = 0; j < all_cols.size(); ++j) {
                const int col = all_cols[j];
                const double p = std::exp(-d2(i, col) - lse_all);
                const double q =
                    unseen_set.count(col) != 0 ? std::exp(-d2(i, col) - lse_unseen) : 0.0;
                coeffs(i, static_cast<Eigen::Index>(j)) = norm * (q - p);
            }
        }
    }
    if (need_grads) {
        apply_distance_coeffs(ctx, all_cols, coeffs, danchors, dprotos);
    }
    return value * norm;
}

// Supervised squared-residual loss; inputs/targets chosen by direction.
double supervised_core(const ProjectionNet& net, const SemanticTable& table,
                       const LabeledBatch& batch, double lambda, Gradients* grads) {
    if (batch.features.rows() == 0) {
        throw ArgumentError("supervised loss: batch is empty");
    }
    if (static_cast<std::size_t>(batch.features.rows()) != batch.labels.size()) {
        throw ArgumentError("supervised loss: feature/label count mismatch");
    }
    if (lambda < 0.0) {
        throw ArgumentError("supervised loss: lambda must be >= 0");
    }
    check_dims(net, table, batch.features.cols());

    Eigen::MatrixXd semantics(batch.features.rows(), table.semantic_dim());
    for (Eigen::Index i = 0; i < batch.features.rows(); ++i) {
        const std::string& label = batch.labels[static_cast<std::size_t>(i)];
        const int index = table.index_of(label);
        if (table.entry(index).partition != Partition::kSeen) {
            throw ArgumentError("supervised loss: label '" + label + "' is not a seen class");
        }
        semantics.row(i) = table.entry(index).vector.transpose();
    }

    const bool s2f = net.direction() == Direction::kS2F;
    const Eigen::MatrixXd& inputs = s2f ? semantics : batch.features;
    const Eigen::MatrixXd& targets = s2f ? batch.features : semantics;

    const double n = static_cast<double>(batch.features.rows());
    if (grads == nullptr) {
        const Eigen::MatrixXd outputs = net.forward(inputs);
        return (outputs - targets).squaredNorm() / n + lambda * net.l2_penalty();
    }
    const ForwardCache cache = net.forward_cached(inputs);
    const Eigen::MatrixXd residual = cache.outputs - targets;
    net.accumulate_backward(cache, (2.0 / n) * residual, *grads);
    net.accumulate_l2_gradient(lambda, *grads);
    return residual.squaredNorm() / n + lambda * net.l2_penalty();
}

void require_nonempty(const Eigen::MatrixXd& features, const char* op) {
    if (features.rows() == 0) {
        throw ArgumentError(std::string(op) + ": batch is empty");
    }
}

std::vector<int> positions_from_labels(const SemanticTable& table, const std::vector<int>& cols,
                                       const std::vector<std::string>& labels) {
    std::unordered_map<int, int> col_position;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        col_position.emplace(cols[j], static_cast<int>(j));
    }
    std::vector<int> positions;
    positions.reserve(labels.size());
    for (const std::string& label : labels) {
        const auto it = col_position.find(table.index_of(label));
        if (it == col_position.end()) {
            throw ArgumentError("label '" + label + "' is outside the label space");
        }
        positions.push_back(it->second);
    }
    return positions;
}

void validate_triplet_batch(const TripletBatch& batch, const SemanticTable& table) {
    const std::size_t rows = static_cast<std::size_t>(batch.anchors.rows());
    if (batch.positive.size() != rows || batch.negative.size() != rows ||
        batch.discarded.size() != rows) {
        throw ArgumentError("triplet batch: per-anchor arrays do not match the anchor count");
    }
    const int k = static_cast<int>(table.size());
    for (std::size_t i = 0; i < rows; ++i) {
        if (batch.discarded[i]) {
            continue;
        }
        const int pos = batch.positive[i];
        const int neg = batch.negative[i];
        if (pos < 0 || pos >= k || neg < 0 || neg >= k) {
            throw ArgumentError("triplet batch: class index out of range");
        }
        if (pos == neg) {
            throw ArgumentError("triplet batch: positive equals negative for anchor " +
                                std::to_string(i));
        }
    }
}

struct TransductiveWork {
    TransductiveLoss parts;
    TripletBatch triplets;
};

TransductiveWork transductive_core(const ProjectionNet& net, const SemanticTable& table,
                                   const Eigen::MatrixXd& features, const LossWeights& weights,
                                   TaskMode mode, LabelSpacePolicy label_space,
                                   Gradients* grads) {
    weights.validate();
    require_nonempty(features, "transductive loss");

    const bool need_grads = grads != nullptr;
    MatchContext ctx = make_context(net, table, features, need_grads);
    const Eigen::MatrixXd d2 = distances(ctx);
    GradBuffers total(ctx);

    TransductiveWork work;

    // Triplet term: anchors re-assigned with the current weights.
    const std::vector<int> seen = table.seen_indices();
    const std::vector<int> unseen = table.unseen_indices();
    if (seen.empty() || unseen.empty()) {
        throw ArgumentError("transductive loss: needs at least one seen and one unseen class");
    }
    work.triplets.anchors = features;
    work.triplets.positive.resize(static_cast<std::size_t>(features.rows()), -1);
    work.triplets.negative.resize(static_cast<std::size_t>(features.rows()), -1);
    work.triplets.discarded.assign(static_cast<std::size_t>(features.rows()), 0);
    int discarded = 0;
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const std::size_t row = static_cast<std::size_t>(i);
        if (mode == TaskMode::kZsl) {
            work.triplets.positive[row] = argmin_over(d2, i, unseen);
        } else {
            const int winner = argmin_over(d2, i, table.all_indices());
            if (table.entry(winner).partition == Partition::kSeen) {
                work.triplets.discarded[row] = 1;
                ++discarded;
            } else {
                work.triplets.positive[row] = winner;
            }
        }
        if (!work.triplets.discarded[row]) {
            work.triplets.negative[row] = argmin_over(d2, i, seen);
        }
    }
    work.parts.discarded_fraction =
        static_cast<double>(discarded) / static_cast<double>(features.rows());

    // Component gradients are accumulated into shared buffers with their
    // alpha weights, then backpropagated once.
    if (weights.alpha1 > 0.0) {
        GradBuffers part(ctx);
        work.parts.triplet =
            triplet_core(ctx, d2, work.triplets, weights.margin, part.da, part.dp).value;
        total.add_scaled(part, weights.alpha1);
    }

    if (weights.alpha2 > 0.0) {
        GradBuffers part(ctx);
        const std::vector<int> cols = label_space_columns(table, label_space);
        const std::vector<int> positions = argmin_positions(d2, cols);
        work.parts.hubness = hubness_core(ctx, d2, cols, positions, part.da, part.dp).value;
        total.add_scaled(part, weights.alpha2);
    }

    if (weights.alpha3 > 0.0) {
        GradBuffers part(ctx);
        work.parts.unbias =
            unbias_core(ctx, d2, table.all_indices(), unseen, part.da, part.dp);
        total.add_scaled(part, weights.alpha3);
    }

    work.parts.total = weights.alpha1 * work.parts.triplet +
                       weights.alpha2 * work.parts.hubness + weights.alpha3 * work.parts.unbias;

    if (need_grads) {
        total.backprop(net, ctx, *grads);
    }
    return work;
}

void check_finite(double value, const Gradients& grads, const char* op) {
    if (!std::isfinite(value)) {
        throw NumericError(std::string(op) + ": loss value is non-finite");
    }
    const std::string bad = grads.first_non_finite();
    if (!bad.empty()) {
        throw NumericError(std::string(op) + ": non-finite gradient in parameter '" + bad + "'");
    }
}

}  // namespace

std::string to_string(TaskMode mode) {
    return mode == TaskMode::kZsl ? "zsl" : "gzsl";
}

std::string to_string(LabelSpacePolicy policy) {
    return policy == LabelSpacePolicy::kSeenAndUnseen ? "seen-unseen" : "unseen-only";
}

TaskMode task_mode_from_string(const std::string& text) {
    if (text == "zsl" || text == "ZSL") return TaskMode::kZsl;
    if (text == "gzsl" || text == "GZSL") return TaskMode::kGzsl;
    throw ParseError("unknown task mode '" + text + "'");
}

LabelSpacePolicy label_space_from_string(const std::string& text) {
    if (text == "seen-unseen") return LabelSpacePolicy::kSeenAndUnseen;
    if (text == "unseen-only") return LabelSpacePolicy::kUnseenOnly;
    throw ParseError("unknown label space '" + text + "'");
}

void LossWeights::validate() const {
    if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0 || margin < 0.0 || lambda < 0.0) {
        throw ArgumentError("LossWeights: all components must be >= 0");
    }
}

Eigen::MatrixXd sq_dist_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.cols() != b.cols()) {
        throw ArgumentError("sq_dist_matrix: operands have " + std::to_string(a.cols()) +
                            " and " + std::to_string(b.cols()) + " columns");
    }
    Eigen::MatrixXd out(a.rows(), b.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index k = 0; k < b.rows(); ++k) {
            out(i, k) = sq_dist_rows(a, i, b, k);
        }
    }
    return out;
}

double loss_s2f(const LabeledBatch& batch, const SemanticTable& table, const ProjectionNet& net,
                double lambda) {
    if (net.direction() != Direction::kS2F) {
        throw ArgumentError("loss_s2f: net direction is not S2F");
    }
    return supervised_core(net, table, batch, lambda, nullptr);
}

double loss_f2s(const LabeledBatch& batch, const SemanticTable& table, const ProjectionNet& net,
                double lambda) {
    if (net.direction() != Direction::kF2S) {
        throw ArgumentError("loss_f2s: net direction is not F2S");
    }
    return supervised_core(net, table, batch, lambda, nullptr);
}

std::string select_positive_zsl(const Eigen::VectorXd& feature, const SemanticTable& table,
                                const ProjectionNet& net) {
    const std::vector<int> unseen = table.unseen_indices();
    if (unseen.empty()) {
        throw ArgumentError("select_positive_zsl: table has no unseen classes");
    }
    const MatchContext ctx = make_context(net, table, feature.transpose(), false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return table.entry(argmin_over(d2, 0, unseen)).id;
}

std::optional<std::string> select_positive_gzsl(const Eigen::VectorXd& feature,
                                                const SemanticTable& table,
                                                const ProjectionNet& net) {
    if (table.seen_count() == 0 || table.unseen_count() == 0) {
        throw ArgumentError("select_positive_gzsl: needs both seen and unseen classes");
    }
    const MatchContext ctx = make_context(net, table, feature.transpose(), false);
    const Eigen::MatrixXd d2 = distances(ctx);
    const int winner = argmin_over(d2, 0, table.all_indices());
    if (table.entry(winner).partition == Partition::kSeen) {
        return std::nullopt;
    }
    return table.entry(winner).id;
}

std::string select_negative(const Eigen::VectorXd& feature, const SemanticTable& table,
                            const ProjectionNet& net) {
    const std::vector<int> seen = table.seen_indices();
    if (seen.empty()) {
        throw ArgumentError("select_negative: table has no seen classes");
    }
    const MatchContext ctx = make_context(net, table, feature.transpose(), false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return table.entry(argmin_over(d2, 0, seen)).id;
}

std::string pseudo_label(const Eigen::VectorXd& feature, const SemanticTable& table,
                         const ProjectionNet& net, LabelSpacePolicy label_space) {
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, feature.transpose(), false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return table.entry(argmin_over(d2, 0, cols)).id;
}

std::vector<std::string> pseudo_label_batch(const Eigen::MatrixXd& features,
                                            const SemanticTable& table, const ProjectionNet& net,
                                            LabelSpacePolicy label_space) {
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        labels.push_back(table.entry(argmin_over(d2, i, cols)).id);
    }
    return labels;
}

int TripletBatch::active_count() const {
    int active = 0;
    for (const char d : discarded) {
        if (!d) {
            ++active;
        }
    }
    return active;
}

TripletBatch assign_triplets(const Eigen::MatrixXd& features, const SemanticTable& table,
                             const ProjectionNet& net, TaskMode mode) {
    require_nonempty(features, "assign_triplets");
    const std::vector<int> seen = table.seen_indices();
    const std::vector<int> unseen = table.unseen_indices();
    if (seen.empty() || unseen.empty()) {
        throw ArgumentError("assign_triplets: needs both seen and unseen classes");
    }
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);

    TripletBatch batch;
    batch.anchors = features;
    batch.positive.resize(static_cast<std::size_t>(features.rows()), -1);
    batch.negative.resize(static_cast<std::size_t>(features.rows()), -1);
    batch.discarded.assign(static_cast<std::size_t>(features.rows()), 0);
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const std::size_t row = static_cast<std::size_t>(i);
        if (mode == TaskMode::kZsl) {
            batch.positive[row] = argmin_over(d2, i, unseen);
        } else {
            const int winner = argmin_over(d2, i, table.all_indices());
            if (table.entry(winner).partition == Partition::kSeen) {
                batch.discarded[row] = 1;
                continue;
            }
            batch.positive[row] = winner;
        }
        batch.negative[row] = argmin_over(d2, i, seen);
    }
    return batch;
}

TripletLoss loss_triplet(const TripletBatch& batch, const SemanticTable& table,
                         const ProjectionNet& net, double margin) {
    if (margin < 0.0) {
        throw ArgumentError("loss_triplet: margin must be >= 0");
    }
    validate_triplet_batch(batch, table);
    TripletLoss result;
    if (batch.active_count() == 0) {
        return result;  // empty-batch signal: active == 0
    }
    const MatchContext ctx = make_context(net, table, batch.anchors, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    const TripletCoreResult core = triplet_core(ctx, d2, batch, margin, nullptr, nullptr);
    result.value = core.value;
    result.active = core.active;
    return result;
}

PredictionHistogram histogram(const std::vector<std::string>& labels,
                              const std::vector<std::string>& label_space) {
    if (label_space.empty()) {
        throw ArgumentError("histogram: label space is empty");
    }
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t j = 0; j < label_space.size(); ++j) {
        if (!position.emplace(label_space[j], j).second) {
            throw ArgumentError("histogram: duplicate class '" + label_space[j] +
                                "' in label space");
        }
    }
    PredictionHistogram hist;
    hist.classes = label_space;
    hist.counts.assign(label_space.size(), 0);
    for (const std::string& label : labels) {
        const auto it = position.find(label);
        if (it == position.end()) {
            throw ArgumentError("histogram: label '" + label + "' is outside the label space");
        }
        hist.counts[it->second] += 1;
        hist.total += 1;
    }
    return hist;
}

double skewness_loss_raw(const PredictionHistogram& hist, const std::vector<std::string>& labels) {
    const PredictionHistogram recount = histogram(labels, hist.classes);
    if (recount.counts != hist.counts || recount.total != hist.total) {
        throw ArgumentError("skewness_loss_raw: histogram does not match the labels");
    }
    std::unordered_map<std::string, int> position;
    for (std::size_t j = 0; j < hist.classes.size(); ++j) {
        position.emplace(hist.classes[j], static_cast<int>(j));
    }
    std::vector<int> positions;
    positions.reserve(labels.size());
    for (const std::string& label : labels) {
        positions.push_back(position.at(label));
    }
    if (positions.empty()) {
        return 0.0;
    }
    return skewness_from_positions(hist.counts, positions);
}

double confidence_weight(const Eigen::MatrixXd& features, const SemanticTable& table,
                         const ProjectionNet& net, LabelSpacePolicy label_space) {
    require_nonempty(features, "confidence_weight");
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return pi_from_positions(d2, cols, argmin_positions(d2, cols));
}

double confidence_weight_given_labels(const Eigen::MatrixXd& features, const SemanticTable& table,
                                      const ProjectionNet& net, LabelSpacePolicy label_space,
                                      const std::vector<std::string>& labels) {
    require_nonempty(features, "confidence_weight");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ArgumentError("confidence_weight: feature/label count mismatch");
    }
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return pi_from_positions(d2, cols, positions_from_labels(table, cols, labels));
}

double loss_hubness(const Eigen::MatrixXd& features, const SemanticTable& table,
                    const ProjectionNet& net, LabelSpacePolicy label_space) {
    require_nonempty(features, "loss_hubness");
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    const std::vector<int> positions = argmin_positions(d2, cols);
    return hubness_core(ctx, d2, cols, positions, nullptr, nullptr).value;
}

double loss_hubness_given_labels(const Eigen::MatrixXd& features, const SemanticTable& table,
                                 const ProjectionNet& net, LabelSpacePolicy label_space,
                                 const std::vector<std::string>& labels) {
    require_nonempty(features, "loss_hubness");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw ArgumentError("loss_hubness: feature/label count mismatch");
    }
    const std::vector<int> cols = label_space_columns(table, label_space);
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    const std::vector<int> positions = positions_from_labels(table, cols, labels);
    return hubness_core(ctx, d2, cols, positions, nullptr, nullptr).value;
}

double loss_unbias(const Eigen::MatrixXd& features, const SemanticTable& table,
                   const ProjectionNet& net) {
    require_nonempty(features, "loss_unbias");
    const std::vector<int> unseen = table.unseen_indices();
    if (table.seen_count() == 0 || unseen.empty()) {
        throw ArgumentError("loss_unbias: needs both seen and unseen classes");
    }
    const MatchContext ctx = make_context(net, table, features, false);
    const Eigen::MatrixXd d2 = distances(ctx);
    return unbias_core(ctx, d2, table.all_indices(), unseen, nullptr, nullptr);
}

TransductiveLoss loss_transductive(const Eigen::MatrixXd& features, const SemanticTable& table,
                                   const ProjectionNet& net, const LossWeights& weights,
                                   TaskMode mode, LabelSpacePolicy label_space) {
    return transductive_core(net, table, features, weights, mode, label_space, nullptr).parts;
}

LossAndGrad loss_and_grad(const ProjectionNet& net, const SemanticTable& table,
                          const LossSpec& spec) {
    LossAndGrad result;
    result.grads = Gradients::zeros(net.dims());

    if (const auto* supervised = std::get_if<SupervisedSpec>(&spec)) {
        result.value =
            supervised_core(net, table, supervised->batch, supervised->lambda, &result.grads);
        check_finite(result.value, result.grads, "supervised loss");
        return result;
    }
    if (const auto* triplet = std::get_if<TripletSpec>(&spec)) {
        if (triplet->margin < 0.0) {
            throw ArgumentError("loss_triplet: margin must be >= 0");
        }
        validate_triplet_batch(triplet->batch, table);
        if (triplet->batch.active_count() == 0) {
            return result;  // all anchors discarded: zero loss, zero gradient
        }
        MatchContext ctx = make_context(net, table, triplet->batch.anchors, true);
        const Eigen::MatrixXd d2 = distances(ctx);
        GradBuffers buffers(ctx);
        result.value =
            triplet_core(ctx, d2, triplet->batch, triplet->margin, buffers.da, buffers.dp).value;
        buffers.backprop(net, ctx, result.grads);
        check_finite(result.value, result.grads, "triplet loss");
        return result;
    }
    if (const auto* hubness = std::get_if<HubnessSpec>(&spec)) {
        require_nonempty(hubness->features, "loss_hubness");
        const std::vector<int> cols = label_space_columns(table, hubness->label_space);
        MatchContext ctx = make_context(net, table, hubness->features, true);
        const Eigen::MatrixXd d2 = distances(ctx);
        const std::vector<int> positions = argmin_positions(d2, cols);
        GradBuffers buffers(ctx);
        result.value = hubness_core(ctx, d2, cols, positions, buffers.da, buffers.dp).value;
        buffers.backprop(net, ctx, result.grads);
        check_finite(result.value, result.grads, "hubness loss");
        return result;
    }
    if (const auto* unbias = std::get_if<UnbiasSpec>(&spec)) {
        require_nonempty(unbias->features, "loss_unbias");
        const std::vector<int> unseen = table.unseen_indices();
        if (table.seen_count() == 0 || unseen.empty()) {
            throw ArgumentError("loss_unbias: needs both seen and unseen classes");
        }
        MatchContext ctx = make_context(net, table, unbias->features, true);
        const Eigen::MatrixXd d2 = distances(ctx);
        GradBuffers buffers(ctx);
        result.value =
            unbias_core(ctx, d2, table.all_indices(), unseen, buffers.da, buffers.dp);
        buffers.backprop(net, ctx, result.grads);
        check_finite(result.value, result.grads, "unbiasing loss");
        return result;
    }
    const auto& transductive = std::get<TransductiveSpec>(spec);
    const TransductiveWork work =
        transductive_core(net, table, transductive.features, transductive.weights,
                          transductive.mode, transductive.label_space, &result.grads);
    result.value = work.parts.total;
    check_finite(result.value, result.grads, "transductive loss");
    return result;
}

TransductiveLossAndGrad transductive_loss_and_grad(const ProjectionNet& net,
                                                   const SemanticTable& table,
                                                   const Eigen::MatrixXd& features,
                                                   const LossWeights& weights, TaskMode mode,
                                                   LabelSpacePolicy label_space) {
    TransductiveLossAndGrad result;
    result.grads = Gradients::zeros(net.dims());
    const TransductiveWork work =
        transductive_core(net, table, features, weights, mode, label_space, &result.grads);
    result.parts = work.parts;
    check_finite(result.parts.total, result.grads, "transductive loss");
    return result;
}

}  // namespace tzsl
