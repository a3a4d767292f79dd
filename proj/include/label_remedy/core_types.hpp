#ifndef LABEL_REMEDY_CORE_TYPES_HPP
#define LABEL_REMEDY_CORE_TYPES_HPP

#include "error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

/**
 * @file core_types.hpp
 *
 * @brief Shared data model: feature matrices, labeled and unlabeled domains,
 * pseudo-label state, projections and experiment configuration.
 *
 * Samples are stored as columns throughout. All types validate their
 * invariants on construction and are immutable afterwards.
 */

namespace label_remedy {

using Label = std::int32_t;
using LabelVector = std::vector<Label>;

/// Sorted, duplicate-free list of sample indices.
using IndexSet = std::vector<std::size_t>;

namespace detail {

inline bool is_sorted_unique(const IndexSet& s) {
    return std::adjacent_find(s.begin(), s.end(), [](std::size_t a, std::size_t b) { return a >= b; }) == s.end();
}

} // namespace detail

/**
 * @brief Dense real matrix, one sample per column.
 *
 * Construction rejects empty shapes and non-finite entries.
 */
class FeatureMatrix {
public:
    explicit FeatureMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
        if (data_.rows() < 1 || data_.cols() < 1) {
            throw Error(ErrorCode::InvalidArgument, "feature matrix must have at least one row and one column");
        }
        if (!data_.allFinite()) {
            throw Error(ErrorCode::NonFiniteData, "feature matrix contains NaN or Inf");
        }
    }

    const Eigen::MatrixXd& data() const noexcept { return data_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(data_.rows()); }
    std::size_t samples() const noexcept { return static_cast<std::size_t>(data_.cols()); }

    /// Columns at the given positions, in the given order.
    FeatureMatrix select_columns(std::span<const std::size_t> columns) const {
        Eigen::MatrixXd out(data_.rows(), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j] >= samples()) {
                throw Error(ErrorCode::InvalidArgument, "column index out of range");
            }
            out.col(static_cast<Eigen::Index>(j)) = data_.col(static_cast<Eigen::Index>(columns[j]));
        }
        return FeatureMatrix(std::move(out));
    }

private:
    Eigen::MatrixXd data_;
};

/// Horizontal concatenation [a, b].
inline FeatureMatrix hconcat(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "cannot concatenate matrices of different feature dimension");
    }
    Eigen::MatrixXd out(a.data().rows(), a.data().cols() + b.data().cols());
    out << a.data(), b.data();
    return FeatureMatrix(std::move(out));
}

/**
 * @brief Source domain: features plus dense labels in [0, C).
 *
 * Every class in [0, C) must be represented at least once.
 */
class LabeledDomain {
public:
    LabeledDomain(FeatureMatrix features, LabelVector labels, std::size_t num_classes)
        : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
        if (labels_.size() != features_.samples()) {
            throw Error(ErrorCode::LengthMismatch, "label count " + std::to_string(labels_.size()) +
                                                       " differs from sample count " +
                                                       std::to_string(features_.samples()));
        }
        if (num_classes_ == 0) {
            throw Error(ErrorCode::InvalidArgument, "a labeled domain needs at least one class");
        }
        std::vector<std::size_t> counts(num_classes_, 0);
        for (Label y : labels_) {
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
                throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(y) + " outside [0, C)");
            }
            ++counts[static_cast<std::size_t>(y)];
        }
        for (std::size_t c = 0; c < num_classes_; ++c) {
            if (counts[c] == 0) {
                throw Error(ErrorCode::EmptyClass, "source class " + std::to_string(c) + " has no samples");
            }
        }
    }

    /// Infers C as one past the largest label.
    LabeledDomain(FeatureMatrix features, LabelVector labels)
        : LabeledDomain(std::move(features), labels,
                        labels.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1)) {}

    const FeatureMatrix& features() const noexcept { return features_; }
    const LabelVector& labels() const noexcept { return labels_; }
    std::size_t num_classes() const noexcept { return num_classes_; }

private:
    FeatureMatrix features_;
    LabelVector labels_;
    std::size_t num_classes_;
};

class UnlabeledDomain {
public:
    explicit UnlabeledDomain(FeatureMatrix features) : features_(std::move(features)) {}

    const FeatureMatrix& features() const noexcept { return features_; }

private:
    FeatureMatrix features_;
};

/**
 * @brief Current target pseudo labels and their high/low-confidence split.
 *
 * high_conf and low_conf are sorted, disjoint, and together cover [0, n_t).
 */
class PseudoLabelState {
public:
    PseudoLabelState(LabelVector labels, IndexSet high_conf, IndexSet low_conf)
        : labels_(std::move(labels)), high_conf_(std::move(high_conf)), low_conf_(std::move(low_conf)) {
        if (labels_.empty()) {
            throw Error(ErrorCode::InvalidArgument, "pseudo label state needs at least one sample");
        }
        for (Label y : labels_) {
            if (y < 0) {
                throw Error(ErrorCode::InvalidArgument, "negative pseudo label");
            }
        }
        if (!detail::is_sorted_unique(high_conf_) || !detail::is_sorted_unique(low_conf_)) {
            throw Error(ErrorCode::InvalidArgument, "confidence index sets must be sorted and unique");
        }
        if (high_conf_.size() + low_conf_.size() != labels_.size()) {
            throw Error(ErrorCode::InvalidArgument, "confidence partition does not cover every sample exactly once");
        }
        std::vector<char> seen(labels_.size(), 0);
        for (const IndexSet* set : {&high_conf_, &low_conf_}) {
            for (std::size_t i : *set) {
                if (i >= labels_.size() || seen[i]) {
                    throw Error(ErrorCode::InvalidArgument, "confidence partition is not exact");
                }
                seen[i] = 1;
            }
        }
    }

    /// Fresh labels with nothing confirmed yet: every sample is low confidence.
    static PseudoLabelState unpartitioned(LabelVector labels) {
        IndexSet all(labels.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return PseudoLabelState(std::move(labels), {}, std::move(all));
    }

    const LabelVector& labels() const noexcept { return labels_; }
    const IndexSet& high_conf() const noexcept { return high_conf_; }
    const IndexSet& low_conf() const noexcept { return low_conf_; }
    std::size_t size() const noexcept { return labels_.size(); }

    /// Sorted list of classes that occur among the labels (C_y of them).
    std::vector<Label> present_classes() const {
        std::vector<Label> out(labels_);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Checks 1 <= C_y <= C and that every label is below C.
    void check_classes(std::size_t num_classes) const {
        for (Label y : labels_) {
            if (static_cast<std::size_t>(y) >= num_classes) {
                throw Error(ErrorCode::InvalidArgument, "pseudo label " + std::to_string(y) + " outside [0, C)");
            }
        }
    }

private:
    LabelVector labels_;
    IndexSet high_conf_;
    IndexSet low_conf_;
};

/// Linear map z = P x into a k-dimensional subspace, k <= m.
class Projection {
public:
    explicit Projection(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
        if (matrix_.rows() < 1 || matrix_.cols() < 1) {
            throw Error(ErrorCode::InvalidArgument, "projection must be non-empty");
        }
        if (matrix_.rows() > matrix_.cols()) {
            throw Error(ErrorCode::InvalidArgument, "projection has more rows than input dimensions");
        }
        if (!matrix_.allFinite()) {
            throw Error(ErrorCode::NonFiniteData, "projection contains NaN or Inf");
        }
        for (Eigen::Index r = 0; r < matrix_.rows(); ++r) {
            if ((matrix_.row(r).array() == 0.0).all()) {
                throw Error(ErrorCode::InvalidArgument, "projection has an all-zero row");
            }
        }
    }

    const Eigen::MatrixXd& matrix() const noexcept { return matrix_; }
    std::size_t output_dim() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
    std::size_t input_dim() const noexcept { return static_cast<std::size_t>(matrix_.cols()); }

    FeatureMatrix apply(const FeatureMatrix& x) const {
        if (x.dim() != input_dim()) {
            throw Error(ErrorCode::DimensionMismatch, "projection expects dimension " + std::to_string(input_dim()) +
                                                          ", got " + std::to_string(x.dim()));
        }
        return FeatureMatrix(matrix_ * x.data());
    }

private:
    Eigen::MatrixXd matrix_;
};

enum class AdapterKind { Identity, Jda, Bda };

inline std::string_view to_string(AdapterKind kind) {
    switch (kind) {
    case AdapterKind::Identity: return "identity";
    case AdapterKind::Jda: return "jda";
    case AdapterKind::Bda: return "bda";
    }
    return "identity";
}

inline AdapterKind parse_adapter(std::string_view name) {
    if (name == "identity" || name == "nn") return AdapterKind::Identity;
    if (name == "jda") return AdapterKind::Jda;
    if (name == "bda") return AdapterKind::Bda;
    throw Error(ErrorCode::InvalidArgument, "unknown adapter '" + std::string(name) + "'");
}

struct ExperimentConfig {
    double rho = 0.85;                 ///< trust parameter, strictly inside (0, 1)
    int inner_iters = 3;               ///< TSRP iterations per outer iteration
    int outer_iters = 10;              ///< projection / pseudo-label rounds
    int subspace_dim = 100;            ///< k, rows of the projection
    double lambda = 1.0;               ///< ridge on the MMD operator
    double mu = 0.5;                   ///< marginal/conditional balance, BDA only
    AdapterKind adapter = AdapterKind::Jda;
    bool tsrp = true;                  ///< run the remedy loop after each crude labeling
    bool normalize = true;             ///< L2-normalize columns after loading and after projection
    bool early_stop = false;           ///< stop the outer loop once pseudo labels stop changing
    std::uint64_t seed = 0;

    void validate(std::size_t feature_dim) const {
        if (!(rho > 0.0 && rho < 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "rho must lie strictly inside (0, 1)");
        }
        if (inner_iters < 1 || outer_iters < 1) {
            throw Error(ErrorCode::InvalidArgument, "iteration counts must be positive");
        }
        if (subspace_dim < 1 || static_cast<std::size_t>(subspace_dim) > feature_dim) {
            throw Error(ErrorCode::InvalidArgument, "subspace dimension " + std::to_string(subspace_dim) +
                                                        " must lie in [1, " + std::to_string(feature_dim) + "]");
        }
        if (!(lambda >= 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
        }
        if (!(mu >= 0.0 && mu <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "mu must lie in [0, 1]");
        }
    }
};

/// Checks that both domains live in the same feature space and hold finite data.
inline std::pair<const LabeledDomain&, const UnlabeledDomain&> validate_domains(const LabeledDomain& source,
                                                                               const UnlabeledDomain& target) {
    if (source.features().dim() != target.features().dim()) {
        throw Error(ErrorCode::DimensionMismatch, "source dimension " + std::to_string(source.features().dim()) +
                                                      " differs from target dimension " +
                                                      std::to_string(target.features().dim()));
    }
    if (!source.features().data().allFinite() || !target.features().data().allFinite()) {
        throw Error(ErrorCode::NonFiniteData, "domain contains NaN or Inf");
    }
    return {source, target};
}

} // namespace label_remedy

#endif
