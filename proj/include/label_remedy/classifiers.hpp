#ifndef LABEL_REMEDY_CLASSIFIERS_HPP
#define LABEL_REMEDY_CLASSIFIERS_HPP

#include "core_types.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>

namespace label_remedy {

/**
 * @brief 1-nearest-neighbour model. Fitting stores the training set verbatim.
 *
 * Serves as the weak classifier (source only) and as the strong classifier
 * (source plus high-confidence target samples); only the training data differs.
 */
class NNModel {
public:
    NNModel(Eigen::MatrixXd train_features, LabelVector train_labels)
        : features_(std::move(train_features)), labels_(std::move(train_labels)) {
        if (features_.cols() == 0 || labels_.empty()) {
            throw Error(ErrorCode::EmptyTrainingSet, "nearest-neighbour model needs at least one training sample");
        }
        if (static_cast<std::size_t>(features_.cols()) != labels_.size()) {
            throw Error(ErrorCode::LengthMismatch, "training labels (" + std::to_string(labels_.size()) +
                                                       ") and samples (" + std::to_string(features_.cols()) +
                                                       ") disagree");
        }
    }

    const Eigen::MatrixXd& features() const noexcept { return features_; }
    const LabelVector& labels() const noexcept { return labels_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.rows()); }

private:
    Eigen::MatrixXd features_;
    LabelVector labels_;
};

inline NNModel nn_fit(const FeatureMatrix& features, LabelVector labels) {
    return NNModel(features.data(), std::move(labels));
}

/// Label of the nearest training sample under squared Euclidean distance; ties go to the smaller index.
inline LabelVector nn_predict(const NNModel& model, const Eigen::MatrixXd& queries) {
    if (static_cast<std::size_t>(queries.rows()) != model.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(queries.rows()) +
                                                      " differs from training dimension " +
                                                      std::to_string(model.dim()));
    }
    const Eigen::MatrixXd& train = model.features();
    LabelVector out(static_cast<std::size_t>(queries.cols()));
    Eigen::RowVectorXd dist(train.cols());
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
        dist.noalias() = (train.colwise() - queries.col(q)).colwise().squaredNorm();
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < dist.size(); ++i) {
            if (dist[i] < dist[best]) {
                best = i;
            }
        }
        out[static_cast<std::size_t>(q)] = model.labels()[static_cast<std::size_t>(best)];
    }
    return out;
}

inline LabelVector nn_predict(const NNModel& model, const FeatureMatrix& queries) {
    return nn_predict(model, queries.data());
}

} // namespace label_remedy

#endif
