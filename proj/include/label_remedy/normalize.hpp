#ifndef LABEL_REMEDY_NORMALIZE_HPP
#define LABEL_REMEDY_NORMALIZE_HPP

#include "core_types.hpp"

#include <Eigen/Dense>

namespace label_remedy {

struct NormalizedColumns {
    FeatureMatrix matrix;
    /// Columns left untouched because their norm is zero.
    IndexSet zero_columns;
};

/// Scales every nonzero column to unit L2 norm.
inline NormalizedColumns l2_normalize_columns(const FeatureMatrix& input) {
    Eigen::MatrixXd out = input.data();
    IndexSet zero;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double norm = out.col(j).norm();
        if (norm > 0.0) {
            out.col(j) /= norm;
        } else {
            zero.push_back(static_cast<std::size_t>(j));
        }
    }
    return NormalizedColumns{FeatureMatrix(std::move(out)), std::move(zero)};
}

} // namespace label_remedy

#endif
