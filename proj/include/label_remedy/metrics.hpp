#ifndef LABEL_REMEDY_METRICS_HPP
#define LABEL_REMEDY_METRICS_HPP

#include "core_types.hpp"

#include <cstddef>

namespace label_remedy {

/// Fraction of positions where prediction and truth agree.
inline double accuracy(const LabelVector& predicted, const LabelVector& truth) {
    if (predicted.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "prediction and truth lengths differ");
    }
    if (predicted.empty()) {
        throw Error(ErrorCode::LengthMismatch, "accuracy of an empty prediction is undefined");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        hits += predicted[i] == truth[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

} // namespace label_remedy

#endif
