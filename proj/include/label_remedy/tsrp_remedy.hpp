#ifndef LABEL_REMEDY_TSRP_REMEDY_HPP
#define LABEL_REMEDY_TSRP_REMEDY_HPP

#include "classifiers.hpp"
#include "core_types.hpp"
#include "utsp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <vector>

/**
 * @file tsrp_remedy.hpp
 *
 * @brief Iterative correction of low-confidence pseudo labels.
 *
 * Each inner iteration partitions the current working set with UTSP, moves
 * the confident samples into a frozen pool, retrains the nearest-neighbour
 * classifier on source plus pool, and relabels the rest. The relabelled
 * remainder becomes the next working set.
 */

namespace label_remedy {

struct RemedyResult {
    /// Final labels; high_conf is the frozen pool, low_conf the last working set.
    PseudoLabelState state;
    int iterations_run = 0;
    /// Samples added to the frozen pool at each iteration that ran.
    std::vector<std::size_t> newly_confident;
    IndexSet zero_norm_samples;
};

inline RemedyResult remedy(const LabeledDomain& source_proj, const FeatureMatrix& target_proj,
                           const PseudoLabelState& pseudo, double rho, int inner_iters) {
    if (inner_iters < 1) {
        throw Error(ErrorCode::InvalidArgument, "inner_iters must be at least 1");
    }
    if (source_proj.features().dim() != target_proj.dim()) {
        throw Error(ErrorCode::DimensionMismatch, "projected source and target dimensions differ");
    }
    if (pseudo.size() != target_proj.samples()) {
        throw Error(ErrorCode::LengthMismatch, "pseudo label count differs from target sample count");
    }

    const std::size_t n_t = pseudo.size();
    LabelVector labels = pseudo.labels();
    IndexSet pool;
    IndexSet working(n_t);
    for (std::size_t i = 0; i < n_t; ++i) {
        working[i] = i;
    }

    RemedyResult result{pseudo, 0, {}, {}};
    int idle_rounds = 0;
    for (int it = 0; it < inner_iters && !working.empty(); ++it) {
        LabelVector working_labels(working.size());
        for (std::size_t j = 0; j < working.size(); ++j) {
            working_labels[j] = labels[working[j]];
        }
        const UtspResult split = utsp_partition(target_proj.select_columns(working),
                                                PseudoLabelState::unpartitioned(std::move(working_labels)), rho);
        ++result.iterations_run;
        for (std::size_t j : split.zero_norm_samples) {
            result.zero_norm_samples.push_back(working[j]);
        }

        for (std::size_t j : split.state.high_conf()) {
            pool.push_back(working[j]);
        }
        std::sort(pool.begin(), pool.end());
        result.newly_confident.push_back(split.state.high_conf().size());

        IndexSet low;
        low.reserve(split.state.low_conf().size());
        for (std::size_t j : split.state.low_conf()) {
            low.push_back(working[j]);
        }
        working = std::move(low);
        if (working.empty()) {
            break;
        }

        // strong classifier: source plus the frozen pool
        const Eigen::MatrixXd& zs = source_proj.features().data();
        const Eigen::MatrixXd& zt = target_proj.data();
        Eigen::MatrixXd train(zs.rows(), zs.cols() + static_cast<Eigen::Index>(pool.size()));
        train.leftCols(zs.cols()) = zs;
        LabelVector train_labels = source_proj.labels();
        train_labels.reserve(train_labels.size() + pool.size());
        for (std::size_t p = 0; p < pool.size(); ++p) {
            train.col(zs.cols() + static_cast<Eigen::Index>(p)) = zt.col(static_cast<Eigen::Index>(pool[p]));
            train_labels.push_back(labels[pool[p]]);
        }
        const NNModel strong(std::move(train), std::move(train_labels));

        Eigen::MatrixXd queries(zt.rows(), static_cast<Eigen::Index>(working.size()));
        for (std::size_t j = 0; j < working.size(); ++j) {
            queries.col(static_cast<Eigen::Index>(j)) = zt.col(static_cast<Eigen::Index>(working[j]));
        }
        const LabelVector remedied = nn_predict(strong, queries);
        for (std::size_t j = 0; j < working.size(); ++j) {
            labels[working[j]] = remedied[j];
        }

        idle_rounds = split.state.high_conf().empty() ? idle_rounds + 1 : 0;
        if (idle_rounds >= 2) {
            break;
        }
    }

    std::sort(result.zero_norm_samples.begin(), result.zero_norm_samples.end());
    result.zero_norm_samples.erase(std::unique(result.zero_norm_samples.begin(), result.zero_norm_samples.end()),
                                   result.zero_norm_samples.end());
    result.state = PseudoLabelState(std::move(labels), std::move(pool), std::move(working));
    return result;
}

} // namespace label_remedy

#endif
