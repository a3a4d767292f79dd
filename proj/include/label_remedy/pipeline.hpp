#ifndef LABEL_REMEDY_PIPELINE_HPP
#define LABEL_REMEDY_PIPELINE_HPP

#include "classifiers.hpp"
#include "core_types.hpp"
#include "metrics.hpp"
#include "normalize.hpp"
#include "tsrp_remedy.hpp"
#include "uda_adapters.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief Outer adaptation loop: learn a projection from the current pseudo
 * labels, label the target with a source-trained nearest neighbour, then
 * remedy those labels. Repeated for a fixed number of rounds.
 *
 * Ground truth, when given, is only read to fill the trace; no decision in
 * the loop depends on it.
 */

namespace label_remedy {

struct IterationTrace {
    int iter = 0;
    /// Accuracies are NaN when no ground truth was supplied.
    double crude_label_accuracy = std::numeric_limits<double>::quiet_NaN();
    double remedied_label_accuracy = std::numeric_limits<double>::quiet_NaN();
    double high_conf_fraction = 0.0;
    std::vector<std::size_t> per_class_high_counts;
    double constraint_residual = std::numeric_limits<double>::quiet_NaN();
    std::size_t labels_changed = 0;
    std::size_t zero_norm_samples = 0;
};

struct PipelineResult {
    std::optional<PseudoLabelState> labels;
    std::vector<IterationTrace> trace;
    /// Set when an iteration failed; the trace holds the iterations that completed.
    std::optional<Error> failure;
};

inline PipelineResult run(const LabeledDomain& source_in, const UnlabeledDomain& target_in, const ExperimentConfig& cfg,
                          const std::optional<LabelVector>& ground_truth = std::nullopt) {
    validate_domains(source_in, target_in);
    cfg.validate(source_in.features().dim());
    if (ground_truth && ground_truth->size() != target_in.features().samples()) {
        throw Error(ErrorCode::LengthMismatch, "ground truth length differs from target sample count");
    }

    const LabeledDomain source = cfg.normalize ? LabeledDomain(l2_normalize_columns(source_in.features()).matrix,
                                                               source_in.labels(), source_in.num_classes())
                                               : source_in;
    const UnlabeledDomain target =
        cfg.normalize ? UnlabeledDomain(l2_normalize_columns(target_in.features()).matrix) : target_in;

    PipelineResult result;
    std::optional<PseudoLabelState> previous;
    for (int t = 1; t <= cfg.outer_iters; ++t) {
        try {
            const ProjectionFit fit = fit_projection(cfg.adapter, source, target, previous, cfg);
            FeatureMatrix zs = fit.projection.apply(source.features());
            FeatureMatrix zt = fit.projection.apply(target.features());
            if (cfg.normalize) {
                zs = l2_normalize_columns(zs).matrix;
                zt = l2_normalize_columns(zt).matrix;
            }

            const NNModel weak = nn_fit(zs, source.labels());
            LabelVector crude = nn_predict(weak, zt);

            IterationTrace trace;
            trace.iter = t;
            trace.constraint_residual = fit.constraint_residual;
            if (ground_truth) {
                trace.crude_label_accuracy = accuracy(crude, *ground_truth);
            }

            PseudoLabelState state = PseudoLabelState::unpartitioned(crude);
            if (cfg.tsrp) {
                const LabeledDomain source_proj(zs, source.labels(), source.num_classes());
                RemedyResult remedied = remedy(source_proj, zt, state, cfg.rho, cfg.inner_iters);
                trace.zero_norm_samples = remedied.zero_norm_samples.size();
                state = std::move(remedied.state);
            }

            if (ground_truth) {
                trace.remedied_label_accuracy = accuracy(state.labels(), *ground_truth);
            }
            trace.high_conf_fraction =
                static_cast<double>(state.high_conf().size()) / static_cast<double>(state.size());
            trace.per_class_high_counts.assign(source.num_classes(), 0);
            for (std::size_t i : state.high_conf()) {
                ++trace.per_class_high_counts[static_cast<std::size_t>(state.labels()[i])];
            }
            if (previous) {
                for (std::size_t i = 0; i < state.size(); ++i) {
                    trace.labels_changed += state.labels()[i] != previous->labels()[i] ? 1 : 0;
                }
            } else {
                trace.labels_changed = state.size();
            }

            result.trace.push_back(std::move(trace));
            const bool converged = previous && result.trace.back().labels_changed == 0;
            previous = std::move(state);
            if (cfg.early_stop && converged) {
                break;
            }
        } catch (const Error& e) {
            result.failure = e;
            break;
        }
    }
    result.labels = std::move(previous);
    return result;
}

} // namespace label_remedy

#endif
