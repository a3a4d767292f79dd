#ifndef LABEL_REMEDY_UDA_ADAPTERS_HPP
#define LABEL_REMEDY_UDA_ADAPTERS_HPP

#include "core_types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

/**
 * @file uda_adapters.hpp
 *
 * @brief Projection learners that produce the shared subspace.
 *
 * The MMD adapters (JDA, BDA) minimise the marginal and class-conditional
 * mean discrepancies between source and target under a centred-scatter
 * constraint:
 *
 *     min tr(P X M X^T P^T) + lambda ||P||^2   s.t.   P X H X^T P^T = I
 *
 * which is the generalized symmetric eigenproblem
 * (X M X^T + lambda I) p = eta (X H X^T) p, keeping the k smallest eta.
 * Every MMD term is rank one, M = sum_c w_c e_c e_c^T, so X M X^T is
 * assembled from the class mean differences X e_c without forming M.
 */

namespace label_remedy {

/// One rank-one MMD term w * e e^T over the concatenated samples [source, target].
struct MmdTerm {
    double weight = 1.0;
    Eigen::VectorXd indicator;
};

/**
 * Signed mean-difference vectors: e_0 (marginal) and e_c per class.
 * e(source i in class c) = 1/n_s^c, e(target j pseudo-labelled c) = -1/n_t^c.
 * A class with no target members keeps only its source entries.
 */
inline std::vector<MmdTerm> mmd_terms(const LabeledDomain& source, const UnlabeledDomain& target,
                                      const PseudoLabelState* pseudo, AdapterKind adapter, double mu) {
    const auto ns = static_cast<Eigen::Index>(source.features().samples());
    const auto nt = static_cast<Eigen::Index>(target.features().samples());
    double marginal_weight = 1.0;
    double conditional_weight = 1.0;
    if (adapter == AdapterKind::Bda) {
        marginal_weight = 1.0 - mu;
        conditional_weight = mu;
    }

    std::vector<MmdTerm> terms;
    MmdTerm marginal{marginal_weight, Eigen::VectorXd(ns + nt)};
    marginal.indicator.head(ns).setConstant(1.0 / static_cast<double>(ns));
    marginal.indicator.tail(nt).setConstant(-1.0 / static_cast<double>(nt));
    terms.push_back(std::move(marginal));

    if (pseudo == nullptr) {
        return terms;
    }
    if (pseudo->size() != static_cast<std::size_t>(nt)) {
        throw Error(ErrorCode::LengthMismatch, "pseudo label count differs from target sample count");
    }
    pseudo->check_classes(source.num_classes());

    const std::size_t num_classes = source.num_classes();
    std::vector<double> ns_c(num_classes, 0.0);
    std::vector<double> nt_c(num_classes, 0.0);
    for (Label y : source.labels()) {
        ns_c[static_cast<std::size_t>(y)] += 1.0;
    }
    for (Label y : pseudo->labels()) {
        nt_c[static_cast<std::size_t>(y)] += 1.0;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        MmdTerm term{conditional_weight, Eigen::VectorXd::Zero(ns + nt)};
        for (Eigen::Index i = 0; i < ns; ++i) {
            if (static_cast<std::size_t>(source.labels()[static_cast<std::size_t>(i)]) == c) {
                term.indicator[i] = 1.0 / ns_c[c];
            }
        }
        if (nt_c[c] > 0.0) {
            for (Eigen::Index j = 0; j < nt; ++j) {
                if (static_cast<std::size_t>(pseudo->labels()[static_cast<std::size_t>(j)]) == c) {
                    term.indicator[ns + j] = -1.0 / nt_c[c];
                }
            }
        }
        terms.push_back(std::move(term));
    }
    return terms;
}

/// Dense MMD system, for inspection and testing on small problems.
struct MmdSystem {
    Eigen::MatrixXd marginal;                  ///< M_0
    std::vector<Eigen::MatrixXd> conditional;  ///< M_c, c = 0..C-1 (empty without pseudo labels)
    Eigen::MatrixXd m;                         ///< weighted combination
    Eigen::MatrixXd h;                         ///< centering matrix I - (1/n) 1 1^T
    Eigen::MatrixXd x;                         ///< [X^S, X^T]
};

inline MmdSystem build_mmd_matrices(const LabeledDomain& source, const UnlabeledDomain& target,
                                    const PseudoLabelState* pseudo, AdapterKind adapter, double mu) {
    validate_domains(source, target);
    const std::vector<MmdTerm> terms = mmd_terms(source, target, pseudo, adapter, mu);
    const Eigen::Index n = terms.front().indicator.size();

    MmdSystem sys;
    sys.x = hconcat(source.features(), target.features()).data();
    sys.marginal = terms.front().indicator * terms.front().indicator.transpose();
    sys.m = terms.front().weight * sys.marginal;
    for (std::size_t t = 1; t < terms.size(); ++t) {
        sys.conditional.push_back(terms[t].indicator * terms[t].indicator.transpose());
        sys.m += terms[t].weight * sys.conditional.back();
    }
    sys.h = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    return sys;
}

/// Jitter added to the constraint operator before the Cholesky reduction.
inline constexpr double kConstraintJitter = 1e-9;

struct ProjectionFit {
    Projection projection;
    /// Generalized eigenvalues of the kept directions, ascending (empty for identity).
    Eigen::VectorXd eigenvalues;
    /// ||P (X H X^T) P^T - I||_F / sqrt(k); NaN for the identity adapter.
    double constraint_residual = std::numeric_limits<double>::quiet_NaN();
};

/// X H X^T without forming H: the scatter of the mean-centred columns.
inline Eigen::MatrixXd centered_scatter(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
    Eigen::MatrixXd s = centered * centered.transpose();
    return 0.5 * (s + s.transpose());
}

/**
 * Smallest-k solutions of (A) p = eta (B) p for symmetric A and positive
 * semidefinite B, reduced to a standard problem through the Cholesky factor
 * of B + jitter I. Returned vectors satisfy V^T B V = I.
 */
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> smallest_generalized_eigenpairs(const Eigen::MatrixXd& a,
                                                                                   const Eigen::MatrixXd& b,
                                                                                   Eigen::Index k) {
    const Eigen::Index m = a.rows();
    const Eigen::MatrixXd b_jittered = b + kConstraintJitter * Eigen::MatrixXd::Identity(m, m);
    Eigen::LLT<Eigen::MatrixXd> chol(b_jittered);
    if (chol.info() != Eigen::Success) {
        throw Error(ErrorCode::SingularSystem, "constraint operator X H X^T is not positive definite");
    }
    const auto lower = chol.matrixL();
    // C = L^{-1} A L^{-T}
    Eigen::MatrixXd c = lower.solve(a);
    c = lower.solve(c.transpose()).transpose();
    c = 0.5 * (c + c.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorCode::EigSolverFailure, "symmetric eigensolver did not converge");
    }
    Eigen::MatrixXd vectors = chol.matrixU().solve(eig.eigenvectors().leftCols(k));

    // The vectors are orthonormal under B + jitter I; re-orthonormalise them under B itself.
    // G = V^T B V = R R^T, V <- V R^{-T}; the jitter makes G deviate from I by O(1e-9) only.
    // A direction inside the null space of B shows up as an eigenvalue of G far below 1.
    Eigen::MatrixXd g = vectors.transpose() * b * vectors;
    g = 0.5 * (g + g.transpose());
    Eigen::LLT<Eigen::MatrixXd> gram_chol(g);
    if (gram_chol.info() != Eigen::Success || Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues()(0) < 0.5) {
        throw Error(ErrorCode::SingularSystem, "X H X^T has rank below k; selected directions lie in its null space");
    }
    vectors = gram_chol.matrixL().solve(vectors.transpose()).transpose();
    return {eig.eigenvalues().head(k), std::move(vectors)};
}

/**
 * Learns the projection P (k x m) for the chosen adapter. Without pseudo
 * labels the MMD adapters use the marginal term only.
 */
inline ProjectionFit fit_projection(AdapterKind adapter, const LabeledDomain& source, const UnlabeledDomain& target,
                                    const std::optional<PseudoLabelState>& pseudo, const ExperimentConfig& cfg) {
    validate_domains(source, target);
    const std::size_t m = source.features().dim();
    cfg.validate(m);
    const auto k = static_cast<Eigen::Index>(cfg.subspace_dim);

    if (adapter == AdapterKind::Identity) {
        return ProjectionFit{Projection(Eigen::MatrixXd::Identity(k, static_cast<Eigen::Index>(m))), {},
                             std::numeric_limits<double>::quiet_NaN()};
    }

    const std::vector<MmdTerm> terms =
        mmd_terms(source, target, pseudo ? &*pseudo : nullptr, adapter, cfg.mu);
    const Eigen::MatrixXd& xs = source.features().data();
    const Eigen::MatrixXd& xt = target.features().data();
    const Eigen::Index ns = xs.cols();
    const Eigen::Index nt = xt.cols();

    // X M X^T = sum_c w_c (X e_c)(X e_c)^T, normalised by ||M||_F
    const auto dim = static_cast<Eigen::Index>(m);
    Eigen::MatrixXd xmx = Eigen::MatrixXd::Zero(dim, dim);
    for (const MmdTerm& term : terms) {
        const Eigen::VectorXd xe = xs * term.indicator.head(ns) + xt * term.indicator.tail(nt);
        xmx.noalias() += term.weight * xe * xe.transpose();
    }
    double fro2 = 0.0;
    for (const MmdTerm& a : terms) {
        for (const MmdTerm& b : terms) {
            const double d = a.indicator.dot(b.indicator);
            fro2 += a.weight * b.weight * d * d;
        }
    }
    if (fro2 > 0.0) {
        xmx /= std::sqrt(fro2);
    }
    const Eigen::MatrixXd lhs = xmx + cfg.lambda * Eigen::MatrixXd::Identity(dim, dim);

    Eigen::MatrixXd x(dim, ns + nt);
    x << xs, xt;
    const Eigen::MatrixXd scatter = centered_scatter(x);

    auto [values, vectors] = smallest_generalized_eigenpairs(lhs, scatter, k);
    Eigen::MatrixXd p = vectors.transpose();
    const Eigen::MatrixXd gram = p * scatter * p.transpose();
    const double residual =
        (gram - Eigen::MatrixXd::Identity(k, k)).norm() / std::sqrt(static_cast<double>(k));
    return ProjectionFit{Projection(std::move(p)), std::move(values), residual};
}

} // namespace label_remedy

#endif
