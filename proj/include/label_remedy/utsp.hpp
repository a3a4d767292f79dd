#ifndef LABEL_REMEDY_UTSP_HPP
#define LABEL_REMEDY_UTSP_HPP

#include "core_types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <span>
#include <vector>

/**
 * @file utsp.hpp
 *
 * @brief Selection of highly-confident pseudo labels from intra-class
 * similarity graphs.
 *
 * For each pseudo class the members' pairwise cosine similarities are
 * thresholded at a rank-based percentile, nodes without neighbours are
 * dropped, and the connected component of the maximum-degree node is kept
 * as the confident set. Everything else in the class is low confidence.
 */

namespace label_remedy {

/// Symmetric 0/1 adjacency matrix with a zero diagonal.
class AdjacencyMask {
public:
    AdjacencyMask() = default;
    explicit AdjacencyMask(std::size_t order) : order_(order), bits_(order * order, 0) {}

    std::size_t order() const noexcept { return order_; }

    bool operator()(std::size_t i, std::size_t j) const { return bits_[i * order_ + j] != 0; }

    void set_edge(std::size_t i, std::size_t j) {
        if (i == j) {
            return;
        }
        bits_[i * order_ + j] = 1;
        bits_[j * order_ + i] = 1;
    }

    std::size_t degree(std::size_t i) const {
        std::size_t d = 0;
        for (std::size_t j = 0; j < order_; ++j) {
            d += bits_[i * order_ + j];
        }
        return d;
    }

    std::vector<std::size_t> degrees() const {
        std::vector<std::size_t> out(order_);
        for (std::size_t i = 0; i < order_; ++i) {
            out[i] = degree(i);
        }
        return out;
    }

    std::size_t edge_count() const {
        std::size_t total = 0;
        for (auto b : bits_) {
            total += b;
        }
        return total / 2;
    }

    /// Induced subgraph on `nodes`; node r of the result is nodes[r].
    AdjacencyMask restrict_to(std::span<const std::size_t> nodes) const {
        AdjacencyMask out(nodes.size());
        for (std::size_t a = 0; a < nodes.size(); ++a) {
            for (std::size_t b = a + 1; b < nodes.size(); ++b) {
                if ((*this)(nodes[a], nodes[b])) {
                    out.set_edge(a, b);
                }
            }
        }
        return out;
    }

private:
    std::size_t order_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Per-class graph: S^k, the threshold, the mask M^k and its degrees D^k.
struct ClassSimilarityGraph {
    Label class_id = 0;
    IndexSet member_indices;
    Eigen::MatrixXd similarity;
    double threshold = 0.0;
    AdjacencyMask mask;
    std::vector<std::size_t> degrees;
};

struct CosineSimilarity {
    Eigen::MatrixXd matrix;
    /// Columns with zero norm; their similarity to everything is 0.
    IndexSet zero_norm_columns;
};

/**
 * Pairwise cosine similarity between columns, zero on the diagonal.
 * A zero-norm column cannot be compared, so its row and column are left at 0;
 * it will be isolated by the threshold and dropped.
 */
inline CosineSimilarity intra_class_similarity(const Eigen::MatrixXd& members) {
    const Eigen::Index n = members.cols();
    CosineSimilarity out;
    Eigen::MatrixXd unit = members;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double norm = members.col(j).norm();
        if (norm > 0.0) {
            unit.col(j) /= norm;
        } else {
            unit.col(j).setZero();
            out.zero_norm_columns.push_back(static_cast<std::size_t>(j));
        }
    }
    Eigen::MatrixXd gram = unit.transpose() * unit;
    out.matrix.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.matrix(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            // clamp rounding excursions outside [-1, 1]; mirror so the matrix is exactly symmetric
            const double s = std::clamp(gram(i, j), -1.0, 1.0);
            out.matrix(i, j) = s;
            out.matrix(j, i) = s;
        }
    }
    return out;
}

inline CosineSimilarity intra_class_similarity(const FeatureMatrix& members) {
    return intra_class_similarity(members.data());
}

/**
 * Threshold delta: the floor(rho * n_p)-th smallest (1-based) of the n_p nonzero
 * strict-upper-triangle entries. A rank of 0 is clamped to 1. Exact zeros are
 * excluded from the ranking; negative entries take part as-is.
 */
inline double similarity_threshold(const Eigen::MatrixXd& similarity, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "rho must lie strictly inside (0, 1)");
    }
    const Eigen::Index n = similarity.rows();
    if (n < 2 || similarity.cols() != n) {
        throw Error(ErrorCode::InvalidArgument, "similarity must be square with at least two rows");
    }
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (similarity(i, j) != 0.0) {
                upper.push_back(similarity(i, j));
            }
        }
    }
    if (upper.empty()) {
        throw Error(ErrorCode::NoPairs, "no nonzero similarities in the upper triangle");
    }
    const auto n_p = static_cast<double>(upper.size());
    auto rank = static_cast<std::size_t>(std::floor(rho * n_p));
    rank = std::clamp<std::size_t>(rank, 1, upper.size());
    auto nth = upper.begin() + static_cast<std::ptrdiff_t>(rank - 1);
    std::nth_element(upper.begin(), nth, upper.end());
    return *nth;
}

inline AdjacencyMask adjacency_mask(const Eigen::MatrixXd& similarity, double delta) {
    const auto n = static_cast<std::size_t>(similarity.rows());
    AdjacencyMask mask(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= delta) {
                mask.set_edge(i, j);
            }
        }
    }
    return mask;
}

struct IsolationSplit {
    IndexSet retained;
    IndexSet deleted;
    /// Mask restricted to `retained` (node r is retained[r]).
    AdjacencyMask retained_mask;
};

inline IsolationSplit delete_isolated(const AdjacencyMask& mask) {
    IsolationSplit out;
    for (std::size_t i = 0; i < mask.order(); ++i) {
        (mask.degree(i) == 0 ? out.deleted : out.retained).push_back(i);
    }
    out.retained_mask = mask.restrict_to(out.retained);
    return out;
}

/// Index of the largest degree; ties go to the smallest index.
inline std::size_t root_node(std::span<const std::size_t> degrees) {
    if (degrees.empty()) {
        throw Error(ErrorCode::InvalidArgument, "root_node needs a nonempty degree vector");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < degrees.size(); ++i) {
        if (degrees[i] > degrees[best]) {
            best = i;
        }
    }
    return best;
}

struct SpanningTree {
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    std::size_t root = 0;
    /// Nodes reachable from the root, ascending.
    IndexSet members;
    /// BFS parent of each node; npos for the root and for unreached nodes.
    std::vector<std::size_t> parent;
};

/// Breadth-first tree from `root`; its node set is root's connected component.
inline SpanningTree spanning_tree_select(const AdjacencyMask& mask, std::size_t root) {
    const std::size_t n = mask.order();
    if (root >= n) {
        throw Error(ErrorCode::InvalidArgument, "root outside the graph");
    }
    SpanningTree tree;
    tree.root = root;
    tree.parent.assign(n, SpanningTree::npos);
    std::vector<char> visited(n, 0);
    std::queue<std::size_t> frontier;
    frontier.push(root);
    visited[root] = 1;
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        tree.members.push_back(u);
        for (std::size_t v = 0; v < n; ++v) {
            if (!visited[v] && mask(u, v)) {
                visited[v] = 1;
                tree.parent[v] = u;
                frontier.push(v);
            }
        }
    }
    std::sort(tree.members.begin(), tree.members.end());
    return tree;
}

/// Builds S^k, delta, M^k and D^k for the class members at `member_indices`.
inline ClassSimilarityGraph build_class_graph(const Eigen::MatrixXd& target, const IndexSet& member_indices,
                                              Label class_id, double rho, IndexSet* zero_norm = nullptr) {
    Eigen::MatrixXd members(target.rows(), static_cast<Eigen::Index>(member_indices.size()));
    for (std::size_t j = 0; j < member_indices.size(); ++j) {
        members.col(static_cast<Eigen::Index>(j)) = target.col(static_cast<Eigen::Index>(member_indices[j]));
    }
    ClassSimilarityGraph graph;
    graph.class_id = class_id;
    graph.member_indices = member_indices;
    CosineSimilarity cos = intra_class_similarity(members);
    if (zero_norm != nullptr) {
        for (std::size_t j : cos.zero_norm_columns) {
            zero_norm->push_back(member_indices[j]);
        }
    }
    graph.similarity = std::move(cos.matrix);
    graph.threshold = similarity_threshold(graph.similarity, rho);
    graph.mask = adjacency_mask(graph.similarity, graph.threshold);
    graph.degrees = graph.mask.degrees();
    return graph;
}

/// Classes up to this size are accepted whole so that small classes survive.
inline constexpr std::size_t kSmallClassGuard = 3;

struct ClassSelection {
    Label class_id = 0;
    std::size_t members = 0;
    std::size_t selected = 0;
    std::size_t deleted = 0;
    double threshold = std::numeric_limits<double>::quiet_NaN();
    /// True when the class was accepted whole (small class or no nonzero pairs).
    bool accepted_whole = false;
};

struct UtspResult {
    PseudoLabelState state;
    std::vector<ClassSelection> classes;
    /// Target samples whose features had zero norm (similarity undefined).
    IndexSet zero_norm_samples;
};

/**
 * Splits the target samples into high- and low-confidence sets, class by
 * class. Labels are passed through unchanged; the incoming partition of
 * `pseudo` is ignored.
 */
inline UtspResult utsp_partition(const FeatureMatrix& target, const PseudoLabelState& pseudo, double rho) {
    if (target.samples() != pseudo.size()) {
        throw Error(ErrorCode::LengthMismatch, "pseudo label count differs from target sample count");
    }
    if (!(rho > 0.0 && rho < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "rho must lie strictly inside (0, 1)");
    }
    std::map<Label, IndexSet> by_class;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        by_class[pseudo.labels()[i]].push_back(i);
    }

    IndexSet high;
    IndexSet low;
    std::vector<ClassSelection> classes;
    IndexSet zero_norm;
    for (const auto& [class_id, members] : by_class) {
        ClassSelection summary;
        summary.class_id = class_id;
        summary.members = members.size();
        if (members.size() <= kSmallClassGuard) {
            summary.accepted_whole = true;
            summary.selected = members.size();
            high.insert(high.end(), members.begin(), members.end());
            classes.push_back(summary);
            continue;
        }
        ClassSimilarityGraph graph;
        try {
            graph = build_class_graph(target.data(), members, class_id, rho, &zero_norm);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NoPairs) {
                throw;
            }
            summary.accepted_whole = true;
            summary.selected = members.size();
            high.insert(high.end(), members.begin(), members.end());
            classes.push_back(summary);
            continue;
        }
        summary.threshold = graph.threshold;
        IsolationSplit split = delete_isolated(graph.mask);
        summary.deleted = split.deleted.size();
        if (split.retained.empty()) {
            // cannot happen: delta is itself an off-diagonal entry, so one edge always survives
            summary.accepted_whole = true;
            summary.selected = members.size();
            high.insert(high.end(), members.begin(), members.end());
            classes.push_back(summary);
            continue;
        }
        const std::vector<std::size_t> degrees = split.retained_mask.degrees();
        const SpanningTree tree = spanning_tree_select(split.retained_mask, root_node(degrees));
        std::vector<char> chosen(members.size(), 0);
        for (std::size_t r : tree.members) {
            chosen[split.retained[r]] = 1;
        }
        for (std::size_t j = 0; j < members.size(); ++j) {
            (chosen[j] ? high : low).push_back(members[j]);
        }
        summary.selected = tree.members.size();
        classes.push_back(summary);
    }
    std::sort(high.begin(), high.end());
    std::sort(low.begin(), low.end());
    std::sort(zero_norm.begin(), zero_norm.end());
    return UtspResult{PseudoLabelState(pseudo.labels(), std::move(high), std::move(low)), std::move(classes),
                      std::move(zero_norm)};
}

} // namespace label_remedy

#endif
