#ifndef LABEL_REMEDY_TESTING_ORACLES_HPP
#define LABEL_REMEDY_TESTING_ORACLES_HPP

#include "../random.hpp"
#include "../utsp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

/**
 * @file oracles.hpp
 *
 * @brief Independent reference computations and randomized property checks
 * for the confidence-selection step. Used by the test suites and by the
 * `selftest` command; nothing in the library proper depends on this file.
 *
 * The oracles deliberately take different routes from the implementation:
 * union-find instead of breadth-first search, a full sort instead of a
 * selection algorithm, explicit dot-product loops instead of a Gram matrix.
 */

namespace label_remedy::testing {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::size_t> rank_;
};

/// Plain nested-vector adjacency used by the oracles.
using DenseGraph = std::vector<std::vector<char>>;

inline DenseGraph to_dense_graph(const AdjacencyMask& mask) {
    DenseGraph g(mask.order(), std::vector<char>(mask.order(), 0));
    for (std::size_t i = 0; i < mask.order(); ++i)
        for (std::size_t j = 0; j < mask.order(); ++j) g[i][j] = mask(i, j) ? 1 : 0;
    return g;
}

/**
 * Nodes in the union-find component of the max-degree node (smallest index on
 * ties) after removing degree-zero nodes. Empty when the graph has no edges.
 */
inline IndexSet component_of_max_degree(const DenseGraph& g) {
    const std::size_t n = g.size();
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) degree[i] += (i != j && g[i][j]) ? 1 : 0;
    std::size_t best_degree = 0;
    std::size_t root = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (degree[i] > 0 && (root == n || degree[i] > best_degree)) {
            best_degree = degree[i];
            root = i;
        }
    }
    if (root == n) return {};
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (g[i][j]) uf.unite(i, j);
    IndexSet out;
    for (std::size_t i = 0; i < n; ++i)
        if (degree[i] > 0 && uf.find(i) == uf.find(root)) out.push_back(i);
    return out;
}

/// The floor(rho * n_p)-th smallest nonzero upper-triangle entry (rank clamped to 1), via a full sort.
inline double threshold_by_sort(const Eigen::MatrixXd& s, double rho) {
    std::vector<double> entries;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
        for (Eigen::Index j = i + 1; j < s.cols(); ++j)
            if (s(i, j) != 0.0) entries.push_back(s(i, j));
    std::sort(entries.begin(), entries.end());
    auto rank = static_cast<std::size_t>(std::floor(rho * static_cast<double>(entries.size())));
    if (rank == 0) rank = 1;
    return entries.at(rank - 1);
}

/// Cosine similarity by explicit loops; zero diagonal, zero for zero-norm columns.
inline Eigen::MatrixXd cosine_by_loops(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double dot = 0, ni = 0, nj = 0;
            for (Eigen::Index r = 0; r < x.rows(); ++r) {
                dot += x(r, i) * x(r, j);
                ni += x(r, i) * x(r, i);
                nj += x(r, j) * x(r, j);
            }
            s(i, j) = (ni > 0 && nj > 0) ? dot / (std::sqrt(ni) * std::sqrt(nj)) : 0.0;
        }
    }
    return s;
}

/// High-confidence set by composing the oracle steps class by class.
inline IndexSet high_confidence_by_oracle(const Eigen::MatrixXd& target, const LabelVector& labels, double rho) {
    std::map<Label, IndexSet> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    IndexSet high;
    for (const auto& [c, members] : classes) {
        if (members.size() <= 3) {
            high.insert(high.end(), members.begin(), members.end());
            continue;
        }
        Eigen::MatrixXd x(target.rows(), static_cast<Eigen::Index>(members.size()));
        for (std::size_t j = 0; j < members.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = target.col(static_cast<Eigen::Index>(members[j]));
        const Eigen::MatrixXd s = cosine_by_loops(x);
        bool any_nonzero = false;
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = i + 1; j < s.cols(); ++j) any_nonzero |= s(i, j) != 0.0;
        if (!any_nonzero) {
            high.insert(high.end(), members.begin(), members.end());
            continue;
        }
        const double delta = threshold_by_sort(s, rho);
        DenseGraph g(members.size(), std::vector<char>(members.size(), 0));
        for (std::size_t i = 0; i < members.size(); ++i)
            for (std::size_t j = 0; j < members.size(); ++j)
                g[i][j] = (i != j && s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= delta) ? 1 : 0;
        for (std::size_t local : component_of_max_degree(g)) high.push_back(members[local]);
    }
    std::sort(high.begin(), high.end());
    return high;
}

inline AdjacencyMask random_er_mask(Rng& rng, std::size_t n, double p) {
    AdjacencyMask mask(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.uniform() < p) mask.set_edge(i, j);
    return mask;
}

/// Symmetric matrix, zero diagonal, entries uniform in [-1, 1] with some exact zeros.
inline Eigen::MatrixXd random_similarity(Rng& rng, std::size_t n) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) {
            const double v = rng.uniform() < 0.1 ? 0.0 : 2.0 * rng.uniform() - 1.0;
            s(i, j) = v;
            s(j, i) = v;
        }
    }
    return s;
}

/// Clustered class data: a few tight directions plus scatter, so graphs have structure.
inline Eigen::MatrixXd random_class_features(Rng& rng, std::size_t dim, std::size_t n) {
    const std::size_t clusters = 1 + static_cast<std::size_t>(rng.below(3));
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(clusters));
    for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = 3.0 * rng.normal();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto c = static_cast<Eigen::Index>(rng.below(clusters));
        for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, j) = centers(r, c) + rng.normal();
    }
    return x;
}

struct PropertyOutcome {
    std::string name;
    std::size_t instances = 0;
    std::size_t failures = 0;
    double seconds = 0.0;
    std::string first_failure;

    bool passed() const { return instances > 0 && failures == 0; }
};

namespace detail {

template <typename F>
PropertyOutcome timed(std::string name, std::size_t instances, F&& body) {
    PropertyOutcome out;
    out.name = std::move(name);
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < instances; ++i) {
        ++out.instances;
        std::string why;
        if (!body(i, why)) {
            if (out.failures++ == 0) out.first_failure = "instance " + std::to_string(i) + ": " + why;
        }
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

} // namespace detail

/// Spanning-tree selection from the max-degree root equals the union-find component, on random G(n, p).
inline PropertyOutcome check_spanning_tree_oracle(std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    return detail::timed("spanning tree vs union-find component", instances, [&](std::size_t, std::string& why) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.below(60));
        const double p = 0.05 + 0.45 * rng.uniform();
        const AdjacencyMask mask = random_er_mask(rng, n, p);

        const IsolationSplit split = delete_isolated(mask);
        IndexSet selected;
        if (!split.retained.empty()) {
            const std::vector<std::size_t> degrees = split.retained_mask.degrees();
            const SpanningTree tree = spanning_tree_select(split.retained_mask, root_node(degrees));
            for (std::size_t r : tree.members) selected.push_back(split.retained[r]);
            std::sort(selected.begin(), selected.end());
        }
        const IndexSet expected = component_of_max_degree(to_dense_graph(mask));
        if (selected != expected) {
            why = "n=" + std::to_string(n) + " selected " + std::to_string(selected.size()) + " nodes, oracle " +
                  std::to_string(expected.size());
            return false;
        }
        return true;
    });
}

/// Threshold equals the sorted-rank entry, exactly.
inline PropertyOutcome check_threshold_oracle(std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    return detail::timed("threshold vs full-sort rank", instances, [&](std::size_t, std::string& why) {
        const std::size_t n = 2 + static_cast<std::size_t>(rng.below(49));
        Eigen::MatrixXd s = random_similarity(rng, n);
        if (n == 2 && s(0, 1) == 0.0) {
            s(0, 1) = s(1, 0) = 0.5;
        }
        bool any = false;
        for (Eigen::Index i = 0; i < s.rows(); ++i)
            for (Eigen::Index j = i + 1; j < s.cols(); ++j) any |= s(i, j) != 0.0;
        if (!any) s(0, 1) = s(1, 0) = 0.25;
        double rho = rng.uniform();
        while (rho <= 0.0) rho = rng.uniform();
        const double got = similarity_threshold(s, rho);
        const double want = threshold_by_sort(s, rho);
        if (got != want) {
            why = "rho=" + std::to_string(rho) + " got " + std::to_string(got) + " want " + std::to_string(want);
            return false;
        }
        return true;
    });
}

/// Scaling one pseudo class's features by 7.3 leaves the partition unchanged.
inline PropertyOutcome check_scale_invariance(std::size_t instances, std::uint64_t seed, double factor = 7.3) {
    Rng rng(seed);
    return detail::timed("partition invariant to class scaling", instances, [&](std::size_t, std::string& why) {
        const std::size_t classes = 2 + static_cast<std::size_t>(rng.below(3));
        const std::size_t dim = 3 + static_cast<std::size_t>(rng.below(10));
        std::vector<Eigen::MatrixXd> blocks;
        LabelVector labels;
        Eigen::Index total = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t n = 2 + static_cast<std::size_t>(rng.below(40));
            blocks.push_back(random_class_features(rng, dim, n));
            total += static_cast<Eigen::Index>(n);
        }
        Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), total);
        Eigen::Index col = 0;
        for (std::size_t c = 0; c < classes; ++c) {
            x.middleCols(col, blocks[c].cols()) = blocks[c];
            col += blocks[c].cols();
            labels.insert(labels.end(), static_cast<std::size_t>(blocks[c].cols()), static_cast<Label>(c));
        }
        // interleave samples so classes are not contiguous
        std::vector<std::size_t> order(static_cast<std::size_t>(total));
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        Eigen::MatrixXd shuffled(x.rows(), x.cols());
        LabelVector shuffled_labels(labels.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            shuffled.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(order[i]));
            shuffled_labels[i] = labels[order[i]];
        }
        const Label scaled_class = static_cast<Label>(rng.below(classes));
        Eigen::MatrixXd scaled = shuffled;
        for (std::size_t i = 0; i < shuffled_labels.size(); ++i)
            if (shuffled_labels[i] == scaled_class) scaled.col(static_cast<Eigen::Index>(i)) *= factor;

        const double rho = 0.5 + 0.45 * rng.uniform();
        const PseudoLabelState state = PseudoLabelState::unpartitioned(shuffled_labels);
        const UtspResult a = utsp_partition(FeatureMatrix(shuffled), state, rho);
        const UtspResult b = utsp_partition(FeatureMatrix(scaled), state, rho);
        if (a.state.high_conf() != b.state.high_conf() || a.state.low_conf() != b.state.low_conf()) {
            why = "partition changed after scaling class " + std::to_string(scaled_class);
            return false;
        }
        return true;
    });
}

/// Whole-partition agreement with the composed oracle on random labelled data.
inline PropertyOutcome check_partition_oracle(std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    return detail::timed("utsp partition vs composed oracle", instances, [&](std::size_t, std::string& why) {
        const std::size_t dim = 2 + static_cast<std::size_t>(rng.below(8));
        const std::size_t n = 1 + static_cast<std::size_t>(rng.below(80));
        const std::size_t classes = 1 + static_cast<std::size_t>(rng.below(4));
        const Eigen::MatrixXd x = random_class_features(rng, dim, n);
        LabelVector labels(n);
        for (Label& y : labels) y = static_cast<Label>(rng.below(classes));
        const double rho = 0.05 + 0.9 * rng.uniform();
        const UtspResult got = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned(labels), rho);
        const IndexSet want = high_confidence_by_oracle(x, labels, rho);
        if (got.state.high_conf() != want) {
            why = "high-confidence sets differ (" + std::to_string(got.state.high_conf().size()) + " vs " +
                  std::to_string(want.size()) + ")";
            return false;
        }
        return true;
    });
}

} // namespace label_remedy::testing

#endif
