#include <label_remedy/utsp.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace label_remedy;

namespace {

Eigen::MatrixXd upper_matrix(std::size_t n, const std::vector<std::tuple<int, int, double>>& entries) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (const auto& [i, j, v] : entries) {
        s(i, j) = v;
        s(j, i) = v;
    }
    return s;
}

AdjacencyMask mask_from_edges(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
    AdjacencyMask m(n);
    for (auto [a, b] : edges) m.set_edge(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    return m;
}

} // namespace

TEST(IntraClassSimilarity, IdenticalColumns) {
    Eigen::MatrixXd x(3, 2);
    x << 1, 1, 2, 2, 2, 2;
    const CosineSimilarity s = intra_class_similarity(x);
    EXPECT_EQ(s.matrix(0, 0), 0.0);
    EXPECT_EQ(s.matrix(1, 1), 0.0);
    EXPECT_NEAR(s.matrix(0, 1), 1.0, 1e-15);
    EXPECT_EQ(s.matrix(0, 1), s.matrix(1, 0));
}

TEST(IntraClassSimilarity, OrthogonalColumns) {
    const CosineSimilarity s = intra_class_similarity(Eigen::MatrixXd::Identity(2, 2));
    EXPECT_EQ(s.matrix(0, 1), 0.0);
}

TEST(IntraClassSimilarity, HandComputedTriple) {
    Eigen::MatrixXd x(2, 3);
    x << 1, 1, 0, 0, 1, 1;
    const CosineSimilarity s = intra_class_similarity(x);
    const double expected = 1.0 / std::sqrt(2.0); // <(1,0),(1,1)> / (1 * sqrt 2)
    EXPECT_NEAR(s.matrix(0, 1), expected, 1e-12);
    EXPECT_NEAR(s.matrix(1, 2), expected, 1e-12);
    EXPECT_NEAR(s.matrix(0, 1), 0.70711, 5e-6);
    EXPECT_EQ(s.matrix(0, 2), 0.0);
}

TEST(IntraClassSimilarity, ZeroNormColumnIsolated) {
    Eigen::MatrixXd x(2, 3);
    x << 1, 0, 1, 1, 0, 2;
    const CosineSimilarity s = intra_class_similarity(x);
    EXPECT_EQ(s.zero_norm_columns, (IndexSet{1}));
    EXPECT_EQ(s.matrix.row(1).cwiseAbs().sum(), 0.0);
    EXPECT_EQ(s.matrix.col(1).cwiseAbs().sum(), 0.0);
    EXPECT_GT(s.matrix(0, 2), 0.9);
}

TEST(IntraClassSimilarity, EntriesBoundedAndSymmetric) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(7, 25);
    const CosineSimilarity s = intra_class_similarity(x);
    EXPECT_TRUE((s.matrix - s.matrix.transpose()).isZero(0.0));
    EXPECT_LE(s.matrix.maxCoeff(), 1.0);
    EXPECT_GE(s.matrix.minCoeff(), -1.0);
    EXPECT_TRUE(s.matrix.diagonal().isZero(0.0));
}

TEST(SimilarityThreshold, RankFromFloor) {
    const Eigen::MatrixXd s = upper_matrix(3, {{0, 1, 0.3}, {0, 2, 0.1}, {1, 2, 0.4}});
    // entries {0.1, 0.2, 0.3, 0.4} in the strict upper triangle, two exact zeros excluded
    const Eigen::MatrixXd s4 = upper_matrix(4, {{0, 1, 0.4}, {0, 2, 0.2}, {1, 3, 0.1}, {2, 3, 0.3}});
    EXPECT_EQ(similarity_threshold(s4, 0.5), 0.2);
    EXPECT_EQ(similarity_threshold(s4, 0.9), 0.3);
    EXPECT_EQ(similarity_threshold(s, 0.5), 0.1); // floor(1.5) = 1
}

TEST(SimilarityThreshold, ClampsToRankOne) {
    const Eigen::MatrixXd s = upper_matrix(2, {{0, 1, 0.5}});
    EXPECT_EQ(similarity_threshold(s, 0.1), 0.5);
}

TEST(SimilarityThreshold, NegativeEntriesRanked) {
    const Eigen::MatrixXd s = upper_matrix(3, {{0, 1, -0.5}, {0, 2, 0.25}, {1, 2, -0.75}});
    EXPECT_EQ(similarity_threshold(s, 0.5), -0.75);
    EXPECT_EQ(similarity_threshold(s, 0.7), -0.5);
}

TEST(SimilarityThreshold, Errors) {
    auto code = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    EXPECT_EQ(code([] { similarity_threshold(Eigen::MatrixXd::Zero(3, 3), 0.5); }), ErrorCode::NoPairs);
    EXPECT_EQ(code([] { similarity_threshold(Eigen::MatrixXd::Zero(1, 1), 0.5); }), ErrorCode::InvalidArgument);
    const Eigen::MatrixXd s = upper_matrix(2, {{0, 1, 0.5}});
    EXPECT_EQ(code([&] { similarity_threshold(s, 0.0); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code([&] { similarity_threshold(s, 1.0); }), ErrorCode::InvalidArgument);
}

TEST(SimilarityThreshold, ValueIsAnEntry) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 12);
    const Eigen::MatrixXd s = intra_class_similarity(x).matrix;
    for (double rho : {0.05, 0.3, 0.5, 0.85, 0.99}) {
        const double d = similarity_threshold(s, rho);
        EXPECT_TRUE((s.array() == d).any()) << "rho=" << rho;
    }
}

TEST(AdjacencyMaskOp, AboveAndBelowThreshold) {
    const AdjacencyMask above = adjacency_mask(upper_matrix(2, {{0, 1, 0.9}}), 0.5);
    EXPECT_TRUE(above(0, 1));
    EXPECT_TRUE(above(1, 0));
    EXPECT_FALSE(above(0, 0));
    const AdjacencyMask below = adjacency_mask(upper_matrix(2, {{0, 1, 0.3}}), 0.5);
    EXPECT_EQ(below.edge_count(), 0u);
}

TEST(AdjacencyMaskOp, EqualityCountsAsEdge) {
    const AdjacencyMask m = adjacency_mask(upper_matrix(3, {{0, 1, 0.6}, {0, 2, 0.2}, {1, 2, 0.6}}), 0.6);
    EXPECT_TRUE(m(0, 1));
    EXPECT_TRUE(m(1, 2));
    EXPECT_FALSE(m(0, 2));
    EXPECT_EQ(m.edge_count(), 2u);
    EXPECT_EQ(m.degrees(), (std::vector<std::size_t>{1, 2, 1}));
}

TEST(AdjacencyMaskOp, DiagonalNeverSet) {
    // a negative threshold would admit the zero diagonal if it were not excluded
    const AdjacencyMask m = adjacency_mask(upper_matrix(2, {{0, 1, -0.2}}), -0.5);
    EXPECT_FALSE(m(0, 0));
    EXPECT_FALSE(m(1, 1));
    EXPECT_TRUE(m(0, 1));
}

TEST(DeleteIsolated, AllIsolated) {
    const IsolationSplit s = delete_isolated(AdjacencyMask(2));
    EXPECT_TRUE(s.retained.empty());
    EXPECT_EQ(s.deleted, (IndexSet{0, 1}));
}

TEST(DeleteIsolated, PathGraphKeepsAll) {
    const IsolationSplit s = delete_isolated(mask_from_edges(3, {{0, 1}, {1, 2}}));
    EXPECT_EQ(s.retained, (IndexSet{0, 1, 2}));
    EXPECT_TRUE(s.deleted.empty());
}

TEST(DeleteIsolated, SingleEdgeOnFourNodes) {
    const IsolationSplit s = delete_isolated(mask_from_edges(4, {{0, 1}}));
    EXPECT_EQ(s.retained, (IndexSet{0, 1}));
    EXPECT_EQ(s.deleted, (IndexSet{2, 3}));
    EXPECT_EQ(s.retained_mask.order(), 2u);
    EXPECT_TRUE(s.retained_mask(0, 1));
}

TEST(RootNode, ArgmaxWithSmallestIndexTieBreak) {
    const std::vector<std::size_t> a{1, 3, 2};
    const std::vector<std::size_t> b{2, 2};
    const std::vector<std::size_t> c{5};
    const std::vector<std::size_t> d{0, 4, 1, 4};
    EXPECT_EQ(root_node(a), 1u);
    EXPECT_EQ(root_node(b), 0u);
    EXPECT_EQ(root_node(c), 0u);
    EXPECT_EQ(root_node(d), 1u);
    EXPECT_THROW(root_node(std::vector<std::size_t>{}), Error);
}

TEST(SpanningTreeSelect, TriangleAndSeparateEdge) {
    const AdjacencyMask m = mask_from_edges(5, {{0, 1}, {1, 2}, {0, 2}, {3, 4}});
    const SpanningTree t = spanning_tree_select(m, 0);
    EXPECT_EQ(t.members, (IndexSet{0, 1, 2}));
    EXPECT_EQ(t.parent[0], SpanningTree::npos);
    EXPECT_EQ(t.parent[1], 0u);
    EXPECT_EQ(t.parent[2], 0u);
    EXPECT_EQ(t.parent[3], SpanningTree::npos);
}

TEST(SpanningTreeSelect, CompleteGraph) {
    AdjacencyMask m(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) m.set_edge(i, j);
    EXPECT_EQ(spanning_tree_select(m, 2).members, (IndexSet{0, 1, 2, 3}));
}

TEST(SpanningTreeSelect, SingletonAndBadRoot) {
    EXPECT_EQ(spanning_tree_select(AdjacencyMask(1), 0).members, (IndexSet{0}));
    EXPECT_THROW(spanning_tree_select(AdjacencyMask(2), 2), Error);
}

TEST(SpanningTreeSelect, TreeEdgesExistInMask) {
    const AdjacencyMask m = mask_from_edges(6, {{0, 3}, {3, 5}, {5, 1}, {1, 0}, {2, 4}});
    const SpanningTree t = spanning_tree_select(m, 5);
    EXPECT_EQ(t.members, (IndexSet{0, 1, 3, 5}));
    for (std::size_t v : t.members) {
        if (v == t.root) continue;
        EXPECT_TRUE(m(v, t.parent[v]));
    }
}

TEST(UtspPartition, SmallClassAcceptedWhole) {
    Eigen::MatrixXd x(2, 3);
    x << 1, -1, 0, 0, 0, 1; // mutually dissimilar
    const UtspResult r = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned({4, 4, 4}), 0.5);
    EXPECT_EQ(r.state.high_conf(), (IndexSet{0, 1, 2}));
    EXPECT_TRUE(r.state.low_conf().empty());
    ASSERT_EQ(r.classes.size(), 1u);
    EXPECT_TRUE(r.classes[0].accepted_whole);
}

TEST(UtspPartition, TwoClustersKeepsLargerOne) {
    // Four samples in span(e1, e3) and two along e2: cross-cluster similarities are exactly 0
    // and drop out of the ranking, so delta falls among the within-cluster pairs.
    Eigen::MatrixXd x(3, 6);
    x << 1.0, 1.0, 0.9, 1.0, 0.0, 0.0,
         0.0, 0.0, 0.0, 0.0, 1.0, 2.0,
         0.0, 0.1, 0.2, 0.05, 0.0, 0.0;
    const UtspResult r = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned({0, 0, 0, 0, 0, 0}), 0.5);
    EXPECT_EQ(r.state.high_conf(), (IndexSet{0, 1, 2, 3}));
    EXPECT_EQ(r.state.low_conf(), (IndexSet{4, 5}));
    EXPECT_EQ(r.state.labels(), (LabelVector{0, 0, 0, 0, 0, 0}));
}

TEST(UtspPartition, OutlierDeleted) {
    Eigen::MatrixXd x(3, 6);
    x << 1.0, 0.9, 1.0, 0.95, 0.85, 0.0,
         0.1, 0.2, 0.15, 0.1, 0.25, 0.05,
         0.0, 0.05, 0.1, 0.0, 0.05, 1.0;
    const UtspResult r = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned(LabelVector(6, 1)), 0.8);
    EXPECT_EQ(std::count(r.state.low_conf().begin(), r.state.low_conf().end(), 5u), 1);
    ASSERT_EQ(r.classes.size(), 1u);
    EXPECT_GE(r.classes[0].deleted, 1u);
}

TEST(UtspPartition, NoPairsAcceptsWholeClass) {
    // four mutually orthogonal samples: every similarity is exactly zero
    const UtspResult r =
        utsp_partition(FeatureMatrix(Eigen::MatrixXd::Identity(4, 4)), PseudoLabelState::unpartitioned({0, 0, 0, 0}), 0.5);
    EXPECT_EQ(r.state.high_conf(), (IndexSet{0, 1, 2, 3}));
    EXPECT_TRUE(r.classes[0].accepted_whole);
}

TEST(UtspPartition, ZeroNormSampleDemoted) {
    Eigen::MatrixXd x(2, 5);
    x << 1, 1, 0.9, 0, 1, 0.1, 0.2, 0.1, 0, 0.15;
    const UtspResult r = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned(LabelVector(5, 0)), 0.5);
    EXPECT_EQ(r.zero_norm_samples, (IndexSet{3}));
    EXPECT_TRUE(std::binary_search(r.state.low_conf().begin(), r.state.low_conf().end(), 3u));
}

TEST(UtspPartition, ClassesHandledIndependently) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 20);
    LabelVector labels(20);
    for (std::size_t i = 0; i < 20; ++i) labels[i] = static_cast<Label>(i % 3);
    const UtspResult all = utsp_partition(FeatureMatrix(x), PseudoLabelState::unpartitioned(labels), 0.7);
    // Class 1 alone, evaluated on its own columns, must give the same selection.
    IndexSet members;
    for (std::size_t i = 0; i < 20; ++i)
        if (labels[i] == 1) members.push_back(i);
    const UtspResult alone = utsp_partition(FeatureMatrix(x).select_columns(members),
                                            PseudoLabelState::unpartitioned(LabelVector(members.size(), 1)), 0.7);
    IndexSet expected;
    for (std::size_t j : alone.state.high_conf()) expected.push_back(members[j]);
    IndexSet got;
    for (std::size_t i : all.state.high_conf())
        if (labels[i] == 1) got.push_back(i);
    EXPECT_EQ(got, expected);
}

TEST(UtspPartition, RejectsBadArguments) {
    const FeatureMatrix x(Eigen::MatrixXd::Random(2, 4));
    EXPECT_THROW(utsp_partition(x, PseudoLabelState::unpartitioned({0, 0, 0}), 0.5), Error);
    EXPECT_THROW(utsp_partition(x, PseudoLabelState::unpartitioned({0, 0, 0, 0}), 1.0), Error);
}

TEST(BuildClassGraph, DegreesAreMaskRowSums) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 15);
    const IndexSet members{0, 2, 3, 7, 9, 11, 14};
    const ClassSimilarityGraph g = build_class_graph(x, members, 2, 0.6);
    EXPECT_EQ(g.class_id, 2);
    EXPECT_EQ(g.member_indices, members);
    ASSERT_EQ(g.degrees.size(), members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
        std::size_t row = 0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            row += g.mask(i, j) ? 1 : 0;
            EXPECT_EQ(g.mask(i, j), i != j && g.similarity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= g.threshold);
        }
        EXPECT_EQ(g.degrees[i], row);
    }
}
