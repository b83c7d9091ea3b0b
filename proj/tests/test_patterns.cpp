#include <gtest/gtest.h>

#include <Eigen/LU>

#include "diaf/patterns.hpp"
#include "diaf/preprocess.hpp"
#include "test_util.hpp"

using namespace diaf;

namespace {

SparseVectord dense_to_sparse(const std::vector<double>& v)
{
    SparseVectord out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] != 0.0) {
            out.idx.push_back(static_cast<Index>(i));
            out.val.push_back(v[i]);
        }
    }
    return out;
}

SparseMatrixd bidiagonal(Index n, bool upper)
{
    std::vector<Triplet> t;
    for (Index j = 0; j < n; ++j) {
        t.push_back({j, j, 2.0});
        if (upper && j + 1 < n) t.push_back({j, j + 1, 1.0});
        if (!upper && j + 1 < n) t.push_back({j + 1, j, 1.0});
    }
    return SparseMatrixd::from_triplets(n, n, t);
}

// Dense oracle for a diagonal V0: S = D^{-1}(A - D), each column dropped by
// tolerance with the diagonal protected, then the structural union of the
// dropped iterates S t.
SubspacePattern neumann_oracle_diag(const SparseMatrixd& A, Index k, double tau)
{
    const Index n = A.cols();
    Matrix<double> D = A.to_dense();
    Matrix<double> S = D;
    for (Index j = 0; j < n; ++j) S(j, j) = 0;
    for (Index i = 0; i < n; ++i) S.row(i) /= D(i, i);
    if (tau > 0) {
        for (Index j = 0; j < n; ++j) {
            double m = 0;
            for (Index i = 0; i < n; ++i) m = std::max(m, std::abs(S(i, j)));
            for (Index i = 0; i < n; ++i)
                if (i != j && std::abs(S(i, j)) < tau * m) S(i, j) = 0;
        }
    }
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        Vector<double> t = Vector<double>::Unit(n, j);
        std::vector<bool> mark(static_cast<std::size_t>(n), false);
        mark[j] = true;
        for (Index l = 0; l < k; ++l) {
            t = S * t;
            for (Index i = 0; i < n; ++i)
                if (t(i) != 0.0) mark[i] = true;
        }
        for (Index i = 0; i < n; ++i)
            if (mark[i]) cols[j].push_back(i);
    }
    return SubspacePattern(n, std::move(cols));
}

}  // namespace

TEST(NumericalDrop, Examples)
{
    auto v = dense_to_sparse({1.0, 0.05, -0.5, 0.002});
    auto d = numerical_drop(v, {0.1, 0});
    EXPECT_EQ(d.idx, (std::vector<Index>{0, 2}));
    EXPECT_EQ(d.val, (std::vector<double>{1.0, -0.5}));

    auto u = numerical_drop(v, {0.0, 0});
    EXPECT_EQ(u.idx, v.idx);
    EXPECT_EQ(u.val, v.val);

    auto w = numerical_drop(dense_to_sparse({0.01, 1.0}), {0.5, 0}, 0);
    EXPECT_EQ(w.idx, (std::vector<Index>{0, 1}));
}

TEST(NumericalDrop, CountAndProtection)
{
    auto v = dense_to_sparse({0.3, -0.9, 0.1, 0.5, 0.05});
    EXPECT_EQ(numerical_drop(v, {0.0, 2}).idx, (std::vector<Index>{1, 3}));
    EXPECT_EQ(numerical_drop(v, {0.0, 2}, 4).idx, (std::vector<Index>{1, 3, 4}));
    EXPECT_EQ(numerical_drop(v, {0.2, 1}).idx, (std::vector<Index>{1}));
    EXPECT_THROW(numerical_drop(v, {1.5, 0}), std::invalid_argument);
}

TEST(NumericalDrop, ExhaustiveScan)
{
    test::Rng rng(301);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<Index> pc(0, 6);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> dense(12);
        for (std::size_t i = 0; i < dense.size(); ++i) dense[i] = (trial + i) % 3 ? u(rng) : 0.0;
        auto v = dense_to_sparse(dense);
        DropRule rule{std::uniform_real_distribution<double>(0, 1)(rng), pc(rng)};
        const Index protect = trial % 12;
        auto d = numerical_drop(v, rule, protect);
        double m = 0;
        for (double x : v.val) m = std::max(m, std::abs(x));
        Index kept_unprotected = 0;
        for (std::size_t k = 0; k < d.size(); ++k) {
            const Index i = d.idx[k];
            EXPECT_EQ(d.val[k], dense[i]);
            if (i == protect) continue;
            ++kept_unprotected;
            EXPECT_GE(std::abs(dense[i]), rule.tau * m);
        }
        if (rule.p > 0) EXPECT_LE(kept_unprotected, rule.p);
        if (dense[protect] != 0.0)
            EXPECT_TRUE(std::binary_search(d.idx.begin(), d.idx.end(), protect));
        // Every dropped entry is smaller than every kept unprotected one, or
        // below the tolerance.
        for (std::size_t k = 0; k < v.size(); ++k) {
            const Index i = v.idx[k];
            if (i == protect || std::binary_search(d.idx.begin(), d.idx.end(), i)) continue;
            bool below = std::abs(dense[i]) < rule.tau * m;
            if (!below) {
                for (Index j : d.idx)
                    if (j != protect) EXPECT_GE(std::abs(dense[j]), std::abs(dense[i]));
            }
        }
    }
}

TEST(Neumann, IdentityAndDiagonal)
{
    auto I = SparseMatrixd::identity(6);
    EXPECT_EQ(neumann_pattern(I, SubspacePattern::diagonal(6), {}), SubspacePattern::diagonal(6));
    auto D = SparseMatrixd::from_triplets(3, 3, {{0, 0, 2.0}, {1, 1, -1.0}, {2, 2, 5.0}});
    SubspacePattern V0(3, {{0, 1}, {0, 1}, {2}});
    EXPECT_EQ(neumann_pattern(D, V0, {}), SubspacePattern::diagonal(3));
}

TEST(Neumann, Bidiagonal)
{
    NeumannConfig cfg{2, {0, 0}, {0, 0}};
    const Index n = 5;
    auto lower = neumann_pattern(bidiagonal(n, false), SubspacePattern::diagonal(n), cfg);
    auto upper = neumann_pattern(bidiagonal(n, true), SubspacePattern::diagonal(n), cfg);
    for (Index j = 0; j < n; ++j) {
        std::vector<Index> down, up;
        for (Index i = j; i <= std::min(j + 2, n - 1); ++i) down.push_back(i);
        for (Index i = std::max<Index>(j - 2, 0); i <= j; ++i) up.push_back(i);
        EXPECT_EQ(lower.col(j), down);
        EXPECT_EQ(upper.col(j), up);
    }
    EXPECT_EQ(lower, neumann_oracle_diag(bidiagonal(n, false), 2, 0));
}

TEST(Neumann, KZeroIsIdentity)
{
    test::Rng rng(303);
    auto A = test::random_sparse(20, 0.2, rng);
    NeumannConfig cfg{0, {0, 0}, {0, 0}};
    EXPECT_EQ(neumann_pattern(A, SubspacePattern::diagonal(20), cfg), SubspacePattern::diagonal(20));
}

TEST(Neumann, MatchesDenseOracle)
{
    test::Rng rng(305);
    for (int trial = 0; trial < 30; ++trial) {
        auto A = test::random_sparse(25, 0.08, rng);
        const Index k = trial % 4;
        const double tau = (trial % 2) ? 0.3 : 0.0;
        NeumannConfig cfg{k, {tau, 0}, {0, 0}};
        EXPECT_EQ(neumann_pattern(A, SubspacePattern::diagonal(25), cfg), neumann_oracle_diag(A, k, tau))
            << "trial " << trial;
    }
}

TEST(Neumann, BlockV0RemovesItsOffDiagonal)
{
    test::Rng rng(307);
    auto A = test::random_sparse(30, 0.1, rng);
    auto B = BlockStructure::uniform(30, 6);
    auto V0 = restrict_to_shape(SubspacePattern::from_matrix(A, true), B, BlockShape::BlockDiagonal);
    auto W = neumann_pattern(A, V0, {});
    for (Index j = 0; j < 30; ++j) {
        EXPECT_TRUE(W.contains(j, j));
        for (Index i : W.col(j))
            if (i != j) EXPECT_FALSE(V0.contains(i, j));
    }
}

TEST(Neumann, LevelDropShrinksPattern)
{
    test::Rng rng(309);
    auto A = test::random_sparse(40, 0.1, rng);
    auto V0 = SubspacePattern::diagonal(40);
    auto loose = neumann_pattern(A, V0, {3, {0, 0}, {0, 0}});
    auto tight = neumann_pattern(A, V0, {3, {0, 0}, {0, 2}});
    EXPECT_TRUE(tight.is_subset_of(loose));
    EXPECT_LT(tight.nonZeros(), loose.nonZeros());
}

TEST(Adjoint, DiagonalV0GivesTransposePattern)
{
    test::Rng rng(311);
    auto A = test::random_general(20, 0.15, rng);
    EXPECT_EQ(adjoint_pattern(A, SubspacePattern::diagonal(20)),
              SubspacePattern::from_matrix(A.transpose(), true));
}

TEST(Adjoint, IdentityMatrix)
{
    test::Rng rng(313);
    auto I = SparseMatrixd::identity(10);
    auto V0 = test::random_pattern(10, 3, rng);
    auto W = adjoint_pattern(I, V0);
    // The row union of I over V0 is V0 itself; no off-diagonal survives the
    // final subtraction of V0.
    EXPECT_EQ(W, V0);
    EXPECT_EQ(pattern_subtract_offdiag(W, V0), SubspacePattern::diagonal(10));
    EXPECT_EQ(adjoint_pattern(I, SubspacePattern::diagonal(10)), SubspacePattern::diagonal(10));
}

TEST(Adjoint, MonotoneInV0)
{
    test::Rng rng(315);
    for (int trial = 0; trial < 50; ++trial) {
        auto A = test::random_general(20, 0.1, rng);
        auto small = test::random_pattern(20, 3, rng);
        auto extra = test::random_pattern(20, 3, rng);
        std::vector<std::vector<Index>> cols(20);
        for (Index j = 0; j < 20; ++j)
            std::set_union(small.col(j).begin(), small.col(j).end(), extra.col(j).begin(),
                           extra.col(j).end(), std::back_inserter(cols[j]));
        SubspacePattern big(20, std::move(cols));
        EXPECT_TRUE(adjoint_pattern(A, small).is_subset_of(adjoint_pattern(A, big)));
    }
}

TEST(SelectV, IdentityIsDiagonal)
{
    auto I = SparseMatrixd::identity(8);
    auto W = SubspacePattern::diagonal(8);
    auto cand = block_pattern(BlockStructure::uniform(8, 4), PatternShape::BlockDiagonal);
    EXPECT_EQ(select_v_pattern(I, W, cand, 3), SubspacePattern::diagonal(8));
}

TEST(SelectV, LargeBudgetKeepsCandidate)
{
    test::Rng rng(317);
    auto A = test::random_sparse(12, 0.3, rng);
    auto W = SubspacePattern::from_matrix(A.transpose(), true);
    auto cand = block_pattern(BlockStructure::uniform(12, 4), PatternShape::BlockDiagonal);
    EXPECT_EQ(select_v_pattern(A, W, cand, 4), cand);
    EXPECT_EQ(select_v_pattern(A, W, cand, 100), cand);
    EXPECT_THROW(select_v_pattern(A, W, cand, 0), std::invalid_argument);
}

TEST(SelectV, NestedAndWithinCandidate)
{
    test::Rng rng(319);
    for (int trial = 0; trial < 20; ++trial) {
        auto A = test::random_sparse(60, 0.05, rng);
        auto W = neumann_pattern(A, SubspacePattern::diagonal(60), {});
        auto cand = block_pattern(BlockStructure::uniform(60, 40), PatternShape::BlockDiagonal);
        auto s10 = select_v_pattern(A, W, cand, 10);
        auto s30 = select_v_pattern(A, W, cand, 30);
        EXPECT_TRUE(s10.is_subset_of(s30));
        EXPECT_TRUE(s30.is_subset_of(cand));
        for (Index j = 0; j < 60; ++j) {
            EXPECT_TRUE(s10.contains(j, j));
            EXPECT_LE(static_cast<Index>(s10.col(j).size()), 10);
        }
    }
}

TEST(SelectV, PicksLargestScores)
{
    test::Rng rng(321);
    auto A = test::random_sparse(20, 0.15, rng);
    auto W = test::random_pattern(20, 4, rng);
    auto cand = test::full_pattern(20);
    auto S = select_v_pattern(A, W, cand, 5);
    for (Index j = 0; j < 20; ++j) {
        auto Aj = extract_columns(A, std::span<const Index>(W.col(j)));
        // Oracle scores from an Eigen QR of the dense column block.
        Matrix<double> D = Matrix<double>::Zero(20, static_cast<Index>(W.col(j).size()));
        for (std::size_t c = 0; c < W.col(j).size(); ++c) D.col(static_cast<Index>(c)) = A.to_dense().col(W.col(j)[c]);
        Eigen::HouseholderQR<Matrix<double>> qr(D);
        Matrix<double> Q = qr.householderQ() * Matrix<double>::Identity(20, D.cols());
        std::vector<double> score(20);
        for (Index i = 0; i < 20; ++i) score[i] = Q.row(i).norm();
        double min_kept = 1e300;
        for (Index i : S.col(j))
            if (i != j) min_kept = std::min(min_kept, score[i]);
        if (static_cast<Index>(S.col(j).size()) < 5) continue;
        for (Index i = 0; i < 20; ++i)
            if (i != j && !S.contains(i, j)) EXPECT_LE(score[i], min_kept + 1e-12);
    }
}
