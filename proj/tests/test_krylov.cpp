#include <gtest/gtest.h>

#include <Eigen/LU>

#include "diaf/error.hpp"
#include "diaf/factor.hpp"
#include "diaf/krylov.hpp"
#include "diaf/patterns.hpp"
#include "test_util.hpp"

using namespace diaf;

namespace {

SparseMatrixd random_block_upper(Index n, const BlockStructure& B, test::Rng& rng, double density)
{
    auto full = test::random_sparse(n, density, rng);
    return project(full, block_pattern(B, PatternShape::BlockUpperTriangular));
}

double dense_cond1(const Matrix<double>& V)
{
    auto norm1 = [](const Matrix<double>& M) { return M.cwiseAbs().colwise().sum().maxCoeff(); };
    return norm1(V) * norm1(V.inverse());
}

}  // namespace

TEST(FactorV, Identity)
{
    auto I = SparseMatrixd::identity(6);
    auto VF = factor_v(I, BlockStructure::uniform(6, 2), BlockShape::BlockDiagonal);
    Vector<double> x = Vector<double>::LinSpaced(6, 1, 6);
    EXPECT_EQ(VF.solve(x), x);
    EXPECT_EQ(VF.factor_nonzeros(), 12u);
}

TEST(FactorV, Diagonal)
{
    auto V = SparseMatrixd::from_triplets(2, 2, {{0, 0, 2.0}, {1, 1, 4.0}});
    auto VF = factor_v(V, BlockStructure::uniform(2, 1), BlockShape::BlockDiagonal);
    Vector<double> x(2);
    x << 1, 1;
    auto z = VF.solve(x);
    EXPECT_EQ(z(0), 0.5);
    EXPECT_EQ(z(1), 0.25);
}

TEST(FactorV, BlockUpperMatchesDense)
{
    test::Rng rng(501);
    for (int trial = 0; trial < 20; ++trial) {
        auto B = BlockStructure::uniform(30, 1 + trial % 7);
        auto V = random_block_upper(30, B, rng, 0.2);
        auto VF = factor_v(V, B, BlockShape::BlockUpper);
        const Matrix<double> D = V.to_dense();
        Vector<double> x = test::random_dense(30, 1, rng);
        Vector<double> ref = D.partialPivLu().solve(x);
        EXPECT_LE((VF.solve(x) - ref).norm(), 1e-10 * ref.norm());
        Vector<double> reft = D.transpose().partialPivLu().solve(x);
        EXPECT_LE((VF.solve_transpose(x) - reft).norm(), 1e-10 * reft.norm());

        SparseVectord sx{{3, 17, 29}, {1.0, -2.0, 0.5}};
        Vector<double> dx = Vector<double>::Zero(30);
        dx(3) = 1;
        dx(17) = -2;
        dx(29) = 0.5;
        auto sz = VF.solve(sx);
        Vector<double> dz = Vector<double>::Zero(30);
        for (std::size_t k = 0; k < sz.size(); ++k) dz(sz.idx[k]) = sz.val[k];
        Vector<double> refs = D.partialPivLu().solve(dx);
        EXPECT_LE((dz - refs).norm(), 1e-10 * refs.norm());
    }
}

TEST(FactorV, LowerShape)
{
    test::Rng rng(503);
    auto B = BlockStructure::uniform(20, 4);
    auto full = test::random_sparse(20, 0.3, rng);
    SubspacePattern lower_shape = restrict_to_shape(test::full_pattern(20), B, BlockShape::BlockLower);
    auto V = project(full, lower_shape);
    auto VF = factor_v(V, B, BlockShape::BlockLower);
    Vector<double> x = test::random_dense(20, 1, rng);
    Vector<double> ref = V.to_dense().partialPivLu().solve(x);
    EXPECT_LE((VF.solve(x) - ref).norm(), 1e-10 * ref.norm());
}

TEST(FactorV, Errors)
{
    auto V = SparseMatrixd::from_triplets(4, 4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 3, 1.0}, {0, 3, 1.0}});
    EXPECT_THROW(factor_v(V, BlockStructure::uniform(4, 2), BlockShape::BlockDiagonal), std::invalid_argument);
    auto S = SparseMatrixd::from_triplets(4, 4, {{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}, {3, 2, 1.0}});
    try {
        factor_v(S, BlockStructure::uniform(4, 2), BlockShape::BlockDiagonal);
        FAIL();
    } catch (const SingularBlock& e) {
        EXPECT_EQ(e.block(), 1);
    }
}

TEST(FactorV, FactorNonzerosCountsLU)
{
    Matrix<double> D(2, 2);
    D << 4, 1, 2, 3;
    auto V = SparseMatrixd::from_dense(D);
    auto VF = factor_v(V, BlockStructure::uniform(2, 2), BlockShape::BlockDiagonal);
    // L: unit diagonal plus one multiplier; U: three entries.
    EXPECT_EQ(VF.factor_nonzeros(), 6u);
}

TEST(Precond, IdentityAndLinearity)
{
    test::Rng rng(505);
    auto I = SparseMatrixd::identity(5);
    auto VF = factor_v(I, BlockStructure::uniform(5, 5), BlockShape::BlockDiagonal);
    Vector<double> x = test::random_dense(5, 1, rng);
    EXPECT_EQ(apply_right_precond(I, VF, x), x);

    auto B = BlockStructure::uniform(20, 5);
    auto V = random_block_upper(20, B, rng, 0.3);
    auto W = test::random_general(20, 0.2, rng);
    auto VF2 = factor_v(V, B, BlockShape::BlockUpper);
    Vector<double> a = test::random_dense(20, 1, rng), b = test::random_dense(20, 1, rng);
    Vector<double> lhs = apply_right_precond(W, VF2, 2.5 * a - 0.5 * b);
    Vector<double> rhs = 2.5 * apply_right_precond(W, VF2, a) - 0.5 * apply_right_precond(W, VF2, b);
    EXPECT_LE((lhs - rhs).norm(), 1e-13 * std::max(1.0, lhs.norm()));
}

TEST(Precond, ExactInverse)
{
    test::Rng rng(507);
    for (Index n = 2; n <= 10; ++n) {
        auto A = test::random_sparse(n, 0.5, rng);
        auto V = test::random_sparse(n, 1.0, rng);
        const Matrix<double> Wd = A.to_dense().partialPivLu().solve(V.to_dense());
        auto W = SparseMatrixd::from_dense(Wd);
        auto VF = factor_v(V, BlockStructure::uniform(n, n), BlockShape::BlockDiagonal);
        Vector<double> x = test::random_dense(n, 1, rng);
        EXPECT_LE((spmv(A, apply_right_precond(W, VF, x)) - x).norm(), 1e-10 * x.norm());
    }
}

TEST(Bicgstab, IdentityOneStep)
{
    test::Rng rng(509);
    auto I = SparseMatrixd::identity(10);
    Vector<double> b = test::random_dense(10, 1, rng);
    Vector<double> x = Vector<double>::Zero(10);
    auto rep = bicgstab(I, b, x);
    EXPECT_EQ(rep.status, SolveStatus::Converged);
    EXPECT_LE(rep.iterations, 1);
    EXPECT_LE((x - b).norm(), 1e-14 * b.norm());
}

TEST(Bicgstab, DiagonalSystem)
{
    std::vector<Triplet> t;
    for (Index i = 0; i < 10; ++i) t.push_back({i, i, double(i + 1)});
    auto A = SparseMatrixd::from_triplets(10, 10, t);
    Vector<double> b = Vector<double>::Ones(10);
    Vector<double> x = Vector<double>::Zero(10);
    auto rep = bicgstab(A, b, x);
    EXPECT_EQ(rep.status, SolveStatus::Converged);
    EXPECT_LE(rep.iterations, 10);
    EXPECT_LE(rep.true_residual, 1e-8);
    for (Index i = 0; i < 10; ++i) EXPECT_NEAR(x(i), 1.0 / (i + 1), 1e-7);
}

TEST(Bicgstab, ConvergedMeansTrueResidualReduced)
{
    test::Rng rng(511);
    for (int trial = 0; trial < 20; ++trial) {
        auto A = test::random_sparse(80, 0.05, rng);
        Vector<double> b = spmv(A, Vector<double>::Ones(80));
        Vector<double> x = Vector<double>::Zero(80);
        auto rep = bicgstab(A, b, x);
        ASSERT_EQ(rep.status, SolveStatus::Converged);
        EXPECT_LE(rep.recurrence_residual, 1e-8);
        EXPECT_LE(rep.true_residual, 1e-8 * (1 + 1e-6));
        EXPECT_EQ(rep.history.size(), static_cast<std::size_t>(rep.iterations));
    }
}

TEST(Bicgstab, PreconditionerHelps)
{
    test::Rng rng(513);
    auto A = test::random_sparse(500, 0.01, rng, 3.0);
    auto Vp = SubspacePattern::diagonal(500);
    auto Wp = neumann_pattern(A, Vp, {});
    auto F = diaf_q(A, Wp, Vp);
    auto VF = factor_v(F.V, BlockStructure::uniform(500, 1), BlockShape::BlockDiagonal);
    Vector<double> b = spmv(A, Vector<double>::Ones(500));
    Vector<double> x0 = Vector<double>::Zero(500), x1 = Vector<double>::Zero(500);
    auto plain = bicgstab(A, b, x0);
    auto pre = bicgstab(A, b, x1, [&](const Vector<double>& v) { return apply_right_precond(F.W, VF, v); });
    ASSERT_EQ(pre.status, SolveStatus::Converged);
    EXPECT_LE(pre.iterations, plain.iterations);
    EXPECT_LE((x1 - Vector<double>::Ones(500)).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(Bicgstab, NoConvergenceAndBreakdown)
{
    test::Rng rng(515);
    auto A = test::random_general(60, 0.3, rng);
    Vector<double> b = test::random_dense(60, 1, rng);
    Vector<double> x = Vector<double>::Zero(60);
    BicgstabOptions opts;
    opts.maxit = 2;
    auto rep = bicgstab(A, b, x, {}, opts);
    EXPECT_EQ(rep.status, SolveStatus::NoConvergence);
    EXPECT_EQ(rep.iterations, 2);

    // A skew rotation makes r_hat^T A r_0 vanish on the first step.
    auto R = SparseMatrixd::from_triplets(2, 2, {{1, 0, 1.0}, {0, 1, -1.0}});
    Vector<double> e = Vector<double>::Unit(2, 0);
    Vector<double> y = Vector<double>::Zero(2);
    EXPECT_EQ(bicgstab(R, e, y).status, SolveStatus::Breakdown);
}

TEST(Bicgstab, StatusNames)
{
    EXPECT_EQ(to_string(SolveStatus::Converged), "converged");
    EXPECT_EQ(to_string(SolveStatus::NoConvergence), "no_convergence");
    EXPECT_EQ(to_string(SolveStatus::Breakdown), "breakdown");
    for (auto s : {SolveStatus::Converged, SolveStatus::NoConvergence, SolveStatus::Breakdown})
        EXPECT_EQ(solve_status_from_string(to_string(s)), s);
    EXPECT_THROW(solve_status_from_string("bogus"), std::invalid_argument);
}

TEST(CondEstimate, Examples)
{
    auto I = SparseMatrixd::identity(7);
    EXPECT_NEAR(cond_estimate(factor_v(I, BlockStructure::uniform(7, 3), BlockShape::BlockDiagonal)), 1.0, 1e-14);
    auto D = SparseMatrixd::from_triplets(2, 2, {{0, 0, 1.0}, {1, 1, 1000.0}});
    EXPECT_NEAR(cond_estimate(factor_v(D, BlockStructure::uniform(2, 1), BlockShape::BlockDiagonal)), 1000.0,
                1e-9);
}

TEST(CondEstimate, WithinFactorTenOfDense)
{
    test::Rng rng(517);
    for (int trial = 0; trial < 20; ++trial) {
        auto B = BlockStructure::uniform(50, 1 + trial % 10);
        auto V = random_block_upper(50, B, rng, 0.3);
        const double est = cond_estimate(factor_v(V, B, BlockShape::BlockUpper));
        const double truth = dense_cond1(V.to_dense());
        EXPECT_LE(est, truth * (1 + 1e-10));
        EXPECT_GE(est, truth / 10);
    }
}
