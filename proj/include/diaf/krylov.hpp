#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "diaf/preprocess.hpp"
#include "diaf/sparse.hpp"

namespace diaf {

/// Block triangular factorization of V: partially pivoted dense LU on every
/// diagonal block, with the entries outside the diagonal blocks kept sparse
/// for block substitution.
class VFactorization {
public:
    using Vec = Vector<double>;

    VFactorization() = default;

    Index size() const { return blocks_.size(); }
    const BlockStructure& blocks() const { return blocks_; }
    BlockShape shape() const { return shape_; }

    /// z = V^{-1} x.
    Vec solve(const Vec& x) const;
    /// z = V^{-T} x.
    Vec solve_transpose(const Vec& x) const;
    /// V^{-1} x for sparse x; only the blocks reached by x are touched.
    SparseVectord solve(const SparseVectord& x) const;

    double norm1() const { return norm1_; }
    /// nz(L_V) + nz(U_V): nonzeros of the computed factors, L with its unit
    /// diagonal, U including the off-block entries.
    std::size_t factor_nonzeros() const;

private:
    friend VFactorization factor_v(const SparseMatrixd& V, const BlockStructure& B, BlockShape shape);

    BlockStructure blocks_;
    BlockShape shape_ = BlockShape::BlockDiagonal;
    std::vector<Eigen::PartialPivLU<Matrix<double>>> lu_;
    SparseMatrixd off_;  ///< entries of V outside the diagonal blocks
    double norm1_ = 0;
};

/// Throws SingularBlock naming the first singular diagonal block, and
/// std::invalid_argument when V has entries outside `shape`.
VFactorization factor_v(const SparseMatrixd& V, const BlockStructure& B, BlockShape shape);

/// y = W V^{-1} x.
Vector<double> apply_right_precond(const SparseMatrixd& W, const VFactorization& VF,
                                   const Vector<double>& x);

enum class SolveStatus { Converged, NoConvergence, Breakdown };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

struct SolveReport {
    Index iterations = 0;
    SolveStatus status = SolveStatus::NoConvergence;
    double recurrence_residual = 0;  ///< ||r_k|| / ||r_0|| from the recurrence
    double true_residual = 0;        ///< ||b - A x|| / ||b - A x_0||
    std::vector<double> history;     ///< recurrence residual per iteration
};

struct BicgstabOptions {
    double tol = 1e-8;
    Index maxit = 1000;
    double breakdown = 1e-30;
};

/// Preconditioner M applied as y = M x; the identity when empty.
using Preconditioner = std::function<Vector<double>(const Vector<double>&)>;

/// Right-preconditioned BiCGSTAB from x0 = 0 (or the supplied x).
SolveReport bicgstab(const SparseMatrixd& A, const Vector<double>& b, Vector<double>& x,
                     const Preconditioner& precond = {}, const BicgstabOptions& opts = {});

/// Hager-Higham estimate of the 1-norm condition number of V.
double cond_estimate(const VFactorization& VF, int max_iterations = 5);

}  // namespace diaf
