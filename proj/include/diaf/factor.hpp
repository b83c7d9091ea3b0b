#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "diaf/sparse.hpp"

namespace diaf {

/// Per-column condition flags; a flagged column is still computed.
enum ColumnFlag : std::uint8_t {
    kStabilized = 1u << 0,
    kRankDeficient = 1u << 1,    ///< A_j (or the reduced block in DIAF-S) lost rank
    kZeroProjection = 1u << 2,   ///< no V position reachable from span(A_j); v_j = e_j
};

struct ColumnDiagnostics {
    double residual = 0;  ///< ||A w_j - v_j||_2
    std::uint8_t flags = 0;
};

/// Minimum admissible |v_jj| for a unit column before the column is rebuilt
/// with its diagonal fixed to `r`.
struct StabilizationPolicy {
    double threshold = 1e-2;
    double r = 2.0;
    bool enabled = false;

    void validate() const;
};

/// W and V with A^{-1} ~ W V^{-1}.
struct FactorPair {
    SparseMatrixd W;
    SparseMatrixd V;
    std::vector<ColumnDiagnostics> columns;
    Index stab_count = 0;
    Index rank_deficient_count = 0;
    Index zero_projection_count = 0;
    double nrm = 0;  ///< ||A W - V||_F
};

struct QColumn {
    SparseVectord w;
    SparseVectord v;
    ColumnDiagnostics diag;
};

struct SColumn {
    SparseVectord w;
    double sigma_min = 0;  ///< ||A_hat_j w_j||
    ColumnDiagnostics diag;
};

/// One column of the unit-V-column algorithm: v_j maximizes its component in
/// span(A_j) among unit vectors supported on V_pattern.col(j), then w_j
/// solves min ||A_j w - v_j||. `scale` multiplies the column norm constraint.
QColumn diaf_q_column(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                      const SubspacePattern& V_pattern, Index j,
                      const StabilizationPolicy& policy = {}, double scale = 1.0);

/// Column with diagonal entry r and the best unit combination of the
/// admissible positions below j. `basis` holds an orthonormal basis of
/// span(A_j) on `active_rows` (the compressed columns of Q_j^T, transposed).
SparseVectord stabilize_column(const Matrix<double>& basis, std::span<const Index> active_rows,
                               Index j, Index l_j, const StabilizationPolicy& policy,
                               std::span<const Index> admissible);

/// One column of the unit-W-column algorithm: w_j is the right singular vector
/// of the smallest singular value of A_j with the V_pattern.col(j) rows removed.
SColumn diaf_s_column(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                      const SubspacePattern& V_pattern, Index j);

/// Columnwise DIAF-Q. `column_scales`, when given, replaces the unit norm
/// constraint on column j by scale_j > 0.
FactorPair diaf_q(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                  const SubspacePattern& V_pattern, const StabilizationPolicy& policy = {},
                  std::span<const double> column_scales = {});

/// Columnwise DIAF-S; V is the projection of A W onto V_pattern.
FactorPair diaf_s(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                  const SubspacePattern& V_pattern);

}  // namespace diaf
