#pragma once

#include <optional>

#include "diaf/sparse.hpp"

namespace diaf {

/// Numerical dropping by relative tolerance and count. A zero parameter
/// disables that criterion.
struct DropRule {
    double tau = 0.0;  ///< keep |v_i| >= tau * max|v|
    Index p = 0;       ///< keep at most the p largest

    bool enabled() const { return tau > 0.0 || p > 0; }
    void validate() const;
};

/// Truncated, sparsified Neumann series used to generate the pattern of W.
struct NeumannConfig {
    Index k = 3;
    DropRule initial_drop{0.1, 0};
    DropRule level_drop{0.0, 0};
};

/// The protected index, when present in `v`, is always retained and does
/// not count towards `rule.p`.
SparseVectord numerical_drop(const SparseVectord& v, const DropRule& rule,
                             std::optional<Index> protect = std::nullopt);

/// Pattern of W from the truncated series I + S + ... + S^k with
/// S = V0^{-1} (I - P_V0) A, where V0 = P_V0 A; finally the off-diagonal V0
/// positions are removed. Throws SingularBlock when V0 cannot be inverted.
SubspacePattern neumann_pattern(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                                const NeumannConfig& cfg);

/// S = V0^{-1} (I - P_V0) A after the initial dropping, exposed for tests.
SparseMatrixd neumann_operator(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                               const DropRule& initial_drop);

/// Pattern of W whose column j is the union of the row structures of A over
/// the rows allowed in column j of V0 (the structure of A^T V0), sparsified
/// by `rule`, plus the diagonal.
SubspacePattern adjoint_pattern(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                                const DropRule& rule = {});

/// Selects up to k_V positions per column of V out of `candidate`, scored by
/// the norm of the corresponding column of Q_j^T where A_j = Q_j R_j is
/// extracted according to `W_pattern`. The diagonal is always kept.
SubspacePattern select_v_pattern(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                                 const SubspacePattern& candidate, Index k_V);

}  // namespace diaf
