#pragma once

#include <utility>
#include <vector>

#include "diaf/sparse.hpp"

namespace diaf {

/// Bijection on {0..n-1} stored in gather form: position i of the permuted
/// object holds original index `at(i)`.
class Permutation {
public:
    Permutation() = default;
    explicit Permutation(std::vector<Index> forward);

    static Permutation identity(Index n);

    Index size() const { return static_cast<Index>(forward_.size()); }
    Index at(Index i) const { return forward_[static_cast<std::size_t>(i)]; }
    Index position_of(Index original) const { return inverse_[static_cast<std::size_t>(original)]; }
    const std::vector<Index>& forward() const { return forward_; }
    const std::vector<Index>& inverse() const { return inverse_; }

    /// y(i) = x(at(i)).
    Vector<double> gather(const Vector<double>& x) const;
    /// y(at(i)) = x(i); the inverse of gather.
    Vector<double> scatter(const Vector<double>& x) const;

    friend bool operator==(const Permutation&, const Permutation&) = default;

private:
    std::vector<Index> forward_;
    std::vector<Index> inverse_;
};

/// Positive row and column scaling; the scaled matrix is diag(row) A diag(col).
struct Scaling {
    std::vector<double> row_scale;
    std::vector<double> col_scale;
};

enum class BlockShape { BlockDiagonal, BlockUpper, BlockLower };

/// Ordered partition of {0..n-1} into contiguous diagonal blocks.
class BlockStructure {
public:
    BlockStructure() = default;
    /// bounds = {0, b1, ..., n}, strictly increasing.
    explicit BlockStructure(std::vector<Index> bounds);

    static BlockStructure uniform(Index n, Index block_size);

    Index size() const { return bounds_.empty() ? 0 : bounds_.back(); }
    Index n_blocks() const { return static_cast<Index>(bounds_.size()) - 1; }
    Index max_block() const;
    Index begin(Index b) const { return bounds_[static_cast<std::size_t>(b)]; }
    Index end(Index b) const { return bounds_[static_cast<std::size_t>(b) + 1]; }
    Index block_size(Index b) const { return end(b) - begin(b); }
    Index block_of(Index i) const { return block_id_[static_cast<std::size_t>(i)]; }
    const std::vector<Index>& bounds() const { return bounds_; }

    /// Whether position (i, j) lies inside the given block shape.
    bool allows(Index i, Index j, BlockShape shape) const;

    friend bool operator==(const BlockStructure& a, const BlockStructure& b)
    {
        return a.bounds_ == b.bounds_;
    }

private:
    std::vector<Index> bounds_;
    std::vector<Index> block_id_;
};

/// Column permutation giving a zero-free diagonal: column i of A(:, p) is
/// column p.at(i) of A. Throws StructurallySingular when no perfect matching
/// exists.
Permutation max_transversal(const SparseMatrixd& A);

/// Iterative row/column infinity-norm equilibration.
Scaling equilibrate(const SparseMatrixd& A, int iterations = 10);

/// Symmetric permutation ordering the strongly connected components of A's
/// graph so that the permuted matrix is block lower triangular; components
/// larger than `max_block` are split into contiguous chunks.
std::pair<Permutation, BlockStructure> scc_block_structure(const SparseMatrixd& A, Index max_block);

enum class PatternShape { BlockDiagonal, BlockUpperTriangular, GaussSeidel };

/// Standard subspace of the requested block shape. GaussSeidel needs `A` and
/// keeps the diagonal plus A's strictly lower triangular positions.
SubspacePattern block_pattern(const BlockStructure& B, PatternShape shape,
                              const SparseMatrixd* A = nullptr);

/// Positions of `P` inside the block shape, plus the diagonal.
SubspacePattern restrict_to_shape(const SubspacePattern& P, const BlockStructure& B,
                                  BlockShape shape);

/// Positions of `P` outside the block shape, plus the diagonal: keeps the
/// intersection of P with the shape trivial off the diagonal.
SubspacePattern remove_shape_offdiag(const SubspacePattern& P, const BlockStructure& B,
                                     BlockShape shape);

/// Finest contiguous block partition under which `P` is block diagonal or
/// block (upper or lower) triangular.
std::pair<BlockStructure, BlockShape> infer_block_structure(const SubspacePattern& P);

}  // namespace diaf
