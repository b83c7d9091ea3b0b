#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace diaf {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct Triplet {
    Index row;
    Index col;
    double value;
};

/// Sparse vector with sorted, unique indices.
template <typename Scalar>
struct SparseVector {
    std::vector<Index> idx;
    std::vector<Scalar> val;

    std::size_t size() const { return idx.size(); }
    bool empty() const { return idx.empty(); }
};

/// Compressed sparse column matrix.
///
/// Row indices are strictly increasing inside each column and no explicit
/// zeros are stored. Instances are immutable once built.
template <typename Scalar>
class SparseMatrix {
public:
    SparseMatrix() : col_ptr_(1, 0) {}

    SparseMatrix(Index rows, Index cols)
        : rows_(rows), cols_(cols), col_ptr_(static_cast<std::size_t>(cols) + 1, 0)
    {
        if (rows < 0 || cols < 0) {
            throw std::invalid_argument("SparseMatrix: negative dimension");
        }
    }

    /// Takes ownership of CSC arrays; validates every structural invariant
    /// and removes explicit zeros.
    SparseMatrix(Index rows, Index cols, std::vector<Index> col_ptr,
                 std::vector<Index> row_idx, std::vector<Scalar> values)
        : rows_(rows), cols_(cols), col_ptr_(std::move(col_ptr)),
          row_idx_(std::move(row_idx)), values_(std::move(values))
    {
        validate();
        drop_zeros();
    }

    static SparseMatrix identity(Index n)
    {
        std::vector<Index> ptr(static_cast<std::size_t>(n) + 1);
        std::vector<Index> idx(static_cast<std::size_t>(n));
        for (Index j = 0; j <= n; ++j) ptr[j] = j;
        for (Index j = 0; j < n; ++j) idx[j] = j;
        return SparseMatrix(n, n, std::move(ptr), std::move(idx),
                            std::vector<Scalar>(static_cast<std::size_t>(n), Scalar(1)));
    }

    /// Builds from coordinate entries; duplicates are summed and resulting
    /// zeros dropped.
    static SparseMatrix from_triplets(Index rows, Index cols,
                                      std::vector<Triplet> entries)
    {
        for (const auto& t : entries) {
            if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
                throw std::out_of_range("SparseMatrix: triplet index out of range");
            }
        }
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.col, a.row) < std::tie(b.col, b.row);
        });
        std::vector<Index> ptr(static_cast<std::size_t>(cols) + 1, 0);
        std::vector<Index> idx;
        std::vector<Scalar> val;
        idx.reserve(entries.size());
        val.reserve(entries.size());
        for (std::size_t k = 0; k < entries.size();) {
            const auto r = entries[k].row;
            const auto c = entries[k].col;
            Scalar sum = 0;
            for (; k < entries.size() && entries[k].row == r && entries[k].col == c; ++k) {
                sum += static_cast<Scalar>(entries[k].value);
            }
            idx.push_back(r);
            val.push_back(sum);
            ++ptr[c + 1];
        }
        for (Index j = 0; j < cols; ++j) ptr[j + 1] += ptr[j];
        return SparseMatrix(rows, cols, std::move(ptr), std::move(idx), std::move(val));
    }

    template <typename Derived>
    static SparseMatrix from_dense(const Eigen::MatrixBase<Derived>& dense)
    {
        std::vector<Index> ptr(static_cast<std::size_t>(dense.cols()) + 1, 0);
        std::vector<Index> idx;
        std::vector<Scalar> val;
        for (Index j = 0; j < dense.cols(); ++j) {
            for (Index i = 0; i < dense.rows(); ++i) {
                if (dense(i, j) != Scalar(0)) {
                    idx.push_back(i);
                    val.push_back(dense(i, j));
                }
            }
            ptr[j + 1] = static_cast<Index>(idx.size());
        }
        return SparseMatrix(dense.rows(), dense.cols(), std::move(ptr), std::move(idx),
                            std::move(val));
    }

    /// Assembles a matrix from independently computed columns.
    static SparseMatrix from_columns(Index rows,
                                     const std::vector<SparseVector<Scalar>>& columns)
    {
        std::vector<Index> ptr(columns.size() + 1, 0);
        std::size_t nnz = 0;
        for (const auto& c : columns) nnz += c.size();
        std::vector<Index> idx;
        std::vector<Scalar> val;
        idx.reserve(nnz);
        val.reserve(nnz);
        for (std::size_t j = 0; j < columns.size(); ++j) {
            idx.insert(idx.end(), columns[j].idx.begin(), columns[j].idx.end());
            val.insert(val.end(), columns[j].val.begin(), columns[j].val.end());
            ptr[j + 1] = static_cast<Index>(idx.size());
        }
        return SparseMatrix(rows, static_cast<Index>(columns.size()), std::move(ptr),
                            std::move(idx), std::move(val));
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index nonZeros() const { return static_cast<Index>(row_idx_.size()); }

    const std::vector<Index>& col_ptr() const { return col_ptr_; }
    const std::vector<Index>& row_idx() const { return row_idx_; }
    const std::vector<Scalar>& values() const { return values_; }

    std::span<const Index> col_rows(Index j) const
    {
        return {row_idx_.data() + col_ptr_[j],
                static_cast<std::size_t>(col_ptr_[j + 1] - col_ptr_[j])};
    }
    std::span<const Scalar> col_values(Index j) const
    {
        return {values_.data() + col_ptr_[j],
                static_cast<std::size_t>(col_ptr_[j + 1] - col_ptr_[j])};
    }

    SparseVector<Scalar> column(Index j) const
    {
        auto r = col_rows(j);
        auto v = col_values(j);
        return {{r.begin(), r.end()}, {v.begin(), v.end()}};
    }

    Scalar coeff(Index i, Index j) const
    {
        auto r = col_rows(j);
        auto it = std::lower_bound(r.begin(), r.end(), i);
        if (it == r.end() || *it != i) return Scalar(0);
        return values_[col_ptr_[j] + (it - r.begin())];
    }

    Matrix<Scalar> to_dense() const
    {
        Matrix<Scalar> d = Matrix<Scalar>::Zero(rows_, cols_);
        for (Index j = 0; j < cols_; ++j) {
            for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
                d(row_idx_[k], j) = values_[k];
            }
        }
        return d;
    }

    SparseMatrix transpose() const
    {
        std::vector<Index> ptr(static_cast<std::size_t>(rows_) + 1, 0);
        for (Index r : row_idx_) ++ptr[r + 1];
        for (Index i = 0; i < rows_; ++i) ptr[i + 1] += ptr[i];
        std::vector<Index> next(ptr.begin(), ptr.end() - 1);
        std::vector<Index> idx(row_idx_.size());
        std::vector<Scalar> val(values_.size());
        for (Index j = 0; j < cols_; ++j) {
            for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
                const Index dst = next[row_idx_[k]]++;
                idx[dst] = j;
                val[dst] = values_[k];
            }
        }
        return SparseMatrix(cols_, rows_, std::move(ptr), std::move(idx), std::move(val));
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    void validate() const
    {
        if (rows_ < 0 || cols_ < 0) {
            throw std::invalid_argument("SparseMatrix: negative dimension");
        }
        if (col_ptr_.size() != static_cast<std::size_t>(cols_) + 1 || col_ptr_.front() != 0 ||
            col_ptr_.back() != static_cast<Index>(row_idx_.size()) ||
            row_idx_.size() != values_.size()) {
            throw std::invalid_argument("SparseMatrix: inconsistent CSC arrays");
        }
        for (Index j = 0; j < cols_; ++j) {
            if (col_ptr_[j + 1] < col_ptr_[j]) {
                throw std::invalid_argument("SparseMatrix: col_ptr decreasing at column " +
                                            std::to_string(j));
            }
            for (Index k = col_ptr_[j]; k < col_ptr_[j + 1]; ++k) {
                if (row_idx_[k] < 0 || row_idx_[k] >= rows_ ||
                    (k > col_ptr_[j] && row_idx_[k] <= row_idx_[k - 1])) {
                    throw std::invalid_argument(
                        "SparseMatrix: row indices not sorted/unique/in range in column " +
                        std::to_string(j));
                }
            }
        }
    }

    void drop_zeros()
    {
        Index out = 0;
        Index start = 0;
        for (Index j = 0; j < cols_; ++j) {
            const Index end = col_ptr_[j + 1];
            for (Index k = start; k < end; ++k) {
                if (values_[k] != Scalar(0)) {
                    row_idx_[out] = row_idx_[k];
                    values_[out] = values_[k];
                    ++out;
                }
            }
            start = end;
            col_ptr_[j + 1] = out;
        }
        row_idx_.resize(static_cast<std::size_t>(out));
        values_.resize(static_cast<std::size_t>(out));
    }

    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Index> col_ptr_;
    std::vector<Index> row_idx_;
    std::vector<Scalar> values_;
};

using SparseMatrixd = SparseMatrix<double>;
using SparseVectord = SparseVector<double>;

/// Standard matrix subspace: the set of allowed row indices per column.
class SubspacePattern {
public:
    SubspacePattern() = default;

    /// Every column must be sorted, unique, nonempty and inside [0, n).
    SubspacePattern(Index n, std::vector<std::vector<Index>> cols);

    static SubspacePattern diagonal(Index n);

    template <typename Scalar>
    static SubspacePattern from_matrix(const SparseMatrix<Scalar>& A, bool add_diagonal)
    {
        std::vector<std::vector<Index>> cols(static_cast<std::size_t>(A.cols()));
        for (Index j = 0; j < A.cols(); ++j) {
            auto r = A.col_rows(j);
            cols[j].assign(r.begin(), r.end());
            if (add_diagonal) {
                auto it = std::lower_bound(cols[j].begin(), cols[j].end(), j);
                if (it == cols[j].end() || *it != j) cols[j].insert(it, j);
            }
        }
        return SubspacePattern(A.rows(), std::move(cols));
    }

    Index size() const { return n_; }
    const std::vector<Index>& col(Index j) const { return cols_[static_cast<std::size_t>(j)]; }
    const std::vector<std::vector<Index>>& cols() const { return cols_; }
    bool contains(Index i, Index j) const;
    bool contains_diagonal() const;
    std::size_t nonZeros() const;
    bool is_subset_of(const SubspacePattern& other) const;

    friend bool operator==(const SubspacePattern&, const SubspacePattern&) = default;

private:
    Index n_ = 0;
    std::vector<std::vector<Index>> cols_;
};

/// Columns of a sparse matrix compressed onto the rows where they are nonzero.
template <typename Scalar>
struct ColumnSubmatrix {
    Index parent_rows = 0;
    std::vector<Index> columns;
    std::vector<Index> active_rows;
    Matrix<Scalar> block;

    /// Local row of a global index, or -1 when the row is inactive.
    Index local_row(Index global) const
    {
        auto it = std::lower_bound(active_rows.begin(), active_rows.end(), global);
        if (it == active_rows.end() || *it != global) return -1;
        return static_cast<Index>(it - active_rows.begin());
    }
};

template <typename Scalar>
ColumnSubmatrix<Scalar> extract_columns(const SparseMatrix<Scalar>& A, std::span<const Index> cols)
{
    if (cols.empty()) {
        throw std::invalid_argument("extract_columns: empty column set");
    }
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c] < 0 || cols[c] >= A.cols() || (c > 0 && cols[c] <= cols[c - 1])) {
            throw std::invalid_argument("extract_columns: columns must be sorted, unique, valid");
        }
    }
    ColumnSubmatrix<Scalar> out;
    out.parent_rows = A.rows();
    out.columns.assign(cols.begin(), cols.end());
    for (Index c : cols) {
        auto r = A.col_rows(c);
        out.active_rows.insert(out.active_rows.end(), r.begin(), r.end());
    }
    std::sort(out.active_rows.begin(), out.active_rows.end());
    out.active_rows.erase(std::unique(out.active_rows.begin(), out.active_rows.end()),
                          out.active_rows.end());
    out.block = Matrix<Scalar>::Zero(static_cast<Index>(out.active_rows.size()),
                                     static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        auto r = A.col_rows(cols[c]);
        auto v = A.col_values(cols[c]);
        // Both sequences are sorted, so a single forward scan locates rows.
        std::size_t pos = 0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            while (out.active_rows[pos] != r[k]) ++pos;
            out.block(static_cast<Index>(pos), static_cast<Index>(c)) = v[k];
        }
    }
    return out;
}

/// Removes from each column of `W` the off-diagonal positions allowed by `V0`.
SubspacePattern pattern_subtract_offdiag(const SubspacePattern& W, const SubspacePattern& V0);

/// Pattern of the product A * P where P is the indicator of `pattern`.
template <typename Scalar>
SubspacePattern product_pattern(const SparseMatrix<Scalar>& A, const SubspacePattern& pattern)
{
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(pattern.size()));
    std::vector<char> mark(static_cast<std::size_t>(A.rows()), 0);
    for (Index j = 0; j < pattern.size(); ++j) {
        auto& out = cols[j];
        for (Index c : pattern.col(j)) {
            for (Index r : A.col_rows(c)) {
                if (!mark[r]) {
                    mark[r] = 1;
                    out.push_back(r);
                }
            }
        }
        if (!mark[j]) out.push_back(j);
        for (Index r : out) mark[r] = 0;
        std::sort(out.begin(), out.end());
    }
    return SubspacePattern(A.rows(), std::move(cols));
}

/// Entries of `A` at the positions allowed by `pattern` (the orthogonal
/// projection onto the subspace).
template <typename Scalar>
SparseMatrix<Scalar> project(const SparseMatrix<Scalar>& A, const SubspacePattern& pattern)
{
    std::vector<SparseVector<Scalar>> cols(static_cast<std::size_t>(A.cols()));
    for (Index j = 0; j < A.cols(); ++j) {
        const auto& allowed = pattern.col(j);
        auto r = A.col_rows(j);
        auto v = A.col_values(j);
        std::size_t p = 0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            while (p < allowed.size() && allowed[p] < r[k]) ++p;
            if (p < allowed.size() && allowed[p] == r[k]) {
                cols[j].idx.push_back(r[k]);
                cols[j].val.push_back(v[k]);
            }
        }
    }
    return SparseMatrix<Scalar>::from_columns(A.rows(), cols);
}

template <typename Scalar, typename Derived>
Vector<Scalar> spmv(const SparseMatrix<Scalar>& A, const Eigen::MatrixBase<Derived>& x)
{
    if (x.size() != A.cols()) throw std::invalid_argument("spmv: dimension mismatch");
    Vector<Scalar> y = Vector<Scalar>::Zero(A.rows());
    for (Index j = 0; j < A.cols(); ++j) {
        const Scalar xj = x(j);
        if (xj == Scalar(0)) continue;
        for (Index k = A.col_ptr()[j]; k < A.col_ptr()[j + 1]; ++k) {
            y(A.row_idx()[k]) += A.values()[k] * xj;
        }
    }
    return y;
}

/// Dense accumulator for sparse-sparse products; reset cost is proportional to
/// the touched entries only.
template <typename Scalar>
class SparseAccumulator {
public:
    explicit SparseAccumulator(Index n) : values_(static_cast<std::size_t>(n), Scalar(0)),
                                          mark_(static_cast<std::size_t>(n), 0) {}

    void add(Index i, Scalar v)
    {
        if (!mark_[i]) {
            mark_[i] = 1;
            touched_.push_back(i);
        }
        values_[i] += v;
    }

    /// Adds alpha * A(:, j).
    void axpy_column(const SparseMatrix<Scalar>& A, Index j, Scalar alpha)
    {
        for (Index k = A.col_ptr()[j]; k < A.col_ptr()[j + 1]; ++k) {
            add(A.row_idx()[k], alpha * A.values()[k]);
        }
    }

    /// Returns the accumulated vector (sorted, zeros removed) and resets.
    SparseVector<Scalar> take()
    {
        std::sort(touched_.begin(), touched_.end());
        SparseVector<Scalar> out;
        out.idx.reserve(touched_.size());
        out.val.reserve(touched_.size());
        for (Index i : touched_) {
            if (values_[i] != Scalar(0)) {
                out.idx.push_back(i);
                out.val.push_back(values_[i]);
            }
            values_[i] = Scalar(0);
            mark_[i] = 0;
        }
        touched_.clear();
        return out;
    }

private:
    std::vector<Scalar> values_;
    std::vector<char> mark_;
    std::vector<Index> touched_;
};

template <typename Scalar>
SparseVector<Scalar> multiply(const SparseMatrix<Scalar>& A, const SparseVector<Scalar>& x,
                              SparseAccumulator<Scalar>& acc)
{
    for (std::size_t k = 0; k < x.size(); ++k) acc.axpy_column(A, x.idx[k], x.val[k]);
    return acc.take();
}

template <typename Scalar>
SparseMatrix<Scalar> multiply(const SparseMatrix<Scalar>& A, const SparseMatrix<Scalar>& B)
{
    if (A.cols() != B.rows()) throw std::invalid_argument("multiply: dimension mismatch");
    SparseAccumulator<Scalar> acc(A.rows());
    std::vector<SparseVector<Scalar>> cols(static_cast<std::size_t>(B.cols()));
    for (Index j = 0; j < B.cols(); ++j) cols[j] = multiply(A, B.column(j), acc);
    return SparseMatrix<Scalar>::from_columns(A.rows(), cols);
}

/// ||A W - V||_F, with A W formed one column at a time.
template <typename Scalar>
Scalar residual_fro(const SparseMatrix<Scalar>& A, const SparseMatrix<Scalar>& W,
                    const SparseMatrix<Scalar>& V)
{
    if (A.cols() != W.rows() || A.rows() != V.rows() || W.cols() != V.cols()) {
        throw std::invalid_argument("residual_fro: dimension mismatch");
    }
    SparseAccumulator<Scalar> acc(A.rows());
    Scalar sum = 0;
    for (Index j = 0; j < W.cols(); ++j) {
        for (Index k = W.col_ptr()[j]; k < W.col_ptr()[j + 1]; ++k) {
            acc.axpy_column(A, W.row_idx()[k], W.values()[k]);
        }
        for (Index k = V.col_ptr()[j]; k < V.col_ptr()[j + 1]; ++k) {
            acc.add(V.row_idx()[k], -V.values()[k]);
        }
        for (Scalar v : acc.take().val) sum += v * v;
    }
    return std::sqrt(sum);
}

/// Permuted copy B(i, j) = A(row_perm[i], col_perm[j]); an empty span means
/// the identity.
template <typename Scalar>
SparseMatrix<Scalar> permute(const SparseMatrix<Scalar>& A, std::span<const Index> row_perm,
                             std::span<const Index> col_perm)
{
    std::vector<Index> row_inv(static_cast<std::size_t>(A.rows()));
    for (Index i = 0; i < A.rows(); ++i) {
        row_inv[row_perm.empty() ? i : row_perm[i]] = i;
    }
    std::vector<SparseVector<Scalar>> cols(static_cast<std::size_t>(A.cols()));
    std::vector<std::pair<Index, Scalar>> buf;
    for (Index j = 0; j < A.cols(); ++j) {
        const Index src = col_perm.empty() ? j : col_perm[j];
        auto r = A.col_rows(src);
        auto v = A.col_values(src);
        buf.clear();
        for (std::size_t k = 0; k < r.size(); ++k) buf.emplace_back(row_inv[r[k]], v[k]);
        std::sort(buf.begin(), buf.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [i, x] : buf) {
            cols[j].idx.push_back(i);
            cols[j].val.push_back(x);
        }
    }
    return SparseMatrix<Scalar>::from_columns(A.rows(), cols);
}

/// diag(row_scale) * A * diag(col_scale). An empty span means no scaling on that side.
template <typename Scalar>
SparseMatrix<Scalar> scale(const SparseMatrix<Scalar>& A, std::span<const Scalar> row_scale,
                           std::span<const Scalar> col_scale)
{
    if ((!row_scale.empty() && static_cast<Index>(row_scale.size()) != A.rows()) ||
        (!col_scale.empty() && static_cast<Index>(col_scale.size()) != A.cols()))
        throw std::invalid_argument("scale: size mismatch");
    std::vector<Scalar> val(A.values());
    for (Index j = 0; j < A.cols(); ++j) {
        for (Index k = A.col_ptr()[j]; k < A.col_ptr()[j + 1]; ++k) {
            if (!row_scale.empty()) val[k] = row_scale[A.row_idx()[k]] * val[k];
            if (!col_scale.empty()) val[k] *= col_scale[j];
        }
    }
    return SparseMatrix<Scalar>(A.rows(), A.cols(), A.col_ptr(), A.row_idx(), std::move(val));
}

// Matrix Market coordinate I/O (real/integer, general/symmetric).
SparseMatrixd read_matrix_market(const std::string& path);
SparseMatrixd parse_matrix_market(std::istream& in, const std::string& source = "<stream>");
void write_matrix_market(const SparseMatrixd& A, const std::string& path);
void write_matrix_market(const SparseMatrixd& A, std::ostream& out);

}  // namespace diaf
