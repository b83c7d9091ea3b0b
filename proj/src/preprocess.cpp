#include "diaf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "diaf/error.hpp"

namespace diaf {

Permutation::Permutation(std::vector<Index> forward) : forward_(std::move(forward))
{
    inverse_.assign(forward_.size(), -1);
    for (std::size_t i = 0; i < forward_.size(); ++i) {
        const Index p = forward_[i];
        if (p < 0 || p >= static_cast<Index>(forward_.size()) || inverse_[p] != -1) {
            throw std::invalid_argument("Permutation: not a bijection");
        }
        inverse_[p] = static_cast<Index>(i);
    }
}

Permutation Permutation::identity(Index n)
{
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) p[i] = i;
    return Permutation(std::move(p));
}

Vector<double> Permutation::gather(const Vector<double>& x) const
{
    Vector<double> y(x.size());
    for (Index i = 0; i < size(); ++i) y(i) = x(at(i));
    return y;
}

Vector<double> Permutation::scatter(const Vector<double>& x) const
{
    Vector<double> y(x.size());
    for (Index i = 0; i < size(); ++i) y(at(i)) = x(i);
    return y;
}

BlockStructure::BlockStructure(std::vector<Index> bounds) : bounds_(std::move(bounds))
{
    if (bounds_.empty() || bounds_.front() != 0) {
        throw std::invalid_argument("BlockStructure: bounds must start at 0");
    }
    for (std::size_t b = 1; b < bounds_.size(); ++b) {
        if (bounds_[b] <= bounds_[b - 1]) {
            throw std::invalid_argument("BlockStructure: bounds must be strictly increasing");
        }
    }
    block_id_.resize(static_cast<std::size_t>(bounds_.back()));
    for (std::size_t b = 0; b + 1 < bounds_.size(); ++b) {
        for (Index i = bounds_[b]; i < bounds_[b + 1]; ++i) block_id_[i] = static_cast<Index>(b);
    }
}

BlockStructure BlockStructure::uniform(Index n, Index block_size)
{
    if (block_size < 1) throw std::invalid_argument("BlockStructure: block size must be >= 1");
    std::vector<Index> bounds{0};
    for (Index i = block_size; i < n; i += block_size) bounds.push_back(i);
    if (n > 0) bounds.push_back(n);
    return BlockStructure(std::move(bounds));
}

Index BlockStructure::max_block() const
{
    Index m = 0;
    for (Index b = 0; b < n_blocks(); ++b) m = std::max(m, block_size(b));
    return m;
}

bool BlockStructure::allows(Index i, Index j, BlockShape shape) const
{
    const Index bi = block_of(i);
    const Index bj = block_of(j);
    switch (shape) {
    case BlockShape::BlockDiagonal:
        return bi == bj;
    case BlockShape::BlockUpper:
        return bi <= bj;
    case BlockShape::BlockLower:
        return bi >= bj;
    }
    return false;
}

Permutation max_transversal(const SparseMatrixd& A)
{
    const Index n = A.cols();
    if (A.rows() != n) throw std::invalid_argument("max_transversal: matrix must be square");
    std::vector<Index> col_of_row(static_cast<std::size_t>(n), -1);
    std::vector<Index> row_of_col(static_cast<std::size_t>(n), -1);

    // Seed with the existing diagonal, then cheap assignments.
    for (Index j = 0; j < n; ++j) {
        if (A.coeff(j, j) != 0.0) {
            col_of_row[j] = j;
            row_of_col[j] = j;
        }
    }
    for (Index j = 0; j < n; ++j) {
        if (row_of_col[j] != -1) continue;
        for (Index r : A.col_rows(j)) {
            if (col_of_row[r] == -1) {
                col_of_row[r] = j;
                row_of_col[j] = r;
                break;
            }
        }
    }

    // Augmenting paths by depth-first search with an explicit stack.
    std::vector<Index> stamp(static_cast<std::size_t>(n), -1);
    std::vector<Index> parent_col(static_cast<std::size_t>(n));
    struct Frame {
        Index col;
        Index pos;
    };
    std::vector<Frame> stack;
    for (Index root = 0; root < n; ++root) {
        if (row_of_col[root] != -1) continue;
        stack.clear();
        stack.push_back({root, A.col_ptr()[root]});
        Index found_row = -1;
        std::vector<Index> visited;
        while (!stack.empty() && found_row == -1) {
            Frame& f = stack.back();
            if (f.pos == A.col_ptr()[f.col + 1]) {
                stack.pop_back();
                continue;
            }
            const Index r = A.row_idx()[f.pos++];
            if (stamp[r] == root) continue;
            stamp[r] = root;
            visited.push_back(r);
            parent_col[r] = f.col;
            if (col_of_row[r] == -1) {
                found_row = r;
            } else {
                const Index next = col_of_row[r];
                stack.push_back({next, A.col_ptr()[next]});
            }
        }
        if (found_row == -1) {
            std::sort(visited.begin(), visited.end());
            std::ostringstream msg;
            msg << "max_transversal: matrix is structurally singular; column " << root
                << " cannot be matched, rows reachable from it are exhausted: {";
            for (std::size_t k = 0; k < visited.size() && k < 20; ++k) {
                msg << (k ? "," : "") << visited[k];
            }
            if (visited.size() > 20) msg << ",...";
            msg << "}";
            throw StructurallySingular(msg.str());
        }
        for (Index r = found_row; r != -1;) {
            const Index c = parent_col[r];
            const Index prev = row_of_col[c];
            col_of_row[r] = c;
            row_of_col[c] = r;
            r = prev;
        }
    }
    return Permutation(std::move(col_of_row));
}

Scaling equilibrate(const SparseMatrixd& A, int iterations)
{
    const Index m = A.rows();
    const Index n = A.cols();
    Scaling s{std::vector<double>(static_cast<std::size_t>(m), 1.0),
              std::vector<double>(static_cast<std::size_t>(n), 1.0)};
    std::vector<double> rmax(static_cast<std::size_t>(m));
    std::vector<double> cmax(static_cast<std::size_t>(n));
    auto measure = [&] {
        std::fill(rmax.begin(), rmax.end(), 0.0);
        std::fill(cmax.begin(), cmax.end(), 0.0);
        for (Index j = 0; j < n; ++j) {
            for (Index k = A.col_ptr()[j]; k < A.col_ptr()[j + 1]; ++k) {
                const Index i = A.row_idx()[k];
                const double v = std::abs(s.row_scale[i] * A.values()[k] * s.col_scale[j]);
                rmax[i] = std::max(rmax[i], v);
                cmax[j] = std::max(cmax[j], v);
            }
        }
    };
    measure();
    for (Index i = 0; i < m; ++i) {
        if (rmax[i] == 0.0) throw std::invalid_argument("equilibrate: zero row " + std::to_string(i));
    }
    for (Index j = 0; j < n; ++j) {
        if (cmax[j] == 0.0) throw std::invalid_argument("equilibrate: zero column " + std::to_string(j));
    }
    for (int it = 0; it < iterations; ++it) {
        double worst = 0.0;
        for (double v : rmax) worst = std::max(worst, std::abs(std::log2(v)));
        for (double v : cmax) worst = std::max(worst, std::abs(std::log2(v)));
        if (worst < 1e-3) break;
        for (Index i = 0; i < m; ++i) s.row_scale[i] /= std::sqrt(rmax[i]);
        for (Index j = 0; j < n; ++j) s.col_scale[j] /= std::sqrt(cmax[j]);
        measure();
    }
    return s;
}

std::pair<Permutation, BlockStructure> scc_block_structure(const SparseMatrixd& A, Index max_block)
{
    const Index n = A.cols();
    if (A.rows() != n) throw std::invalid_argument("scc_block_structure: matrix must be square");
    if (max_block < 1) throw std::invalid_argument("scc_block_structure: max_block must be >= 1");
    // Edge i -> j whenever a_ij != 0: row i refers to unknown j. Rows are the
    // columns of the transpose.
    const SparseMatrixd At = A.transpose();

    std::vector<Index> index(static_cast<std::size_t>(n), -1);
    std::vector<Index> low(static_cast<std::size_t>(n), 0);
    std::vector<char> on_stack(static_cast<std::size_t>(n), 0);
    std::vector<Index> scc_stack;
    struct Frame {
        Index v;
        Index pos;
    };
    std::vector<Frame> call;
    std::vector<std::vector<Index>> components;
    Index counter = 0;

    for (Index root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        call.push_back({root, At.col_ptr()[root]});
        index[root] = low[root] = counter++;
        scc_stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            const Index v = f.v;
            if (f.pos < At.col_ptr()[v + 1]) {
                const Index w = At.row_idx()[f.pos++];
                if (w == v) continue;
                if (index[w] == -1) {
                    index[w] = low[w] = counter++;
                    scc_stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, At.col_ptr()[w]});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<Index> comp;
                Index w;
                do {
                    w = scc_stack.back();
                    scc_stack.pop_back();
                    on_stack[w] = 0;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
            call.pop_back();
            if (!call.empty()) {
                const Index parent = call.back().v;
                low[parent] = std::min(low[parent], low[v]);
            }
        }
    }

    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    std::vector<Index> bounds{0};
    for (const auto& comp : components) {
        for (std::size_t start = 0; start < comp.size(); start += static_cast<std::size_t>(max_block)) {
            const std::size_t stop = std::min(comp.size(), start + static_cast<std::size_t>(max_block));
            order.insert(order.end(), comp.begin() + static_cast<std::ptrdiff_t>(start),
                         comp.begin() + static_cast<std::ptrdiff_t>(stop));
            bounds.push_back(static_cast<Index>(order.size()));
        }
    }
    return {Permutation(std::move(order)), BlockStructure(std::move(bounds))};
}

SubspacePattern block_pattern(const BlockStructure& B, PatternShape shape, const SparseMatrixd* A)
{
    const Index n = B.size();
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    switch (shape) {
    case PatternShape::BlockDiagonal:
        for (Index j = 0; j < n; ++j) {
            const Index b = B.block_of(j);
            for (Index i = B.begin(b); i < B.end(b); ++i) cols[j].push_back(i);
        }
        break;
    case PatternShape::BlockUpperTriangular:
        for (Index j = 0; j < n; ++j) {
            const Index b = B.block_of(j);
            for (Index i = 0; i < B.end(b); ++i) cols[j].push_back(i);
        }
        break;
    case PatternShape::GaussSeidel:
        if (A == nullptr || A->rows() != n || A->cols() != n) {
            throw std::invalid_argument("block_pattern: gauss-seidel shape needs a conforming A");
        }
        for (Index j = 0; j < n; ++j) {
            cols[j].push_back(j);
            for (Index i : A->col_rows(j)) {
                if (i > j) cols[j].push_back(i);
            }
        }
        break;
    }
    return SubspacePattern(n, std::move(cols));
}

SubspacePattern restrict_to_shape(const SubspacePattern& P, const BlockStructure& B, BlockShape shape)
{
    if (P.size() != B.size()) throw std::invalid_argument("restrict_to_shape: dimension mismatch");
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(P.size()));
    for (Index j = 0; j < P.size(); ++j) {
        bool has_diag = false;
        for (Index i : P.col(j)) {
            if (i == j) has_diag = true;
            if (B.allows(i, j, shape)) cols[j].push_back(i);
        }
        if (!has_diag) cols[j].insert(std::lower_bound(cols[j].begin(), cols[j].end(), j), j);
    }
    return SubspacePattern(P.size(), std::move(cols));
}

SubspacePattern remove_shape_offdiag(const SubspacePattern& P, const BlockStructure& B,
                                     BlockShape shape)
{
    if (P.size() != B.size()) throw std::invalid_argument("remove_shape_offdiag: dimension mismatch");
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(P.size()));
    for (Index j = 0; j < P.size(); ++j) {
        for (Index i : P.col(j)) {
            if (i == j || !B.allows(i, j, shape)) cols[j].push_back(i);
        }
        if (cols[j].empty() || !std::binary_search(cols[j].begin(), cols[j].end(), j)) {
            cols[j].insert(std::lower_bound(cols[j].begin(), cols[j].end(), j), j);
        }
    }
    return SubspacePattern(P.size(), std::move(cols));
}

namespace {

// Merges index intervals [lo, hi] and returns the implied contiguous blocks.
std::vector<Index> merge_intervals(Index n, const std::vector<Index>& reach)
{
    std::vector<Index> bounds{0};
    Index extent = -1;
    for (Index i = 0; i < n; ++i) {
        extent = std::max(extent, reach[i]);
        if (extent <= i) bounds.push_back(i + 1);
    }
    return bounds;
}

}  // namespace

std::pair<BlockStructure, BlockShape> infer_block_structure(const SubspacePattern& P)
{
    const Index n = P.size();
    // reach_upper[i]: the furthest index that must share a block with i for P
    // to be block upper triangular (entries below the diagonal force merges).
    std::vector<Index> reach_upper(static_cast<std::size_t>(n));
    std::vector<Index> reach_lower(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) reach_upper[i] = reach_lower[i] = i;
    for (Index j = 0; j < n; ++j) {
        for (Index i : P.col(j)) {
            if (i > j) reach_upper[j] = std::max(reach_upper[j], i);
            if (i < j) reach_lower[i] = std::max(reach_lower[i], j);
        }
    }
    auto upper = merge_intervals(n, reach_upper);
    auto lower = merge_intervals(n, reach_lower);
    const bool prefer_upper = upper.size() >= lower.size();
    BlockStructure B(prefer_upper ? std::move(upper) : std::move(lower));

    bool off_block = false;
    for (Index j = 0; j < n && !off_block; ++j) {
        for (Index i : P.col(j)) {
            if (B.block_of(i) != B.block_of(j)) {
                off_block = true;
                break;
            }
        }
    }
    if (!off_block) return {std::move(B), BlockShape::BlockDiagonal};
    return {std::move(B), prefer_upper ? BlockShape::BlockUpper : BlockShape::BlockLower};
}

}  // namespace diaf
