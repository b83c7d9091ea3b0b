#include "diaf/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "diaf/dense.hpp"
#include "diaf/krylov.hpp"
#include "diaf/parallel.hpp"
#include "diaf/preprocess.hpp"

namespace diaf {

namespace {

SparseAccumulator<double>& local_accumulator(Index n)
{
    thread_local std::unique_ptr<SparseAccumulator<double>> acc;
    thread_local Index size = -1;
    if (!acc || size != n) {
        acc = std::make_unique<SparseAccumulator<double>>(n);
        size = n;
    }
    return *acc;
}

void insert_sorted(std::vector<Index>& v, Index x)
{
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
}

}  // namespace

void DropRule::validate() const
{
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("DropRule: tau must lie in [0, 1]");
    if (p < 0) throw std::invalid_argument("DropRule: p must be >= 0");
}

SparseVectord numerical_drop(const SparseVectord& v, const DropRule& rule, std::optional<Index> protect)
{
    rule.validate();
    if (!rule.enabled()) return v;
    double vmax = 0;
    for (double x : v.val) vmax = std::max(vmax, std::abs(x));
    const double threshold = rule.tau * vmax;

    std::vector<std::size_t> keep;
    std::optional<std::size_t> protected_pos;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (protect && v.idx[k] == *protect) {
            protected_pos = k;
            continue;
        }
        if (rule.tau <= 0.0 || std::abs(v.val[k]) >= threshold) keep.push_back(k);
    }
    if (rule.p > 0 && static_cast<Index>(keep.size()) > rule.p) {
        std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(v.val[a]) > std::abs(v.val[b]);
        });
        keep.resize(static_cast<std::size_t>(rule.p));
    }
    if (protected_pos) keep.push_back(*protected_pos);
    std::sort(keep.begin(), keep.end());
    SparseVectord out;
    out.idx.reserve(keep.size());
    out.val.reserve(keep.size());
    for (std::size_t k : keep) {
        out.idx.push_back(v.idx[k]);
        out.val.push_back(v.val[k]);
    }
    return out;
}

SparseMatrixd neumann_operator(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                               const DropRule& initial_drop)
{
    const Index n = A.cols();
    if (A.rows() != n || V0_pattern.size() != n) {
        throw std::invalid_argument("neumann_pattern: dimension mismatch");
    }
    const SparseMatrixd V0 = project(A, V0_pattern);
    const auto [blocks, shape] = infer_block_structure(V0_pattern);
    const VFactorization VF = factor_v(V0, blocks, shape);

    std::vector<SparseVectord> cols(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        // Column j of (I - P_V0) A: the entries of A outside the V0 pattern.
        const auto& allowed = V0_pattern.col(j);
        SparseVectord rest;
        auto rows = A.col_rows(j);
        auto vals = A.col_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (!std::binary_search(allowed.begin(), allowed.end(), rows[k])) {
                rest.idx.push_back(rows[k]);
                rest.val.push_back(vals[k]);
            }
        }
        cols[j] = numerical_drop(VF.solve(rest), initial_drop, j);
    });
    return SparseMatrixd::from_columns(n, cols);
}

SubspacePattern neumann_pattern(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                                const NeumannConfig& cfg)
{
    if (cfg.k < 0) throw std::invalid_argument("neumann_pattern: k must be >= 0");
    cfg.level_drop.validate();
    const Index n = A.cols();
    const SparseMatrixd S = neumann_operator(A, V0_pattern, cfg.initial_drop);

    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        auto& acc = local_accumulator(n);
        std::vector<Index> pattern{j};
        SparseVectord t{{j}, {1.0}};
        for (Index level = 0; level < cfg.k && !t.empty(); ++level) {
            t = numerical_drop(multiply(S, t, acc), cfg.level_drop, j);
            std::vector<Index> merged;
            merged.reserve(pattern.size() + t.size());
            std::set_union(pattern.begin(), pattern.end(), t.idx.begin(), t.idx.end(),
                           std::back_inserter(merged));
            pattern = std::move(merged);
        }
        cols[j] = std::move(pattern);
    });
    return pattern_subtract_offdiag(SubspacePattern(n, std::move(cols)), V0_pattern);
}

SubspacePattern adjoint_pattern(const SparseMatrixd& A, const SubspacePattern& V0_pattern,
                                const DropRule& rule)
{
    const Index n = A.cols();
    if (A.rows() != n || V0_pattern.size() != n) {
        throw std::invalid_argument("adjoint_pattern: dimension mismatch");
    }
    const SparseMatrixd At = A.transpose();
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        auto& acc = local_accumulator(n);
        // Magnitudes are accumulated so the union is exact (no cancellation)
        // and dropping has meaningful weights.
        for (Index i : V0_pattern.col(j)) {
            for (Index k = At.col_ptr()[i]; k < At.col_ptr()[i + 1]; ++k) {
                acc.add(At.row_idx()[k], std::abs(At.values()[k]));
            }
        }
        auto w = numerical_drop(acc.take(), rule, j);
        cols[j] = std::move(w.idx);
        insert_sorted(cols[j], j);
    });
    return SubspacePattern(n, std::move(cols));
}

SubspacePattern select_v_pattern(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                                 const SubspacePattern& candidate, Index k_V)
{
    const Index n = A.cols();
    if (k_V < 1) throw std::invalid_argument("select_v_pattern: k_V must be >= 1");
    if (A.rows() != n || W_pattern.size() != n || candidate.size() != n) {
        throw std::invalid_argument("select_v_pattern: dimension mismatch");
    }
    std::vector<std::vector<Index>> cols(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        const auto& cand = candidate.col(j);
        if (k_V >= static_cast<Index>(cand.size())) {
            cols[j] = cand;
            insert_sorted(cols[j], j);
            return;
        }
        const auto Aj = extract_columns(A, std::span<const Index>(W_pattern.col(j)));
        const auto qr = qr_of_block(Aj.block);
        const Matrix<double> Q = range_basis(Aj.block, qr);

        std::vector<std::pair<double, Index>> scored;
        for (Index i : cand) {
            if (i == j) continue;
            const Index r = Aj.local_row(i);
            const double score = r >= 0 ? Q.row(r).norm() : 0.0;
            if (score > 0.0) scored.emplace_back(score, i);
        }
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        std::vector<Index> chosen{j};
        for (std::size_t k = 0; k < scored.size() && static_cast<Index>(chosen.size()) < k_V; ++k) {
            chosen.push_back(scored[k].second);
        }
        std::sort(chosen.begin(), chosen.end());
        cols[j] = std::move(chosen);
    });
    return SubspacePattern(n, std::move(cols));
}

}  // namespace diaf
