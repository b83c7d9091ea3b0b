#include "diaf/factor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diaf/dense.hpp"
#include "diaf/parallel.hpp"

namespace diaf {

namespace {

SparseVectord embed(std::span<const Index> positions, const Vector<double>& values, double scale)
{
    SparseVectord out;
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const double v = scale * values(static_cast<Index>(k));
        if (v != 0.0) {
            out.idx.push_back(positions[k]);
            out.val.push_back(v);
        }
    }
    return out;
}

Index position_in(std::span<const Index> sorted, Index x)
{
    auto it = std::lower_bound(sorted.begin(), sorted.end(), x);
    return (it != sorted.end() && *it == x) ? static_cast<Index>(it - sorted.begin()) : -1;
}

void check_column_patterns(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                           const SubspacePattern& V_pattern)
{
    const Index n = A.cols();
    if (A.rows() != n || W_pattern.size() != n || V_pattern.size() != n) {
        throw std::invalid_argument("diaf: A must be square and the patterns conforming");
    }
}

FactorPair assemble(const SparseMatrixd& A, std::vector<SparseVectord> w, std::vector<SparseVectord> v,
                    std::vector<ColumnDiagnostics> diag)
{
    FactorPair out;
    out.W = SparseMatrixd::from_columns(A.rows(), w);
    out.V = SparseMatrixd::from_columns(A.rows(), v);
    for (const auto& d : diag) {
        out.stab_count += (d.flags & kStabilized) ? 1 : 0;
        out.rank_deficient_count += (d.flags & kRankDeficient) ? 1 : 0;
        out.zero_projection_count += (d.flags & kZeroProjection) ? 1 : 0;
    }
    out.columns = std::move(diag);
    out.nrm = residual_fro(A, out.W, out.V);
    return out;
}

}  // namespace

void StabilizationPolicy::validate() const
{
    if (!(threshold >= 0.0)) throw std::invalid_argument("StabilizationPolicy: threshold must be >= 0");
    if (!(r > 0.0)) throw std::invalid_argument("StabilizationPolicy: r must be > 0");
}

SparseVectord stabilize_column(const Matrix<double>& basis, std::span<const Index> active_rows,
                               Index j, Index l_j, const StabilizationPolicy& policy,
                               std::span<const Index> admissible)
{
    policy.validate();
    auto local_row = [&](Index global) { return position_in(active_rows, global); };

    // Candidate columns of Q_j^T among the positions above the diagonal,
    // ranked by norm.
    std::vector<std::pair<double, Index>> scored;
    for (Index i : admissible) {
        if (i >= j) continue;
        const Index r = local_row(i);
        const double score = r >= 0 ? basis.row(r).norm() : 0.0;
        if (score > 0.0) scored.emplace_back(score, i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t keep = static_cast<std::size_t>(std::max<Index>(l_j - 1, 0));
    if (scored.size() > keep) scored.resize(keep);

    SparseVectord out;
    if (scored.empty()) {
        out.idx.push_back(j);
        out.val.push_back(policy.r);
        return out;
    }
    std::vector<Index> chosen;
    for (const auto& s : scored) chosen.push_back(s.second);
    std::sort(chosen.begin(), chosen.end());

    Matrix<double> M_hat(basis.cols(), static_cast<Index>(chosen.size()));
    for (std::size_t c = 0; c < chosen.size(); ++c) {
        M_hat.col(static_cast<Index>(c)) = basis.row(local_row(chosen[c])).transpose();
    }
    Vector<double> p = Vector<double>::Zero(basis.cols());
    if (const Index rj = local_row(j); rj >= 0) p = basis.row(rj).transpose();

    const auto svd = svd_small(M_hat);
    // Real case of the phase choice: align with the first component of U^T p,
    // any sign when it vanishes.
    const double first = svd.u.col(0).dot(p);
    const double sign = first < 0.0 ? -1.0 : 1.0;
    const Vector<double> v_hat = sign * svd.v.col(0);

    for (std::size_t c = 0; c < chosen.size(); ++c) {
        const double x = v_hat(static_cast<Index>(c));
        if (x != 0.0) {
            out.idx.push_back(chosen[c]);
            out.val.push_back(x);
        }
    }
    out.idx.push_back(j);
    out.val.push_back(policy.r);
    return out;
}

QColumn diaf_q_column(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                      const SubspacePattern& V_pattern, Index j, const StabilizationPolicy& policy,
                      double scale)
{
    if (!(scale > 0.0)) throw std::invalid_argument("diaf_q_column: column scale must be > 0");
    const auto& positions = V_pattern.col(j);
    const Index diag_pos = position_in(positions, j);
    if (diag_pos < 0) {
        throw std::invalid_argument("diaf_q_column: V pattern column " + std::to_string(j) +
                                    " lacks the diagonal");
    }
    const auto Aj = extract_columns(A, std::span<const Index>(W_pattern.col(j)));
    const auto qr = qr_of_block(Aj.block);
    const Matrix<double> Q = range_basis(Aj.block, qr);

    QColumn out;
    if (!qr.full_rank()) out.diag.flags |= kRankDeficient;

    // M_j: the columns of Q_j^T at the allowed positions of v_j.
    const Index l = static_cast<Index>(positions.size());
    Matrix<double> M = Matrix<double>::Zero(std::max<Index>(Q.cols(), 1), l);
    for (Index c = 0; c < l; ++c) {
        const Index r = Aj.local_row(positions[c]);
        if (r >= 0 && Q.cols() > 0) M.col(c) = Q.row(r).transpose();
    }

    Vector<double> v_hat;
    if (M.squaredNorm() == 0.0) {
        out.diag.flags |= kZeroProjection;
        v_hat = Vector<double>::Unit(l, diag_pos);
    } else {
        const auto svd = svd_small(M);
        v_hat = svd.v.col(0);
        // Repeated leading singular value: take the direction of that subspace
        // closest to the diagonal.
        Index mult = 1;
        while (mult < svd.sigma.size() && svd.sigma(mult) >= (1.0 - 1e-13) * svd.sigma(0)) ++mult;
        if (mult > 1) {
            const Matrix<double> lead = svd.v.leftCols(mult);
            const Vector<double> proj = lead * lead.row(diag_pos).transpose();
            if (proj.norm() > 1e-8) v_hat = proj / proj.norm();
        }
        const double dmax = v_hat.cwiseAbs().maxCoeff();
        if (std::abs(v_hat(diag_pos)) > 1e-14 * dmax) {
            if (v_hat(diag_pos) < 0.0) v_hat = -v_hat;
        }
        // Otherwise the SVD convention already made the largest entry positive.
    }

    if (policy.enabled && std::abs(v_hat(diag_pos)) < policy.threshold) {
        out.v = stabilize_column(Q, Aj.active_rows, j, l, policy, positions);
        for (double& x : out.v.val) x *= scale;
        out.diag.flags |= kStabilized;
    } else {
        out.v = embed(positions, v_hat, scale);
    }

    const auto ls = lstsq(Aj, out.v, qr);
    if (ls.rank_deficient) out.diag.flags |= kRankDeficient;
    out.w = embed(W_pattern.col(j), ls.w, 1.0);
    out.diag.residual = ls.residual;
    return out;
}

SColumn diaf_s_column(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                      const SubspacePattern& V_pattern, Index j)
{
    const auto& removed = V_pattern.col(j);
    const auto Aj = extract_columns(A, std::span<const Index>(W_pattern.col(j)));
    const Index k = Aj.block.cols();

    std::vector<Index> kept;
    for (Index r = 0; r < static_cast<Index>(Aj.active_rows.size()); ++r) {
        if (!std::binary_search(removed.begin(), removed.end(), Aj.active_rows[r])) kept.push_back(r);
    }
    SColumn out;
    const Index rows = std::max<Index>(static_cast<Index>(kept.size()), k);
    if (static_cast<Index>(kept.size()) < k) out.diag.flags |= kRankDeficient;
    Matrix<double> A_hat = Matrix<double>::Zero(rows, k);
    for (std::size_t r = 0; r < kept.size(); ++r) A_hat.row(static_cast<Index>(r)) = Aj.block.row(kept[r]);

    const auto qr = qr_householder(A_hat);
    const auto svd = svd_small(qr.r);
    Vector<double> w = svd.v.col(k - 1);
    out.sigma_min = svd.sigma(k - 1);

    // Orient so that (A w_j)_j >= 0 when it is numerically nonzero.
    if (const Index rj = Aj.local_row(j); rj >= 0) {
        const double ajj = Aj.block.row(rj).dot(w);
        if (std::abs(ajj) > 1e-14 * Aj.block.row(rj).norm() && ajj < 0.0) w = -w;
    }
    out.w = embed(W_pattern.col(j), w, 1.0);
    return out;
}

FactorPair diaf_q(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                  const SubspacePattern& V_pattern, const StabilizationPolicy& policy,
                  std::span<const double> column_scales)
{
    check_column_patterns(A, W_pattern, V_pattern);
    policy.validate();
    const Index n = A.cols();
    if (!column_scales.empty() && static_cast<Index>(column_scales.size()) != n) {
        throw std::invalid_argument("diaf_q: one column scale per column required");
    }
    std::vector<SparseVectord> w(static_cast<std::size_t>(n));
    std::vector<SparseVectord> v(static_cast<std::size_t>(n));
    std::vector<ColumnDiagnostics> diag(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        const double s = column_scales.empty() ? 1.0 : column_scales[j];
        auto col = diaf_q_column(A, W_pattern, V_pattern, j, policy, s);
        w[j] = std::move(col.w);
        v[j] = std::move(col.v);
        diag[j] = col.diag;
    });
    return assemble(A, std::move(w), std::move(v), std::move(diag));
}

FactorPair diaf_s(const SparseMatrixd& A, const SubspacePattern& W_pattern,
                  const SubspacePattern& V_pattern)
{
    check_column_patterns(A, W_pattern, V_pattern);
    const Index n = A.cols();
    std::vector<SparseVectord> w(static_cast<std::size_t>(n));
    std::vector<SparseVectord> v(static_cast<std::size_t>(n));
    std::vector<ColumnDiagnostics> diag(static_cast<std::size_t>(n));
    parallel_for(n, [&](Index j) {
        auto col = diaf_s_column(A, W_pattern, V_pattern, j);
        // A w_j projected onto the allowed positions of v_j; the remainder is
        // the column residual.
        const auto& allowed = V_pattern.col(j);
        double outside = 0;
        std::vector<std::pair<Index, double>> aw;
        for (std::size_t t = 0; t < col.w.size(); ++t) {
            const Index c = col.w.idx[t];
            auto rows = A.col_rows(c);
            auto vals = A.col_values(c);
            for (std::size_t k = 0; k < rows.size(); ++k) aw.emplace_back(rows[k], vals[k] * col.w.val[t]);
        }
        std::stable_sort(aw.begin(), aw.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 0; k < aw.size();) {
            const Index r = aw[k].first;
            double sum = 0;
            for (; k < aw.size() && aw[k].first == r; ++k) sum += aw[k].second;
            if (std::binary_search(allowed.begin(), allowed.end(), r)) {
                if (sum != 0.0) {
                    v[j].idx.push_back(r);
                    v[j].val.push_back(sum);
                }
            } else {
                outside += sum * sum;
            }
        }
        col.diag.residual = std::sqrt(outside);
        w[j] = std::move(col.w);
        diag[j] = col.diag;
    });
    return assemble(A, std::move(w), std::move(v), std::move(diag));
}

}  // namespace diaf
