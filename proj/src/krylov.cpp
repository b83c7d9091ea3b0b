#include "diaf/krylov.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "diaf/error.hpp"
#include "diaf/parallel.hpp"

namespace diaf {

VFactorization factor_v(const SparseMatrixd& V, const BlockStructure& B, BlockShape shape)
{
    const Index n = V.cols();
    if (V.rows() != n || B.size() != n) throw std::invalid_argument("factor_v: dimension mismatch");

    VFactorization f;
    f.blocks_ = B;
    f.shape_ = shape;
    std::vector<Triplet> off;
    std::vector<Matrix<double>> dense(static_cast<std::size_t>(B.n_blocks()));
    for (Index b = 0; b < B.n_blocks(); ++b) {
        dense[b] = Matrix<double>::Zero(B.block_size(b), B.block_size(b));
    }
    for (Index j = 0; j < n; ++j) {
        const Index bj = B.block_of(j);
        double colsum = 0;
        auto rows = V.col_rows(j);
        auto vals = V.col_values(j);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const Index i = rows[k];
            colsum += std::abs(vals[k]);
            if (B.block_of(i) == bj) {
                dense[bj](i - B.begin(bj), j - B.begin(bj)) = vals[k];
            } else if (B.allows(i, j, shape)) {
                off.push_back({i, j, vals[k]});
            } else {
                throw std::invalid_argument("factor_v: entry (" + std::to_string(i) + "," +
                                            std::to_string(j) + ") outside the block shape");
            }
        }
        f.norm1_ = std::max(f.norm1_, colsum);
    }
    f.off_ = SparseMatrixd::from_triplets(n, n, std::move(off));

    f.lu_.resize(dense.size());
    parallel_for(B.n_blocks(), [&](Index b) {
        const double scale = dense[b].cwiseAbs().maxCoeff();
        f.lu_[b].compute(dense[b]);
        const auto& lu = f.lu_[b].matrixLU();
        for (Index i = 0; i < lu.rows(); ++i) {
            if (!(std::abs(lu(i, i)) > 1e-14 * scale)) {
                throw SingularBlock(static_cast<std::size_t>(b),
                                    "factor_v: diagonal block " + std::to_string(b) + " (rows " +
                                        std::to_string(B.begin(b)) + ".." +
                                        std::to_string(B.end(b) - 1) + ") is singular");
            }
        }
    });
    return f;
}

std::size_t VFactorization::factor_nonzeros() const
{
    std::size_t nz = static_cast<std::size_t>(off_.nonZeros());
    for (const auto& lu : lu_) {
        const auto& m = lu.matrixLU();
        for (Index j = 0; j < m.cols(); ++j) {
            for (Index i = 0; i < m.rows(); ++i) {
                if (i == j) {
                    nz += 1 + (m(i, j) != 0.0 ? 1 : 0);
                } else if (m(i, j) != 0.0) {
                    ++nz;
                }
            }
        }
    }
    return nz;
}

VFactorization::Vec VFactorization::solve(const Vec& x) const
{
    Vec z = x;
    const Index nb = blocks_.n_blocks();
    auto solve_block = [&](Index b) {
        const Index s = blocks_.begin(b);
        const Index len = blocks_.block_size(b);
        z.segment(s, len) = lu_[b].solve(z.segment(s, len));
        for (Index c = s; c < s + len; ++c) {
            const double zc = z(c);
            for (Index k = off_.col_ptr()[c]; k < off_.col_ptr()[c + 1]; ++k) {
                z(off_.row_idx()[k]) -= off_.values()[k] * zc;
            }
        }
    };
    if (shape_ == BlockShape::BlockLower) {
        for (Index b = 0; b < nb; ++b) solve_block(b);
    } else {
        for (Index b = nb - 1; b >= 0; --b) solve_block(b);
    }
    return z;
}

VFactorization::Vec VFactorization::solve_transpose(const Vec& x) const
{
    Vec z = x;
    const Index nb = blocks_.n_blocks();
    auto solve_block = [&](Index b) {
        const Index s = blocks_.begin(b);
        const Index len = blocks_.block_size(b);
        for (Index c = s; c < s + len; ++c) {
            double acc = 0;
            for (Index k = off_.col_ptr()[c]; k < off_.col_ptr()[c + 1]; ++k) {
                acc += off_.values()[k] * z(off_.row_idx()[k]);
            }
            z(c) -= acc;
        }
        z.segment(s, len) = lu_[b].transpose().solve(z.segment(s, len));
    };
    if (shape_ == BlockShape::BlockLower) {
        for (Index b = nb - 1; b >= 0; --b) solve_block(b);
    } else {
        for (Index b = 0; b < nb; ++b) solve_block(b);
    }
    return z;
}

SparseVectord VFactorization::solve(const SparseVectord& x) const
{
    const Index n = size();
    thread_local std::vector<double> work;
    thread_local std::vector<char> queued;
    if (static_cast<Index>(work.size()) < n) work.assign(static_cast<std::size_t>(n), 0.0);
    if (static_cast<Index>(queued.size()) < blocks_.n_blocks()) {
        queued.assign(static_cast<std::size_t>(blocks_.n_blocks()), 0);
    }
    // Upper shapes are resolved from the last block backwards, lower shapes
    // from the first forwards.
    const bool lower = shape_ == BlockShape::BlockLower;
    auto cmp = [lower](Index a, Index b) { return lower ? a > b : a < b; };
    std::priority_queue<Index, std::vector<Index>, decltype(cmp)> pending(cmp);
    auto touch = [&](Index i) {
        const Index b = blocks_.block_of(i);
        if (!queued[b]) {
            queued[b] = 1;
            pending.push(b);
        }
    };
    for (std::size_t k = 0; k < x.size(); ++k) {
        work[x.idx[k]] += x.val[k];
        touch(x.idx[k]);
    }
    std::vector<std::pair<Index, double>> result;
    while (!pending.empty()) {
        const Index b = pending.top();
        pending.pop();
        queued[b] = 0;
        const Index s = blocks_.begin(b);
        const Index len = blocks_.block_size(b);
        Vec rhs(len);
        for (Index i = 0; i < len; ++i) {
            rhs(i) = work[s + i];
            work[s + i] = 0.0;
        }
        const Vec zb = lu_[b].solve(rhs);
        for (Index i = 0; i < len; ++i) {
            const double zc = zb(i);
            if (zc == 0.0) continue;
            result.emplace_back(s + i, zc);
            for (Index k = off_.col_ptr()[s + i]; k < off_.col_ptr()[s + i + 1]; ++k) {
                const Index r = off_.row_idx()[k];
                work[r] -= off_.values()[k] * zc;
                touch(r);
            }
        }
    }
    std::sort(result.begin(), result.end());
    SparseVectord out;
    out.idx.reserve(result.size());
    out.val.reserve(result.size());
    for (const auto& [i, v] : result) {
        out.idx.push_back(i);
        out.val.push_back(v);
    }
    return out;
}

Vector<double> apply_right_precond(const SparseMatrixd& W, const VFactorization& VF,
                                   const Vector<double>& x)
{
    return spmv(W, VF.solve(x));
}

std::string to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Converged:
        return "converged";
    case SolveStatus::NoConvergence:
        return "no_convergence";
    case SolveStatus::Breakdown:
        return "breakdown";
    }
    return "unknown";
}

SolveStatus solve_status_from_string(const std::string& s)
{
    if (s == "converged") return SolveStatus::Converged;
    if (s == "no_convergence") return SolveStatus::NoConvergence;
    if (s == "breakdown") return SolveStatus::Breakdown;
    throw std::invalid_argument("unknown solve status '" + s + "'");
}

SolveReport bicgstab(const SparseMatrixd& A, const Vector<double>& b, Vector<double>& x,
                     const Preconditioner& precond, const BicgstabOptions& opts)
{
    using Vec = Vector<double>;
    const Index n = A.rows();
    if (A.cols() != n || b.size() != n) throw std::invalid_argument("bicgstab: dimension mismatch");
    if (!b.allFinite()) throw std::invalid_argument("bicgstab: non-finite right-hand side");
    if (x.size() != n) x = Vec::Zero(n);
    auto M = [&](const Vec& v) -> Vec { return precond ? precond(v) : v; };

    SolveReport rep;
    Vec r = b - spmv(A, x);
    const double r0 = r.norm();
    if (r0 == 0.0) {
        rep.status = SolveStatus::Converged;
        return rep;
    }
    const Vec rhat = r;
    const double rhat_norm = rhat.norm();
    Vec p = Vec::Zero(n);
    Vec v = Vec::Zero(n);
    double rho_old = 1, alpha = 1, omega = 1;
    rep.status = SolveStatus::NoConvergence;

    for (Index it = 1; it <= opts.maxit; ++it) {
        rep.iterations = it;
        const double rho = rhat.dot(r);
        if (!std::isfinite(rho) || std::abs(rho) <= opts.breakdown * rhat_norm * r.norm()) {
            rep.status = SolveStatus::Breakdown;
            break;
        }
        if (it == 1) {
            p = r;
        } else {
            const double beta = (rho / rho_old) * (alpha / omega);
            p = r + beta * (p - omega * v);
        }
        const Vec phat = M(p);
        v = spmv(A, phat);
        const double denom = rhat.dot(v);
        if (!std::isfinite(denom) || std::abs(denom) <= opts.breakdown * rhat_norm * v.norm()) {
            rep.status = SolveStatus::Breakdown;
            break;
        }
        alpha = rho / denom;
        const Vec s = r - alpha * v;
        const double snorm = s.norm();
        if (snorm <= opts.tol * r0) {
            x += alpha * phat;
            rep.history.push_back(snorm / r0);
            rep.status = SolveStatus::Converged;
            break;
        }
        const Vec shat = M(s);
        const Vec t = spmv(A, shat);
        const double tt = t.squaredNorm();
        if (!(tt > 0.0)) {
            rep.status = SolveStatus::Breakdown;
            break;
        }
        omega = t.dot(s) / tt;
        if (!std::isfinite(omega) || std::abs(omega) <= opts.breakdown) {
            rep.status = SolveStatus::Breakdown;
            break;
        }
        x += alpha * phat + omega * shat;
        r = s - omega * t;
        rho_old = rho;
        const double rel = r.norm() / r0;
        rep.history.push_back(rel);
        if (!std::isfinite(rel)) {
            rep.status = SolveStatus::Breakdown;
            break;
        }
        if (rel <= opts.tol) {
            rep.status = SolveStatus::Converged;
            break;
        }
    }
    rep.recurrence_residual = rep.history.empty() ? 1.0 : rep.history.back();
    rep.true_residual = (b - spmv(A, x)).norm() / r0;
    return rep;
}

double cond_estimate(const VFactorization& VF, int max_iterations)
{
    using Vec = Vector<double>;
    const Index n = VF.size();
    if (n == 0) return 0.0;
    auto sign = [](const Vec& y) {
        Vec s(y.size());
        for (Index i = 0; i < y.size(); ++i) s(i) = y(i) >= 0 ? 1.0 : -1.0;
        return s;
    };
    Vec x = Vec::Constant(n, 1.0 / static_cast<double>(n));
    Vec y = VF.solve(x);
    double est = y.lpNorm<1>();
    if (n > 1) {
        Vec xi = sign(y);
        Vec z = VF.solve_transpose(xi);
        Index j = 0;
        z.cwiseAbs().maxCoeff(&j);
        for (int it = 1; it < max_iterations; ++it) {
            y = VF.solve(Vec::Unit(n, j));
            const double previous = est;
            est = std::max(est, y.lpNorm<1>());
            const Vec xi_new = sign(y);
            if (xi_new == xi || y.lpNorm<1>() <= previous) break;
            xi = xi_new;
            z = VF.solve_transpose(xi);
            const Index j_old = j;
            const double zmax = z.cwiseAbs().maxCoeff(&j);
            if (std::abs(z(j_old)) >= zmax) break;
        }
        // Alternating test vector guards against the power iteration missing
        // the maximizing column.
        for (Index i = 0; i < n; ++i) {
            x(i) = (i % 2 == 0 ? 1.0 : -1.0) * (1.0 + static_cast<double>(i) / static_cast<double>(n - 1));
        }
        y = VF.solve(x);
        est = std::max(est, 2.0 * y.lpNorm<1>() / (3.0 * static_cast<double>(n)));
    }
    return VF.norm1() * est;
}

}  // namespace diaf
