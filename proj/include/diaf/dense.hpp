#pragma once

// Small dense kernels used per column: Householder QR, one-sided Jacobi SVD
// and QR-based least squares on row-compressed column blocks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "diaf/error.hpp"
#include "diaf/sparse.hpp"

namespace diaf {

/// Relative threshold below which an R diagonal entry counts as zero.
inline constexpr double kRankTolerance = 1e-14;
/// Relative off-diagonal threshold for Jacobi rotations.
inline constexpr double kJacobiTolerance = 1e-14;
inline constexpr int kJacobiMaxSweeps = 30;

template <typename Scalar>
struct QRFactors {
    Matrix<Scalar> q;  ///< m x k, orthonormal columns
    Matrix<Scalar> r;  ///< k x k upper triangular, nonnegative diagonal
    Index rank = 0;    ///< diagonal entries of r above the rank tolerance

    bool full_rank() const { return rank == r.cols(); }
};

template <typename Scalar>
struct SVDFactors {
    Matrix<Scalar> u;      ///< p x min(p,q)
    Vector<Scalar> sigma;  ///< min(p,q), nonincreasing
    Matrix<Scalar> v;      ///< q x min(p,q); q x q whenever p >= q
};

template <typename Scalar>
struct LeastSquaresResult {
    Vector<Scalar> w;
    Scalar residual = 0;  ///< includes the part of the target outside the active rows
    bool rank_deficient = false;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& M, const char* who)
{
    if (!M.allFinite()) throw NumericalError(std::string(who) + ": non-finite input");
}

/// Fills zero columns of `U` with unit vectors orthogonal to the others.
template <typename Scalar>
void complete_orthonormal(Matrix<Scalar>& U, const std::vector<bool>& filled)
{
    const Index m = U.rows();
    Index candidate = 0;
    for (Index c = 0; c < U.cols(); ++c) {
        if (filled[c]) continue;
        for (; candidate < m; ++candidate) {
            Vector<Scalar> x = Vector<Scalar>::Unit(m, candidate);
            for (int pass = 0; pass < 2; ++pass) {
                for (Index o = 0; o < U.cols(); ++o) {
                    if (o == c || (!filled[o] && o > c)) continue;
                    x -= U.col(o).dot(x) * U.col(o);
                }
            }
            const Scalar nx = x.norm();
            if (nx > Scalar(0.5)) {
                U.col(c) = x / nx;
                ++candidate;
                break;
            }
        }
    }
}

/// One-sided Jacobi on a p x q matrix with p >= q. Returns thin U, sigma,
/// and the full q x q V.
template <typename Scalar>
SVDFactors<Scalar> jacobi_tall(Matrix<Scalar> U)
{
    const Index p = U.rows();
    const Index q = U.cols();
    Matrix<Scalar> V = Matrix<Scalar>::Identity(q, q);
    const Scalar amax = U.cwiseAbs().maxCoeff();
    if (amax > Scalar(0)) U /= amax;
    // Columns below this norm are treated as zero.
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar negligible = eps * eps * U.norm();
    bool converged = q < 2;
    for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
        bool rotated = false;
        for (Index i = 0; i + 1 < q; ++i) {
            for (Index j = i + 1; j < q; ++j) {
                const Scalar a = U.col(i).squaredNorm();
                const Scalar b = U.col(j).squaredNorm();
                const Scalar g = U.col(i).dot(U.col(j));
                if (std::min(a, b) <= negligible * negligible) continue;
                if (g == Scalar(0) || std::abs(g) <= Scalar(kJacobiTolerance) * std::sqrt(a) * std::sqrt(b)) {
                    continue;
                }
                rotated = true;
                const Scalar zeta = (b - a) / (Scalar(2) * g);
                const Scalar t = (zeta >= 0 ? Scalar(1) : Scalar(-1)) /
                                 (std::abs(zeta) + std::hypot(Scalar(1), zeta));
                const Scalar c = Scalar(1) / std::sqrt(Scalar(1) + t * t);
                const Scalar s = c * t;
                for (Index r = 0; r < p; ++r) {
                    const Scalar ui = U(r, i);
                    const Scalar uj = U(r, j);
                    U(r, i) = c * ui - s * uj;
                    U(r, j) = s * ui + c * uj;
                }
                for (Index r = 0; r < q; ++r) {
                    const Scalar vi = V(r, i);
                    const Scalar vj = V(r, j);
                    V(r, i) = c * vi - s * vj;
                    V(r, j) = s * vi + c * vj;
                }
            }
        }
        converged = !rotated;
    }
    if (!converged) {
        throw NumericalError("svd_small: Jacobi iteration did not converge in 30 sweeps");
    }

    Vector<Scalar> norms(q);
    for (Index c = 0; c < q; ++c) {
        norms(c) = U.col(c).norm();
        if (norms(c) <= negligible) norms(c) = Scalar(0);
    }
    std::vector<Index> order(static_cast<std::size_t>(q));
    for (Index c = 0; c < q; ++c) order[c] = c;
    std::stable_sort(order.begin(), order.end(),
                     [&](Index x, Index y) { return norms(x) > norms(y); });

    SVDFactors<Scalar> out;
    out.u.resize(p, q);
    out.sigma.resize(q);
    out.v.resize(q, q);
    std::vector<bool> filled(static_cast<std::size_t>(q), false);
    for (Index c = 0; c < q; ++c) {
        const Index src = order[c];
        out.sigma(c) = norms(src) * amax;
        out.v.col(c) = V.col(src);
        if (norms(src) > Scalar(0)) {
            out.u.col(c) = U.col(src) / norms(src);
            filled[c] = true;
        } else {
            out.sigma(c) = Scalar(0);
            out.u.col(c).setZero();
        }
    }
    complete_orthonormal(out.u, filled);
    return out;
}

/// Flips singular pairs so each right singular vector has its largest-magnitude
/// entry nonnegative.
template <typename Scalar>
void fix_svd_signs(SVDFactors<Scalar>& f)
{
    for (Index c = 0; c < f.v.cols(); ++c) {
        Index imax = 0;
        for (Index r = 1; r < f.v.rows(); ++r) {
            if (std::abs(f.v(r, c)) > std::abs(f.v(imax, c))) imax = r;
        }
        if (f.v(imax, c) < Scalar(0)) {
            f.v.col(c) = -f.v.col(c);
            if (c < f.u.cols()) f.u.col(c) = -f.u.col(c);
        }
    }
}

}  // namespace detail

/// Thin Householder QR of an m x k matrix, m >= k >= 1.
template <typename Derived>
QRFactors<typename Derived::Scalar> qr_householder(const Eigen::MatrixBase<Derived>& M)
{
    using Scalar = typename Derived::Scalar;
    const Index m = M.rows();
    const Index k = M.cols();
    if (k < 1 || m < k) throw std::invalid_argument("qr_householder: requires m >= k >= 1");
    detail::require_finite(M, "qr_householder");

    Matrix<Scalar> R = M;
    std::vector<Vector<Scalar>> reflectors(static_cast<std::size_t>(k));
    for (Index c = 0; c < k; ++c) {
        const Index len = m - c;
        Vector<Scalar> x = R.col(c).tail(len);
        const Scalar nx = x.norm();
        if (nx == Scalar(0)) continue;
        const Scalar alpha = x(0) >= 0 ? -nx : nx;
        x(0) -= alpha;
        const Scalar nv = x.norm();
        if (nv == Scalar(0)) continue;
        x /= nv;
        auto tail = R.bottomRightCorner(len, k - c);
        tail.noalias() -= Scalar(2) * x * (x.transpose() * tail);
        R.col(c).tail(len - 1).setZero();
        reflectors[c] = std::move(x);
    }

    QRFactors<Scalar> f;
    f.q = Matrix<Scalar>::Identity(m, k);
    for (Index c = k - 1; c >= 0; --c) {
        const auto& v = reflectors[c];
        if (v.size() == 0) continue;
        auto tail = f.q.bottomRows(m - c);
        tail.noalias() -= Scalar(2) * v * (v.transpose() * tail);
    }
    f.r = R.topRows(k).template triangularView<Eigen::Upper>();
    for (Index i = 0; i < k; ++i) {
        if (f.r(i, i) < Scalar(0)) {
            f.r.row(i) = -f.r.row(i);
            f.q.col(i) = -f.q.col(i);
        }
    }
    const Scalar tol = Scalar(kRankTolerance) * M.norm();
    f.rank = 0;
    for (Index i = 0; i < k; ++i) {
        if (std::abs(f.r(i, i)) > tol) ++f.rank;
    }
    return f;
}

/// Full singular value decomposition of a small matrix by one-sided Jacobi.
template <typename Derived>
SVDFactors<typename Derived::Scalar> svd_small(const Eigen::MatrixBase<Derived>& M)
{
    using Scalar = typename Derived::Scalar;
    if (M.rows() < 1 || M.cols() < 1) throw std::invalid_argument("svd_small: empty matrix");
    detail::require_finite(M, "svd_small");
    SVDFactors<Scalar> f;
    if (M.rows() >= M.cols()) {
        f = detail::jacobi_tall<Scalar>(M);
    } else {
        auto t = detail::jacobi_tall<Scalar>(M.transpose());
        f.u = std::move(t.v);
        f.sigma = std::move(t.sigma);
        f.v = std::move(t.u);
    }
    detail::fix_svd_signs(f);
    return f;
}

/// QR of a column block that may have fewer rows than columns; short blocks
/// are padded with zero rows and therefore report a deficient rank.
template <typename Scalar>
QRFactors<Scalar> qr_of_block(const Matrix<Scalar>& block)
{
    if (block.rows() >= block.cols()) return qr_householder(block);
    Matrix<Scalar> padded = Matrix<Scalar>::Zero(block.cols(), block.cols());
    padded.topRows(block.rows()) = block;
    return qr_householder(padded);
}

/// Orthonormal basis of the column space of `block`: the thin Q factor when
/// `qr` is full rank, otherwise the left singular vectors above the rank
/// tolerance.
template <typename Scalar>
Matrix<Scalar> range_basis(const Matrix<Scalar>& block, const QRFactors<Scalar>& qr)
{
    if (qr.full_rank()) return qr.q;
    auto svd = svd_small(block);
    const Scalar tol = Scalar(kRankTolerance) * (svd.sigma.size() ? svd.sigma(0) : Scalar(0));
    Index r = 0;
    while (r < svd.sigma.size() && svd.sigma(r) > tol) ++r;
    return svd.u.leftCols(r);
}

/// min ||A_j w - rhs||_2 over w, with rhs given in global row coordinates.
template <typename Scalar>
LeastSquaresResult<Scalar> lstsq(const ColumnSubmatrix<Scalar>& Aj, const SparseVector<Scalar>& rhs,
                                 const QRFactors<Scalar>& qr)
{
    const Index m = Aj.block.rows();
    const Index k = Aj.block.cols();
    Vector<Scalar> b = Vector<Scalar>::Zero(m);
    Scalar outside2 = 0;
    for (std::size_t t = 0; t < rhs.size(); ++t) {
        const Index r = Aj.local_row(rhs.idx[t]);
        if (r >= 0) {
            b(r) = rhs.val[t];
        } else {
            outside2 += rhs.val[t] * rhs.val[t];
        }
    }

    LeastSquaresResult<Scalar> out;
    if (qr.full_rank()) {
        Vector<Scalar> qtb = qr.q.transpose() * b;
        out.w = qr.r.template triangularView<Eigen::Upper>().solve(qtb);
    } else {
        out.rank_deficient = true;
        auto svd = svd_small(Aj.block);
        const Scalar tol = Scalar(kRankTolerance) * (svd.sigma.size() ? svd.sigma(0) : Scalar(0));
        Vector<Scalar> utb = svd.u.transpose() * b;
        out.w = Vector<Scalar>::Zero(k);
        for (Index i = 0; i < svd.sigma.size(); ++i) {
            if (svd.sigma(i) > tol) out.w += (utb(i) / svd.sigma(i)) * svd.v.col(i);
        }
    }
    const Scalar inside2 = (Aj.block * out.w - b).squaredNorm();
    out.residual = std::sqrt(inside2 + outside2);
    return out;
}

template <typename Scalar>
LeastSquaresResult<Scalar> lstsq(const ColumnSubmatrix<Scalar>& Aj, const SparseVector<Scalar>& rhs)
{
    return lstsq(Aj, rhs, qr_of_block(Aj.block));
}

}  // namespace diaf
