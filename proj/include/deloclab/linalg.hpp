#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <vector>

#include "deloclab/errors.hpp"

namespace deloclab {

using Complex = std::complex<double>;

inline double default_rank_tol(Eigen::Index rows, Eigen::Index cols) {
    return 64.0 * std::numeric_limits<double>::epsilon() *
           static_cast<double>(std::max(rows, cols));
}

// ---------------------------------------------------------------------------
// SVD
// ---------------------------------------------------------------------------

struct SvdResult {
    Eigen::VectorXd singular_values;  // descending
    Eigen::MatrixXcd left_basis;      // full unitary U
    Eigen::MatrixXcd right_basis;     // full unitary V
    double backend_residual = 0.0;    // max_i ||A v_i - s_i u_i|| / max(1, ||A||)
};

inline SvdResult svd(const Eigen::MatrixXcd& a) {
    if (!a.allFinite()) throw NumericError("svd: input has non-finite entries");
    Eigen::JacobiSVD<Eigen::MatrixXcd> dec(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (dec.info() != Eigen::Success)
        throw NumericError("svd: Jacobi iteration did not converge");
    SvdResult r;
    r.singular_values = dec.singularValues();
    r.left_basis = dec.matrixU();
    r.right_basis = dec.matrixV();
    const Eigen::Index k = r.singular_values.size();
    double worst = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        worst = std::max(worst, (a * r.right_basis.col(i) -
                                 r.singular_values(i) * r.left_basis.col(i))
                                    .norm());
    }
    const double scale = k > 0 ? std::max(1.0, r.singular_values(0)) : 1.0;
    r.backend_residual = worst / scale;
    return r;
}

// Smallest singular value of a tall or square matrix.
inline double s_min(const Eigen::MatrixXcd& a) {
    if (a.rows() < a.cols()) throw ShapeError("s_min: matrix must be tall or square");
    if (a.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> dec(a);
    return dec.singularValues()(a.cols() - 1);
}

// Largest singular value, computed through the Hermitian eigenproblem of A*A.
inline double operator_norm(const Eigen::MatrixXcd& a) {
    if (a.size() == 0) return 0.0;
    // Work with the smaller Gram matrix of the two.
    Eigen::MatrixXcd gram;
    if (a.rows() >= a.cols())
        gram = a.adjoint() * a;
    else
        gram = a * a.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("operator_norm: eigensolver failed");
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

inline double operator_norm(const Eigen::MatrixXd& a) {
    return operator_norm(Eigen::MatrixXcd(a.cast<Complex>()));
}

// ---------------------------------------------------------------------------
// Eigenpairs
// ---------------------------------------------------------------------------

struct EigenResult {
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd eigenvectors;        // unit columns
    Eigen::VectorXd residuals;            // ||A v - lambda v|| per pair
    std::vector<bool> defective;          // pair belongs to a numerically defective cluster
    double norm = 0.0;                    // ||A||, the residual scale
};

// Schur-based dense eigensolver with residual certification. For clusters of
// nearly equal eigenvalues whose computed vectors are dependent, the pairs are
// flagged; vectors with residual above tol*||A|| are replaced by the smallest
// right singular vector of A - lambda I (the residual minimizer over the unit
// sphere).
inline EigenResult eigenpairs(const Eigen::MatrixXcd& a, double tol = 1e-10) {
    if (a.rows() != a.cols()) throw ShapeError("eigenpairs: matrix must be square");
    if (!(tol > 0.0)) throw ParameterError("eigenpairs: tol must be > 0");
    const Eigen::Index n = a.rows();

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a, /*computeEigenvectors=*/true);
    if (es.info() != Eigen::Success)
        throw NumericError("eigenpairs: QR iteration did not converge");

    EigenResult r;
    r.eigenvalues = es.eigenvalues();
    r.eigenvectors = es.eigenvectors();
    r.norm = operator_norm(a);
    r.residuals.resize(n);
    r.defective.assign(static_cast<std::size_t>(n), false);
    const double scale = std::max(1.0, r.norm);

    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXcd v = r.eigenvectors.col(i);
        const double vn = v.norm();
        if (vn > 0) v /= vn;
        double res = (a * v - r.eigenvalues(i) * v).norm();
        if (res > tol * scale) {
            // Residual-minimizing unit vector for this eigenvalue.
            Eigen::MatrixXcd shifted = a;
            shifted.diagonal().array() -= r.eigenvalues(i);
            Eigen::JacobiSVD<Eigen::MatrixXcd> dec(shifted, Eigen::ComputeFullV);
            const Eigen::VectorXcd candidate = dec.matrixV().col(n - 1);
            const double cres = (a * candidate - r.eigenvalues(i) * candidate).norm();
            if (cres < res) {
                v = candidate;
                res = cres;
            }
        }
        r.eigenvectors.col(i) = v;
        r.residuals(i) = res;
    }

    // Defectiveness: eigenvalue clusters whose eigenvector block is rank
    // deficient. Sort by eigenvalue and sweep groups within the cluster gap.
    const double gap = std::max(tol, 1e-12) * scale;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        const Complex &ex = r.eigenvalues(x), &ey = r.eigenvalues(y);
        if (ex.real() != ey.real()) return ex.real() < ey.real();
        return ex.imag() < ey.imag();
    });
    std::size_t start = 0;
    while (start < order.size()) {
        std::size_t end = start + 1;
        while (end < order.size() &&
               std::abs(r.eigenvalues(order[end]) - r.eigenvalues(order[end - 1])) <= gap) {
            ++end;
        }
        const std::size_t g = end - start;
        if (g >= 2) {
            Eigen::MatrixXcd block(n, static_cast<Eigen::Index>(g));
            for (std::size_t k = 0; k < g; ++k) block.col(static_cast<Eigen::Index>(k)) = r.eigenvectors.col(order[start + k]);
            Eigen::JacobiSVD<Eigen::MatrixXcd> dec(block);
            const auto& sv = dec.singularValues();
            const double rank_cut = static_cast<double>(n) * 1e-12 * sv(0);
            Eigen::Index rank = 0;
            for (Eigen::Index k = 0; k < sv.size(); ++k)
                if (sv(k) > rank_cut) ++rank;
            if (rank < static_cast<Eigen::Index>(g)) {
                for (std::size_t k = 0; k < g; ++k) r.defective[static_cast<std::size_t>(order[start + k])] = true;
            }
        }
        start = end;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Distances, kernels
// ---------------------------------------------------------------------------

// Euclidean distance from z to the column span of h (SVD-based projector, so
// rank-deficient h is handled).
inline double dist_to_colspan(const Eigen::VectorXcd& z, const Eigen::MatrixXcd& h) {
    if (h.cols() == 0) return z.norm();
    if (z.size() != h.rows()) throw ShapeError("dist_to_colspan: dimension mismatch");
    Eigen::JacobiSVD<Eigen::MatrixXcd> dec(h, Eigen::ComputeThinU);
    const auto& sv = dec.singularValues();
    const double cut = sv.size() > 0 ? default_rank_tol(h.rows(), h.cols()) * sv(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++rank;
    if (rank == 0) return z.norm();
    const auto basis = dec.matrixU().leftCols(rank);
    return (z - basis * (basis.adjoint() * z)).norm();
}

// Orthonormal basis of the (numerical) kernel: right singular vectors with
// singular value <= rank_tol * s1.
inline Eigen::MatrixXcd kernel_basis(const Eigen::MatrixXcd& b, double rank_tol) {
    if (!(rank_tol > 0.0)) throw ParameterError("kernel_basis: rank_tol must be > 0");
    Eigen::JacobiSVD<Eigen::MatrixXcd> dec(b, Eigen::ComputeFullV);
    const auto& sv = dec.singularValues();
    const double s1 = sv.size() > 0 ? sv(0) : 0.0;
    const double cut = rank_tol * s1;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < b.cols(); ++i) {
        // Singular values past min(rows, cols) are implicit zeros.
        const double s = i < sv.size() ? sv(i) : 0.0;
        if (s <= cut || s1 == 0.0) keep.push_back(i);
    }
    Eigen::MatrixXcd basis(b.cols(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = dec.matrixV().col(keep[k]);
    return basis;
}

inline Eigen::MatrixXcd kernel_basis(const Eigen::MatrixXcd& b) {
    return kernel_basis(b, default_rank_tol(b.rows(), b.cols()));
}

// ---------------------------------------------------------------------------
// Realification: z = x + iy -> (x; y), B = R + iT -> [[R, -T], [T, R]].
// These maps are isometric and preserve matrix-vector products.
// ---------------------------------------------------------------------------

inline Eigen::VectorXd realify_vector(const Eigen::VectorXcd& z) {
    Eigen::VectorXd out(2 * z.size());
    out.head(z.size()) = z.real();
    out.tail(z.size()) = z.imag();
    return out;
}

inline Eigen::MatrixXd realify_matrix(const Eigen::MatrixXcd& b) {
    const Eigen::Index m = b.rows(), n = b.cols();
    Eigen::MatrixXd out(2 * m, 2 * n);
    out.topLeftCorner(m, n) = b.real();
    out.topRightCorner(m, n) = -b.imag();
    out.bottomLeftCorner(m, n) = b.imag();
    out.bottomRightCorner(m, n) = b.real();
    return out;
}

// Real basis of the realified span of a complex orthonormal basis: columns
// realify(v_j) and realify(i v_j). Orthonormality carries over since
// <realify(a), realify(b)> = Re<a, b>.
inline Eigen::MatrixXd realify_subspace_basis(const Eigen::MatrixXcd& basis) {
    Eigen::MatrixXd out(2 * basis.rows(), 2 * basis.cols());
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
        out.col(2 * j) = realify_vector(basis.col(j));
        out.col(2 * j + 1) = realify_vector(Complex(0, 1) * basis.col(j));
    }
    return out;
}

}  // namespace deloclab
