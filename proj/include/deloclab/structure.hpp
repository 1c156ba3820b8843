#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "deloclab/errors.hpp"
#include "deloclab/rng.hpp"

namespace deloclab {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Small generic helpers
// ---------------------------------------------------------------------------

inline double log_plus(double x) { return x > 1.0 ? std::log(x) : 0.0; }

inline double dist_to_lattice(const Eigen::VectorXd& x) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double f = x(i) - std::round(x(i));
        acc += f * f;
    }
    return std::sqrt(acc);
}

inline double binomial_coeff(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double out = 1.0;
    for (std::int64_t i = 1; i <= k; ++i)
        out *= static_cast<double>(n - k + i) / static_cast<double>(i);
    return out;
}

// Visits all k-subsets of {0,...,n-1} in lexicographic order.
inline void for_each_combination(std::size_t n, std::size_t k,
                                 const std::function<void(const std::vector<std::size_t>&)>& fn) {
    if (k > n) return;
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    while (true) {
        fn(idx);
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == n - k + (i - 1)) --i;
        if (i == 0) break;
        ++idx[i - 1];
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
}

// ---------------------------------------------------------------------------
// Small-coordinate set: indices of all except the floor(delta*N) largest
// moduli. Ties place lower indices in the large set first, so the result is
// deterministic.
// ---------------------------------------------------------------------------

inline std::vector<Eigen::Index> sm_set(const Eigen::VectorXcd& z, double delta) {
    const Eigen::Index n = z.size();
    const auto k = static_cast<Eigen::Index>(std::floor(delta * static_cast<double>(n)));
    if (!(delta > 0.0 && delta < 1.0) || k < 1 || k >= n)
        throw ParameterError("sm_set: floor(delta*N) must be in [1, N-1]");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double ma = std::abs(z(a)), mb = std::abs(z(b));
        if (ma != mb) return ma > mb;
        return a < b;
    });
    std::vector<Eigen::Index> small(order.begin() + k, order.end());
    std::sort(small.begin(), small.end());
    return small;
}

// ---------------------------------------------------------------------------
// Least common denominator searches
// ---------------------------------------------------------------------------

enum class LcdKind { vector, matrix2, subspace_upper };

struct LcdEstimate {
    double value = 0.0;
    Eigen::VectorXd witness;        // theta: length 1 (vector/subspace) or 2 (matrix)
    double witness_residual = 0.0;  // dist(V^T theta, Z^N) at the witness
    double grid_step = 0.0;
    LcdKind kind = LcdKind::vector;
    bool censored = false;          // no admissible theta found up to the cap
};

inline double default_lcd_cap(Eigen::Index dim) {
    return 16.0 * std::sqrt(static_cast<double>(dim));
}

// Standard choices of the slack scale L. Which preset applies is a per-driver
// decision: sums take lcd_scale_sum, the two-row matrix bound takes
// lcd_scale_matrix2, kernel experiments take lcd_scale_kernel.
inline double lcd_scale_sum(double p) { return std::sqrt(8.0 / p); }
inline double lcd_scale_matrix2(double p) { return 4.0 / std::sqrt(p); }
inline double lcd_scale_projection(int m, double p) { return std::sqrt(8.0 * m / p); }
inline double lcd_scale_kernel(double eps_n) { return std::sqrt(eps_n); }

namespace detail {

// The defining condition dist(theta*v, Z^N) < L*sqrt(log+ ||theta*v|| / L).
inline bool lcd_condition(const Eigen::VectorXd& v, double theta, double L, double* residual) {
    const Eigen::VectorXd scaled = theta * v;
    const double d = dist_to_lattice(scaled);
    if (residual) *residual = d;
    return d < L * std::sqrt(log_plus(scaled.norm() / L));
}

}  // namespace detail

// 1-D grid search for the smallest admissible multiplier, refined by local
// bisection down to grid_step/1000. Admissible points are at or above the true
// infimum, so the returned value is a certified locator of the definition's
// infimum up to the grid resolution.
inline LcdEstimate lcd_vector(const Eigen::VectorXd& v, double L, double search_cap,
                              double grid_step) {
    if (v.norm() == 0.0) throw ParameterError("lcd_vector: v must be nonzero");
    if (!(L > 0.0)) throw ParameterError("lcd_vector: L must be > 0");
    if (!(search_cap > 0.0)) throw ParameterError("lcd_vector: search_cap must be > 0");
    if (!(grid_step > 0.0)) throw ParameterError("lcd_vector: grid_step must be > 0");

    LcdEstimate est;
    est.kind = LcdKind::vector;
    est.grid_step = grid_step;

    double hit = -1.0;
    for (double theta = grid_step; theta <= search_cap + 1e-15; theta += grid_step) {
        if (detail::lcd_condition(v, theta, L, nullptr)) {
            hit = theta;
            break;
        }
    }
    if (hit < 0.0) {
        est.value = search_cap;
        est.censored = true;
        est.witness = Eigen::VectorXd::Constant(1, search_cap);
        detail::lcd_condition(v, search_cap, L, &est.witness_residual);
        return est;
    }
    double lo = std::max(0.0, hit - grid_step), mid = hit;
    while (mid - lo > grid_step / 1000.0) {
        const double m = 0.5 * (lo + mid);
        if (detail::lcd_condition(v, m, L, nullptr))
            mid = m;
        else
            lo = m;
    }
    est.value = mid;
    est.witness = Eigen::VectorXd::Constant(1, mid);
    detail::lcd_condition(v, mid, L, &est.witness_residual);
    return est;
}

inline LcdEstimate lcd_vector(const Eigen::VectorXd& v, double L) {
    const double cap = default_lcd_cap(v.size());
    return lcd_vector(v, L, cap, 1e-3 * cap);
}

// Polar grid over R^2: radii ascending so the first admissible radius gives
// the minimal norm on the grid; angular step keeps arc length <= grid_step.
inline LcdEstimate lcd_matrix2(const Eigen::Matrix2Xd& v, double L, double search_cap,
                               double grid_step) {
    if (v.norm() == 0.0) throw ParameterError("lcd_matrix2: V must be nonzero");
    if (!(L > 0.0)) throw ParameterError("lcd_matrix2: L must be > 0");
    if (!(search_cap > 0.0) || !(grid_step > 0.0))
        throw ParameterError("lcd_matrix2: cap and grid_step must be > 0");

    LcdEstimate est;
    est.kind = LcdKind::matrix2;
    est.grid_step = grid_step;

    const Eigen::MatrixXd vt = v.transpose();
    const auto condition = [&](const Eigen::Vector2d& theta, double* residual) {
        const Eigen::VectorXd image = vt * theta;
        const double d = dist_to_lattice(image);
        if (residual) *residual = d;
        return d < L * std::sqrt(log_plus(image.norm() / L));
    };

    for (double r = grid_step; r <= search_cap + 1e-15; r += grid_step) {
        const auto steps = std::max<std::int64_t>(
            8, static_cast<std::int64_t>(std::ceil(2.0 * M_PI * r / grid_step)));
        for (std::int64_t s = 0; s < steps; ++s) {
            const double phi = 2.0 * M_PI * static_cast<double>(s) / static_cast<double>(steps);
            const Eigen::Vector2d theta(r * std::cos(phi), r * std::sin(phi));
            double residual = 0.0;
            if (condition(theta, &residual)) {
                est.value = r;
                est.witness = theta;
                est.witness_residual = residual;
                return est;
            }
        }
    }
    est.value = search_cap;
    est.censored = true;
    est.witness = Eigen::Vector2d(search_cap, 0.0);
    condition(Eigen::Vector2d(search_cap, 0.0), &est.witness_residual);
    return est;
}

inline LcdEstimate lcd_matrix2(const Eigen::Matrix2Xd& v, double L) {
    const double cap = default_lcd_cap(v.cols());
    return lcd_matrix2(v, L, cap, 1e-2 * cap);
}

// 1/(2 * max column norm). Vectors count as single-row matrices, so either
// orientation of a vector reduces to 1/(2 ||v||_inf).
inline double lcd_lower_bound(const Eigen::MatrixXd& v) {
    double worst = 0.0;
    if (v.rows() == 1 || v.cols() == 1) {
        worst = v.cwiseAbs().maxCoeff();
    } else {
        for (Eigen::Index j = 0; j < v.cols(); ++j) worst = std::max(worst, v.col(j).norm());
    }
    if (worst == 0.0) throw ParameterError("lcd_lower_bound: zero input");
    return 1.0 / (2.0 * worst);
}

// Upper estimate of the subspace LCD inf{D(v,L): v unit in E}: deterministic
// starts at the basis directions plus random multistarts, each refined by
// coordinate descent on the coefficient sphere. One-sided by construction.
inline LcdEstimate lcd_subspace_upper(const Eigen::MatrixXd& basis, double L,
                                      std::int64_t n_starts, std::uint64_t seed,
                                      double search_cap = -1.0, double grid_step = -1.0) {
    if (basis.cols() == 0) throw ParameterError("lcd_subspace_upper: empty basis");
    if ((basis.transpose() * basis - Eigen::MatrixXd::Identity(basis.cols(), basis.cols()))
            .cwiseAbs()
            .maxCoeff() > 1e-10)
        throw ParameterError("lcd_subspace_upper: basis must be orthonormal");
    if (n_starts < 1) throw ParameterError("lcd_subspace_upper: n_starts must be >= 1");
    if (search_cap <= 0.0) search_cap = default_lcd_cap(basis.rows());
    if (grid_step <= 0.0) grid_step = 1e-3 * search_cap;

    const Eigen::Index dim = basis.cols();

    const auto evaluate = [&](const Eigen::VectorXd& coeff) {
        return lcd_vector(basis * coeff, L, search_cap, grid_step);
    };

    LcdEstimate best;
    best.kind = LcdKind::subspace_upper;
    best.value = search_cap;
    best.censored = true;
    best.grid_step = grid_step;
    best.witness = Eigen::VectorXd::Constant(1, search_cap);

    const auto consider = [&](const LcdEstimate& cand) {
        if (cand.censored) return;
        if (best.censored || cand.value < best.value) {
            best = cand;
            best.kind = LcdKind::subspace_upper;
        }
    };

    // Deterministic starts at the basis directions, then random multistarts on
    // per-start substreams (the min-reduction is order independent).
    const std::int64_t total_starts = n_starts + dim;
    for (std::int64_t s = 0; s < total_starts; ++s) {
        Eigen::VectorXd coeff(dim);
        if (s < dim) {
            coeff.setZero();
            coeff(s) = 1.0;
        } else {
            Rng rng(derive_stream_seed(seed, static_cast<std::uint64_t>(s)));
            for (Eigen::Index i = 0; i < dim; ++i) coeff(i) = rng.gaussian();
            if (coeff.norm() == 0.0) coeff(0) = 1.0;
            coeff.normalize();
        }

        LcdEstimate current = evaluate(coeff);
        // Coordinate descent with a shrinking step; censored evaluations rank
        // as the cap value.
        const auto score = [](const LcdEstimate& e) { return e.censored ? e.value * 2.0 : e.value; };
        double step = 0.5;
        while (step > 1e-3) {
            bool improved = false;
            for (Eigen::Index axis = 0; axis < dim; ++axis) {
                for (const double dir : {1.0, -1.0}) {
                    Eigen::VectorXd trial = coeff;
                    trial(axis) += dir * step;
                    trial.normalize();
                    const LcdEstimate e = evaluate(trial);
                    if (score(e) < score(current)) {
                        current = e;
                        coeff = trial;
                        improved = true;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        consider(current);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Real-imaginary correlation d(z): maximal 2x2 Gram determinant root over
// subsets of the small-coordinate set.
// ---------------------------------------------------------------------------

enum class CorrelationMode { exact, greedy };

struct CorrelationResult {
    double d_value = 0.0;
    std::vector<Eigen::Index> witness_subset;
    CorrelationMode method = CorrelationMode::exact;
    std::vector<Eigen::Index> small_set;
};

namespace detail {

inline double gram_det(const Eigen::Matrix2d& g) {
    return g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
}

inline Eigen::Matrix2d gram_of_subset(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                      const std::vector<Eigen::Index>& subset) {
    double xx = 0.0, xy = 0.0, yy = 0.0;
    for (const Eigen::Index j : subset) {
        xx += x(j) * x(j);
        xy += x(j) * y(j);
        yy += y(j) * y(j);
    }
    Eigen::Matrix2d g;
    g << xx, xy, xy, yy;
    return g;
}

}  // namespace detail

inline CorrelationResult rc_correlation(const Eigen::VectorXcd& z, double delta,
                                        CorrelationMode mode) {
    const Eigen::Index n = z.size();
    const auto k = static_cast<Eigen::Index>(std::floor(delta * static_cast<double>(n)));
    if (k < 2) throw ParameterError("rc_correlation: floor(delta*N) must be >= 2");

    CorrelationResult result;
    result.method = mode;
    result.small_set = sm_set(z, delta);
    const Eigen::VectorXd x = z.real(), y = z.imag();
    const auto& sm = result.small_set;

    if (mode == CorrelationMode::exact) {
        const double count = binomial_coeff(static_cast<std::int64_t>(sm.size()), k);
        if (count > 1e6)
            throw BudgetError("rc_correlation: exact enumeration budget exceeded; use greedy");
        double best = -1.0;
        std::vector<Eigen::Index> subset(static_cast<std::size_t>(k));
        for_each_combination(sm.size(), static_cast<std::size_t>(k),
                             [&](const std::vector<std::size_t>& pick) {
                                 for (std::size_t i = 0; i < pick.size(); ++i) subset[i] = sm[pick[i]];
                                 const double det =
                                     detail::gram_det(detail::gram_of_subset(x, y, subset));
                                 if (det > best) {
                                     best = det;
                                     result.witness_subset = subset;
                                 }
                             });
        result.d_value = std::sqrt(std::max(0.0, best));
        return result;
    }

    // Greedy determinant growth: best pair first, then the column with the
    // largest rank-one update c^T G^{-1} c (matrix determinant lemma).
    if (static_cast<Eigen::Index>(sm.size()) < k)
        throw ParameterError("rc_correlation: small set smaller than floor(delta*N)");
    std::vector<Eigen::Index> chosen;
    std::vector<bool> used(sm.size(), false);
    double best_pair = -1.0;
    std::size_t pa = 0, pb = 1;
    for (std::size_t a = 0; a < sm.size(); ++a) {
        for (std::size_t b = a + 1; b < sm.size(); ++b) {
            const double det = detail::gram_det(
                detail::gram_of_subset(x, y, {sm[a], sm[b]}));
            if (det > best_pair) {
                best_pair = det;
                pa = a;
                pb = b;
            }
        }
    }
    chosen = {sm[pa], sm[pb]};
    used[pa] = used[pb] = true;
    while (static_cast<Eigen::Index>(chosen.size()) < k) {
        Eigen::Matrix2d g = detail::gram_of_subset(x, y, chosen);
        double best_gain = -1.0;
        std::size_t best_idx = 0;
        for (std::size_t c = 0; c < sm.size(); ++c) {
            if (used[c]) continue;
            const Eigen::Vector2d col(x(sm[c]), y(sm[c]));
            const double det = detail::gram_det(Eigen::Matrix2d(g + col * col.transpose()));
            if (det > best_gain) {
                best_gain = det;
                best_idx = c;
            }
        }
        used[best_idx] = true;
        chosen.push_back(sm[best_idx]);
    }
    std::sort(chosen.begin(), chosen.end());
    result.witness_subset = chosen;
    result.d_value =
        std::sqrt(std::max(0.0, detail::gram_det(detail::gram_of_subset(x, y, chosen))));
    return result;
}

// ---------------------------------------------------------------------------
// Compressibility: distance from a unit vector to the set of floor(c0*N)-sparse
// vectors (attained by truncation to the largest moduli).
// ---------------------------------------------------------------------------

enum class CompressClass { compressible, incompressible };

struct CompressResult {
    CompressClass cls = CompressClass::incompressible;
    double dist_to_sparse = 0.0;
};

inline CompressResult compress_class(const Eigen::VectorXcd& z, double c0, double c1) {
    if (std::abs(z.norm() - 1.0) > 1e-10)
        throw NormalizationError("compress_class: z must be a unit vector");
    if (!(c0 > 0.0 && c0 < 1.0 && c1 > 0.0 && c1 < 1.0))
        throw ParameterError("compress_class: c0, c1 must be in (0,1)");
    const Eigen::Index n = z.size();
    const auto keep = static_cast<Eigen::Index>(std::floor(c0 * static_cast<double>(n)));
    std::vector<double> mods(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) mods[static_cast<std::size_t>(i)] = std::norm(z(i));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    double tail = 0.0;
    for (Eigen::Index i = keep; i < n; ++i) tail += mods[static_cast<std::size_t>(i)];
    CompressResult r;
    r.dist_to_sparse = std::sqrt(std::max(0.0, tail));
    r.cls = r.dist_to_sparse <= c1 ? CompressClass::compressible : CompressClass::incompressible;
    return r;
}

// ---------------------------------------------------------------------------
// Exact inequality behind the correlation bound, by Cauchy-Binet double
// counting over |I| = N0 small coordinates:
//   C(N0, k) * d(z)^2 >= C(N0-2, k-2) * det(V_I V_I^T),  k = floor(delta*N).
// ---------------------------------------------------------------------------

struct CauchyBinetAudit {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

inline CauchyBinetAudit cauchy_binet_audit(const Eigen::VectorXcd& z, double delta) {
    const CorrelationResult corr = rc_correlation(z, delta, CorrelationMode::exact);
    const auto n0 = static_cast<std::int64_t>(corr.small_set.size());
    const auto k = static_cast<std::int64_t>(
        std::floor(delta * static_cast<double>(z.size())));
    const Eigen::VectorXd x = z.real(), y = z.imag();
    const double det_full =
        detail::gram_det(detail::gram_of_subset(x, y, corr.small_set));

    CauchyBinetAudit audit;
    audit.lhs = binomial_coeff(n0, k) * corr.d_value * corr.d_value;
    audit.rhs = binomial_coeff(n0 - 2, k - 2) * det_full;
    audit.holds = audit.lhs >= audit.rhs * (1.0 - 1e-9) - 1e-12;
    return audit;
}

}  // namespace deloclab
