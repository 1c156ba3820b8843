// Shared test oracles. Everything here recomputes expected values from first
// principles (definitions, brute force, closed forms) independently of the
// library implementation paths it is used to check.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "deloclab/rng.hpp"

namespace oracle {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Visits all k-subsets of {0..n-1}.
inline void each_subset(std::size_t n, std::size_t k,
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

// min over |I| = k of ||v_I||_2 by full enumeration.
inline double min_subset_mass(const Eigen::VectorXcd& v, std::size_t k) {
    double best = std::numeric_limits<double>::infinity();
    each_subset(static_cast<std::size_t>(v.size()), k, [&](const std::vector<std::size_t>& idx) {
        double acc = 0.0;
        for (const std::size_t j : idx) acc += std::norm(v(static_cast<Eigen::Index>(j)));
        best = std::min(best, std::sqrt(acc));
    });
    return best;
}

// Distance from a unit z to the nearest vector supported on k coordinates,
// minimized over all supports.
inline double min_sparse_dist(const Eigen::VectorXcd& z, std::size_t k) {
    const auto n = static_cast<std::size_t>(z.size());
    if (k >= n) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    each_subset(n, k, [&](const std::vector<std::size_t>& support) {
        double off = 0.0;
        std::vector<bool> keep(n, false);
        for (const std::size_t j : support) keep[j] = true;
        for (std::size_t j = 0; j < n; ++j)
            if (!keep[j]) off += std::norm(z(static_cast<Eigen::Index>(j)));
        best = std::min(best, std::sqrt(off));
    });
    return best;
}

// Dense 1-D scan for the smallest admissible LCD multiplier, straight from the
// definition; fine_step bounds the resolution.
inline double lcd_scan_1d(const Eigen::VectorXd& v, double L, double cap, double fine_step) {
    for (double theta = fine_step; theta <= cap; theta += fine_step) {
        const Eigen::VectorXd scaled = theta * v;
        double dist_sq = 0.0;
        for (Eigen::Index i = 0; i < scaled.size(); ++i) {
            const double f = scaled(i) - std::round(scaled(i));
            dist_sq += f * f;
        }
        const double ratio = scaled.norm() / L;
        const double slack = L * std::sqrt(ratio > 1.0 ? std::log(ratio) : 0.0);
        if (std::sqrt(dist_sq) < slack) return theta;
    }
    return cap;
}

// Dense polar scan for the 2-row matrix LCD.
inline double lcd_scan_2d(const Eigen::Matrix2Xd& v, double L, double cap, double fine_step) {
    const Eigen::MatrixXd vt = v.transpose();
    for (double r = fine_step; r <= cap; r += fine_step) {
        const int steps = std::max(16, static_cast<int>(std::ceil(2.0 * M_PI * r / fine_step)));
        for (int s = 0; s < steps; ++s) {
            const double phi = 2.0 * M_PI * s / steps;
            const Eigen::VectorXd image = vt * Eigen::Vector2d(r * std::cos(phi), r * std::sin(phi));
            double dist_sq = 0.0;
            for (Eigen::Index i = 0; i < image.size(); ++i) {
                const double f = image(i) - std::round(image(i));
                dist_sq += f * f;
            }
            const double ratio = image.norm() / L;
            const double slack = L * std::sqrt(ratio > 1.0 ? std::log(ratio) : 0.0);
            if (std::sqrt(dist_sq) < slack) return r;
        }
    }
    return cap;
}

// ---------------------------------------------------------------------------
// Exact concentration of a finite law in R^d: sup over centers u of the mass
// within a closed ball of radius r. An optimal center can be taken as the
// circumcenter of an affinely independent subset of covered atoms (<= d+1
// points), so enumerating those subsets is exact.
// ---------------------------------------------------------------------------

struct WeightedPoint {
    Eigen::VectorXd x;
    double p = 0.0;
};

inline bool circumcenter(const std::vector<const Eigen::VectorXd*>& pts, Eigen::VectorXd* out) {
    const std::size_t k = pts.size();
    if (k == 1) {
        *out = *pts[0];
        return true;
    }
    // Equidistance c to all points, with c = p_0 + sum coeff_j (p_j - p_0),
    // reduces to (d_i . d_j) coeff = ||d_i||^2 / 2 over the difference vectors.
    Eigen::MatrixXd a(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k - 1));
    Eigen::VectorXd b(static_cast<Eigen::Index>(k - 1));
    for (std::size_t i = 1; i < k; ++i) {
        const Eigen::VectorXd di = *pts[i] - *pts[0];
        b(static_cast<Eigen::Index>(i - 1)) = 0.5 * di.squaredNorm();
        for (std::size_t j = 1; j < k; ++j)
            a(static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1)) =
                di.dot(*pts[j] - *pts[0]);
    }
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd coeff = lu.solve(b);
    Eigen::VectorXd c = *pts[0];
    for (std::size_t j = 1; j < k; ++j) c += coeff(static_cast<Eigen::Index>(j - 1)) * (*pts[j] - *pts[0]);
    *out = c;
    return true;
}

inline double ball_concentration_exact(const std::vector<WeightedPoint>& atoms, double r) {
    if (atoms.empty()) return 0.0;
    const auto d = static_cast<std::size_t>(atoms[0].x.size());
    const double r_slack = r * (1.0 + 1e-12) + 1e-12;
    double best = 0.0;
    const auto consider = [&](const Eigen::VectorXd& center) {
        double mass = 0.0;
        for (const auto& a : atoms)
            if ((a.x - center).norm() <= r_slack) mass += a.p;
        best = std::max(best, mass);
    };
    for (std::size_t k = 1; k <= d + 1 && k <= atoms.size(); ++k) {
        each_subset(atoms.size(), k, [&](const std::vector<std::size_t>& idx) {
            std::vector<const Eigen::VectorXd*> pts;
            pts.reserve(k);
            for (const std::size_t i : idx) pts.push_back(&atoms[i].x);
            Eigen::VectorXd center;
            if (circumcenter(pts, &center)) consider(center);
        });
    }
    return best;
}

// Product law of independent per-coordinate finite laws.
inline std::vector<WeightedPoint> product_law(
    const std::vector<std::vector<std::pair<double, double>>>& coords) {
    std::vector<WeightedPoint> out{{Eigen::VectorXd(0), 1.0}};
    for (const auto& coord : coords) {
        std::vector<WeightedPoint> next;
        next.reserve(out.size() * coord.size());
        for (const auto& base : out) {
            for (const auto& [v, p] : coord) {
                WeightedPoint w;
                w.x.resize(base.x.size() + 1);
                w.x.head(base.x.size()) = base.x;
                w.x(base.x.size()) = v;
                w.p = base.p * p;
                next.push_back(std::move(w));
            }
        }
        out = std::move(next);
    }
    return out;
}

// Wilson interval endpoints by scanning the defining inequality
// |phat - p| <= z sqrt(p(1-p)/n) over a fine p grid.
inline std::pair<double, double> wilson_scan(std::int64_t successes, std::int64_t n,
                                             double z = 1.959963984540054) {
    const double phat = static_cast<double>(successes) / static_cast<double>(n);
    double lo = 1.0, hi = 0.0;
    const double step = 1e-6;
    for (double p = 0.0; p <= 1.0 + 1e-12; p += step) {
        const double margin = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
        if (std::abs(phat - p) <= margin) {
            lo = std::min(lo, p);
            hi = std::max(hi, p);
        }
    }
    return {lo, hi};
}

inline Eigen::VectorXcd random_unit_complex(deloclab::Rng& rng, Eigen::Index n) {
    Eigen::VectorXcd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = std::complex<double>(rng.gaussian(), rng.gaussian());
    z.normalize();
    return z;
}

inline Eigen::MatrixXcd random_complex_matrix(deloclab::Rng& rng, Eigen::Index rows,
                                              Eigen::Index cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = std::complex<double>(rng.gaussian(), rng.gaussian());
    return m;
}

}  // namespace oracle
