#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "deloclab/ensemble.hpp"
#include "deloclab/errors.hpp"
#include "deloclab/linalg.hpp"
#include "deloclab/parallel.hpp"
#include "deloclab/records.hpp"
#include "deloclab/rng.hpp"
#include "deloclab/structure.hpp"

namespace deloclab {

// ---------------------------------------------------------------------------
// Localization functionals
// ---------------------------------------------------------------------------

// l2 mass of the ceil(eps*n) smallest-modulus coordinates of a unit vector.
// This equals min over |I| >= ceil(eps*n) of ||v_I||: the minimizer is the set
// of smallest coordinates, and enlarging I only adds mass.
inline double localization_norm(const Eigen::VectorXcd& v, double eps) {
    if (std::abs(v.norm() - 1.0) > 1e-10)
        throw NormalizationError("localization_norm: v must be a unit vector");
    const Eigen::Index n = v.size();
    const auto k = static_cast<Eigen::Index>(std::ceil(eps * static_cast<double>(n)));
    if (k < 1 || k > n) throw ParameterError("localization_norm: ceil(eps*n) must be in [1, n]");
    std::vector<double> sq(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) sq[static_cast<std::size_t>(i)] = std::norm(v(i));
    std::sort(sq.begin(), sq.end());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) acc += sq[static_cast<std::size_t>(i)];
    return std::sqrt(acc);
}

// Indices of the k smallest-modulus coordinates (ties by lower index).
inline std::vector<Eigen::Index> smallest_coordinate_set(const Eigen::VectorXcd& v,
                                                         Eigen::Index k) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double ma = std::abs(v(a)), mb = std::abs(v(b));
        if (ma != mb) return ma < mb;
        return a < b;
    });
    std::vector<Eigen::Index> out(order.begin(), order.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
}

struct DelocReport {
    Eigen::Index eigen_index = 0;
    Complex eigenvalue;
    std::vector<std::pair<double, double>> localization_curve;  // (eps, min_mass)
    double sup_norm = 0.0;
    double residual = 0.0;
};

inline std::vector<DelocReport> deloc_reports(const Eigen::MatrixXcd& a,
                                              const std::vector<double>& eps_grid,
                                              double tol = 1e-8) {
    const EigenResult eig = eigenpairs(a, tol);
    std::vector<DelocReport> reports;
    reports.reserve(static_cast<std::size_t>(a.rows()));
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        DelocReport rep;
        rep.eigen_index = i;
        rep.eigenvalue = eig.eigenvalues(i);
        rep.sup_norm = eig.eigenvectors.col(i).cwiseAbs().maxCoeff();
        rep.residual = eig.residuals(i);
        for (const double eps : eps_grid)
            rep.localization_curve.emplace_back(eps,
                                                localization_norm(eig.eigenvectors.col(i), eps));
        reports.push_back(std::move(rep));
    }
    return reports;
}

// Loc(A, eps, delta): some eigenvector carries less than delta mass on a
// size-ceil(eps*n) coordinate set. Strict inequality, so delta = 0 never fires.
inline bool loc_event(const std::vector<DelocReport>& reports, double eps, double delta) {
    if (reports.empty()) throw ParameterError("loc_event: empty report list");
    for (const auto& rep : reports) {
        bool found = false;
        for (const auto& [e, mass] : rep.localization_curve) {
            if (std::abs(e - eps) <= 1e-12) {
                found = true;
                if (mass < delta) return true;
            }
        }
        if (!found) throw ParameterError("loc_event: eps not present on the report grid");
    }
    return false;
}

// ---------------------------------------------------------------------------
// Hexagonal net of the disc of radius M*sqrt(n) with covering radius
// 2*M*delta*sqrt(n) and cardinality at most ceil(5/delta^2).
// ---------------------------------------------------------------------------

struct DiscNet {
    std::vector<Complex> centers;
    double mesh = 0.0;  // covering radius
    std::int64_t cardinality = 0;
    double M = 0.0;
    double delta = 0.0;
    Eigen::Index n = 0;
};

inline DiscNet disc_net(double M, Eigen::Index n, double delta) {
    if (!(delta > 0.0 && delta <= 1.0)) throw ParameterError("disc_net: delta must be in (0,1]");
    if (!(M >= 1.0)) throw ParameterError("disc_net: M must be >= 1");
    if (n < 1) throw ParameterError("disc_net: n must be >= 1");

    DiscNet net;
    net.M = M;
    net.delta = delta;
    net.n = n;
    const double radius = M * std::sqrt(static_cast<double>(n));
    net.mesh = 2.0 * M * delta * std::sqrt(static_cast<double>(n));

    if (net.mesh >= radius) {
        net.centers = {Complex(0.0, 0.0)};
        net.cardinality = 1;
        return net;
    }

    // Hexagonal lattice with spacing s has covering radius s/sqrt(3).
    const double spacing = std::sqrt(3.0) * net.mesh;
    const double reach = radius + net.mesh;
    const auto max_j = static_cast<std::int64_t>(std::floor(reach / (spacing * std::sqrt(3.0) / 2.0))) + 1;
    for (std::int64_t j = -max_j; j <= max_j; ++j) {
        const double y = static_cast<double>(j) * spacing * std::sqrt(3.0) / 2.0;
        const double x_shift = (j % 2 == 0) ? 0.0 : spacing / 2.0;
        const auto max_i = static_cast<std::int64_t>(std::floor(reach / spacing)) + 1;
        for (std::int64_t i = -max_i; i <= max_i; ++i) {
            Complex c(static_cast<double>(i) * spacing + x_shift, y);
            const double len = std::abs(c);
            if (len > reach) continue;
            if (len > radius) c *= radius / len;  // projection keeps the covering property
            net.centers.push_back(c);
        }
    }
    net.cardinality = static_cast<std::int64_t>(net.centers.size());
    const auto limit = static_cast<std::int64_t>(std::ceil(5.0 / (delta * delta)));
    if (net.cardinality > limit)
        throw NumericError("disc_net: cardinality bound 5/delta^2 violated");
    return net;
}

inline Complex nearest_center(const DiscNet& net, Complex z) {
    Complex best = net.centers.front();
    double best_d = std::abs(z - best);
    for (const Complex c : net.centers) {
        const double d = std::abs(z - c);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Reduction of delocalization to invertibility: when Loc(A, eps, delta) and
// the norm bound hold, the localized pair yields a witness set I and a net
// point lambda0 with s_min((A - lambda0)_{I^c}) <= 8*M*delta*sqrt(n).
// ---------------------------------------------------------------------------

struct ReductionAudit {
    bool norm_ok = false;   // ||A|| <= M sqrt(n); audit skipped when false
    bool loc_holds = false;
    Eigen::Index eigen_index = -1;
    Complex lambda;
    Complex lambda0;
    std::vector<Eigen::Index> witness_set;
    double smin_value = 0.0;
    double bound = 0.0;
    bool certified = false;
};

inline Eigen::MatrixXcd drop_columns(const Eigen::MatrixXcd& a,
                                     const std::vector<Eigen::Index>& dropped) {
    std::vector<bool> drop(static_cast<std::size_t>(a.cols()), false);
    for (const Eigen::Index j : dropped) drop[static_cast<std::size_t>(j)] = true;
    Eigen::MatrixXcd out(a.rows(), a.cols() - static_cast<Eigen::Index>(dropped.size()));
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        if (!drop[static_cast<std::size_t>(j)]) out.col(k++) = a.col(j);
    return out;
}

inline ReductionAudit reduction_audit(const Eigen::MatrixXcd& a, double eps, double delta,
                                      double M) {
    if (a.rows() != a.cols()) throw ShapeError("reduction_audit: matrix must be square");
    if (!(delta > 0.0 && delta < 0.5))
        throw ParameterError("reduction_audit: delta must be in (0, 1/2)");
    const Eigen::Index n = a.rows();
    const auto k = static_cast<Eigen::Index>(std::ceil(eps * static_cast<double>(n)));
    if (k < 1 || k > n) throw ParameterError("reduction_audit: ceil(eps*n) must be in [1, n]");

    ReductionAudit audit;
    audit.bound = 8.0 * M * delta * std::sqrt(static_cast<double>(n));
    const double norm = operator_norm(a);
    audit.norm_ok = norm <= M * std::sqrt(static_cast<double>(n));
    if (!audit.norm_ok) return audit;

    const EigenResult eig = eigenpairs(a);
    double best_mass = std::numeric_limits<double>::infinity();
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mass = localization_norm(eig.eigenvectors.col(i), eps);
        if (mass < best_mass) {
            best_mass = mass;
            best = i;
        }
    }
    audit.loc_holds = best_mass < delta;
    if (!audit.loc_holds) return audit;

    audit.eigen_index = best;
    audit.lambda = eig.eigenvalues(best);
    audit.witness_set = smallest_coordinate_set(eig.eigenvectors.col(best), k);
    const DiscNet net = disc_net(M, n, delta);
    audit.lambda0 = nearest_center(net, audit.lambda);
    const Eigen::MatrixXcd restricted =
        drop_columns(shift_matrix(a, audit.lambda0), audit.witness_set);
    audit.smin_value = restricted.cols() > 0 ? s_min(restricted) : 0.0;
    audit.certified = audit.smin_value <= audit.bound * (1.0 + 1e-9);
    return audit;
}

// ---------------------------------------------------------------------------
// Negative second moment identity: sum_j s_j(B)^{-2} equals the sum of inverse
// squared distances from each column to the span of the others.
// ---------------------------------------------------------------------------

struct NegSecondMomentAudit {
    double lhs = 0.0;
    double rhs = 0.0;
    double gap = 0.0;  // |lhs-rhs| / lhs
};

inline NegSecondMomentAudit neg_second_moment_audit(const Eigen::MatrixXcd& b) {
    if (b.rows() < b.cols()) throw ShapeError("neg_second_moment_audit: matrix must be tall or square");
    const SvdResult dec = svd(b);
    const Eigen::Index n = b.cols();
    const double s1 = dec.singular_values(0);
    if (s1 == 0.0 || dec.singular_values(n - 1) <= default_rank_tol(b.rows(), b.cols()) * s1)
        throw SingularityError("neg_second_moment_audit: rank-deficient input");

    NegSecondMomentAudit audit;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double s = dec.singular_values(j);
        audit.lhs += 1.0 / (s * s);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::MatrixXcd others(b.rows(), n - 1);
        Eigen::Index k = 0;
        for (Eigen::Index c = 0; c < n; ++c)
            if (c != j) others.col(k++) = b.col(c);
        const double dist = dist_to_colspan(b.col(j), others);
        audit.rhs += 1.0 / (dist * dist);
    }
    audit.gap = std::abs(audit.lhs - audit.rhs) / audit.lhs;
    return audit;
}

// ---------------------------------------------------------------------------
// E-/E+ split by right singular vectors at a threshold.
// ---------------------------------------------------------------------------

struct SplitResult {
    Eigen::MatrixXcd minus_basis;  // right singular vectors with s_i <= threshold
    Eigen::MatrixXcd plus_basis;
    double threshold = 0.0;
    Eigen::Index minus_dim = 0;
};

inline SplitResult split_spectral_subspaces(const Eigen::MatrixXcd& b, double threshold) {
    if (!(threshold > 0.0)) throw ParameterError("split_spectral_subspaces: threshold must be > 0");
    const SvdResult dec = svd(b);
    std::vector<Eigen::Index> minus, plus;
    for (Eigen::Index i = 0; i < b.cols(); ++i) {
        const double s = i < dec.singular_values.size() ? dec.singular_values(i) : 0.0;
        (s <= threshold ? minus : plus).push_back(i);
    }
    SplitResult r;
    r.threshold = threshold;
    r.minus_dim = static_cast<Eigen::Index>(minus.size());
    r.minus_basis.resize(b.cols(), r.minus_dim);
    r.plus_basis.resize(b.cols(), static_cast<Eigen::Index>(plus.size()));
    for (std::size_t i = 0; i < minus.size(); ++i)
        r.minus_basis.col(static_cast<Eigen::Index>(i)) = dec.right_basis.col(minus[i]);
    for (std::size_t i = 0; i < plus.size(); ++i)
        r.plus_basis.col(static_cast<Eigen::Index>(i)) = dec.right_basis.col(plus[i]);
    return r;
}

// ---------------------------------------------------------------------------
// Block decomposition bound: s_min(A) >= s_B * s_G / (4 ||A||) where s_B is
// the bottom of B on E+ and s_G the bottom of G on E-.
// ---------------------------------------------------------------------------

struct DecompositionAudit {
    double s_a = 0.0;
    double s_b_plus = 0.0;
    double s_g_minus = 0.0;
    double norm = 0.0;
    double bound = 0.0;
    double threshold = 0.0;
    bool applicable = false;  // both subspaces nonempty
    bool holds = false;
};

namespace detail {

inline double smallest_restricted_value(const Eigen::MatrixXcd& m, const Eigen::MatrixXcd& basis) {
    if (basis.cols() == 0) return std::numeric_limits<double>::infinity();
    const Eigen::MatrixXcd restricted = m * basis;
    if (restricted.rows() < restricted.cols()) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> dec(restricted);
    return dec.singularValues()(restricted.cols() - 1);
}

}  // namespace detail

inline DecompositionAudit decomposition_bound_audit(const Eigen::MatrixXcd& a,
                                                    Eigen::Index split_row,
                                                    std::optional<double> threshold = {}) {
    if (a.rows() < a.cols()) throw ShapeError("decomposition_bound_audit: matrix must be tall or square");
    if (split_row < 1 || split_row >= a.rows())
        throw ParameterError("decomposition_bound_audit: split must leave both blocks nonempty");

    const Eigen::MatrixXcd b = a.topRows(split_row);
    const Eigen::MatrixXcd g = a.bottomRows(a.rows() - split_row);

    DecompositionAudit audit;
    if (threshold) {
        audit.threshold = *threshold;
    } else {
        Eigen::JacobiSVD<Eigen::MatrixXcd> dec(b);
        const auto& sv = dec.singularValues();
        const double hi = sv(0);
        const double lo = std::max(sv(sv.size() - 1), 1e-300);
        audit.threshold = std::sqrt(hi * lo);
    }
    if (!(audit.threshold > 0.0))
        throw ParameterError("decomposition_bound_audit: threshold must be > 0");

    const SplitResult split = split_spectral_subspaces(b, audit.threshold);
    audit.s_a = s_min(a);
    audit.norm = operator_norm(a);
    audit.s_b_plus = detail::smallest_restricted_value(b, split.plus_basis);
    audit.s_g_minus = detail::smallest_restricted_value(g, split.minus_basis);
    audit.applicable = split.minus_dim > 0 && split.plus_basis.cols() > 0;
    if (!audit.applicable) {
        audit.holds = true;  // vacuous; the bound needs both subspaces
        return audit;
    }
    audit.bound = audit.s_b_plus * audit.s_g_minus / (4.0 * std::max(audit.norm, 1e-300));
    audit.holds = audit.s_a >= audit.bound * (1.0 - 1e-9) - 1e-12;
    return audit;
}

// ---------------------------------------------------------------------------
// Cardinality bound calculators for level-set nets.
// ---------------------------------------------------------------------------

enum class LevelsetCase { genuinely_complex, essentially_real };

struct LevelsetBound {
    double gamma = 0.0;
    double d0 = 0.0;
    double log_value = 0.0;  // natural log of the cardinality bound
    double value = 0.0;      // may overflow to +inf for large parameters
};

inline LevelsetBound levelset_net_bound(LevelsetCase which, double D, double d, double N,
                                        double delta, double L, double C = 1.0) {
    if (!(D > 0.0) || !(L > 0.0) || !(N >= 1.0)) throw ParameterError("levelset_net_bound: D, L, N must be positive");
    if (!(d >= 0.0 && d <= 1.0)) throw ParameterError("levelset_net_bound: d must be in [0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("levelset_net_bound: delta must be in (0,1)");
    if (!(C > 0.0)) throw ParameterError("levelset_net_bound: C must be > 0");

    LevelsetBound out;
    out.gamma = (L / D) * std::sqrt(log_plus(D / L));
    if (out.gamma <= 0.0)
        throw ParameterError("levelset_net_bound: log_+(D/L) = 0 makes gamma = 0; bound undefined");
    out.d0 = C * delta * std::max(out.gamma, std::sqrt(N) / D);

    const double dn = delta * N;
    const double cd = C * D / std::sqrt(N);
    switch (which) {
        case LevelsetCase::genuinely_complex: {
            if (d < out.d0) {
                std::ostringstream msg;
                msg << "levelset_net_bound: d < d0 = " << out.d0 << " is the essentially real case";
                throw ParameterError(msg.str());
            }
            out.log_value = -N * std::log(delta) - (2.0 * dn + 1.0) * std::log(out.gamma) +
                            (2.0 * N - dn) * std::log(cd) + (N - dn - 1.0) * std::log(d);
            break;
        }
        case LevelsetCase::essentially_real: {
            if (d > out.d0) {
                std::ostringstream msg;
                msg << "levelset_net_bound: d > d0 = " << out.d0 << " is the genuinely complex case";
                throw ParameterError(msg.str());
            }
            out.log_value = -dn * std::log(delta) - (2.0 * dn + 1.0) * std::log(out.gamma) +
                            (N - dn + 1.0) * std::log(cd);
            break;
        }
    }
    out.value = std::exp(out.log_value);
    return out;
}

// Net cardinality for the compressible set: (C/(c0*c1^2))^{c0*N}.
inline double compressible_net_bound_log(double C, double c0, double c1, double N) {
    if (!(C > 0.0) || !(c0 > 0.0 && c0 < 1.0) || !(c1 > 0.0 && c1 < 1.0) || !(N >= 1.0))
        throw ParameterError("compressible_net_bound: bad parameters");
    return c0 * N * std::log(C / (c0 * c1 * c1));
}

// ---------------------------------------------------------------------------
// Tiny-scale lattice enumeration backing the net-counting steps.
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t count_lattice_rec(int dim_left, double radius_sq,
                                      const std::function<bool(const std::vector<std::int64_t>&)>& accept,
                                      std::vector<std::int64_t>& point) {
    if (dim_left == 0) return (!accept || accept(point)) ? 1 : 0;
    const auto limit = static_cast<std::int64_t>(std::floor(std::sqrt(std::max(0.0, radius_sq))));
    std::int64_t total = 0;
    for (std::int64_t c = -limit; c <= limit; ++c) {
        point.push_back(c);
        total += count_lattice_rec(dim_left - 1, radius_sq - static_cast<double>(c) * static_cast<double>(c),
                                   accept, point);
        point.pop_back();
    }
    return total;
}

}  // namespace detail

// |Z^dim intersect B(0, radius)| by pruned enumeration; intended for dim <= 6.
inline std::int64_t integer_points_in_ball(int dim, double radius) {
    if (dim < 1 || dim > 8) throw ParameterError("integer_points_in_ball: dim must be in [1,8]");
    std::vector<std::int64_t> point;
    return detail::count_lattice_rec(dim, radius * radius, nullptr, point);
}

// Integer points q with ||P_p q|| <= along and ||P_{p-perp} q|| <= across.
inline std::int64_t integer_points_in_cylinder(const Eigen::VectorXd& p, double along,
                                               double across) {
    const int dim = static_cast<int>(p.size());
    if (dim < 1 || dim > 8) throw ParameterError("integer_points_in_cylinder: dim must be in [1,8]");
    const double pn = p.norm();
    if (pn == 0.0) throw ParameterError("integer_points_in_cylinder: p must be nonzero");
    const Eigen::VectorXd u = p / pn;
    const double radius_sq = along * along + across * across;
    std::vector<std::int64_t> point;
    const auto accept = [&](const std::vector<std::int64_t>& q) {
        double dot = 0.0, norm_sq = 0.0;
        for (int i = 0; i < dim; ++i) {
            dot += u(i) * static_cast<double>(q[static_cast<std::size_t>(i)]);
            norm_sq += static_cast<double>(q[static_cast<std::size_t>(i)]) *
                       static_cast<double>(q[static_cast<std::size_t>(i)]);
        }
        return std::abs(dot) <= along && norm_sq - dot * dot <= across * across + 1e-12;
    };
    return detail::count_lattice_rec(dim, radius_sq, accept, point);
}

// ---------------------------------------------------------------------------
// Monte Carlo experiment drivers. Trial i draws from the stream
// derive_stream_seed(base_seed, i); records are independent of worker count.
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

template <typename Fn>
std::vector<TrialRecord> run_trial_loop(std::int64_t trials, int workers, std::uint64_t base_seed,
                                        Fn&& body) {
    return run_indexed<TrialRecord>(trials, workers, [&](std::int64_t i) {
        const auto start = std::chrono::steady_clock::now();
        TrialRecord rec;
        rec.trial_index = i;
        rec.seed = derive_stream_seed(base_seed, static_cast<std::uint64_t>(i));
        try {
            body(rec);
            rec.flags["failed"] = false;
        } catch (const std::exception&) {
            rec.metrics.clear();
            rec.flags.clear();
            rec.flags["failed"] = true;
        }
        rec.wall_time_ms = elapsed_ms(start);
        return rec;
    });
}

}  // namespace detail

// Smallest singular value of (A - lambda0) restricted to the complement of the
// trailing ceil(eps*n) columns.
inline std::vector<TrialRecord> smin_experiment(const EnsembleSpec& spec, double eps,
                                                Complex lambda0, std::int64_t trials,
                                                std::uint64_t base_seed, int workers = 1) {
    spec.validate();
    if (spec.n_rows != spec.n_cols) throw ShapeError("smin_experiment: square ensemble required");
    const Eigen::Index n = spec.n_rows;
    const auto k = static_cast<Eigen::Index>(std::ceil(eps * static_cast<double>(n)));
    if (k < 1 || k > n) throw ParameterError("smin_experiment: ceil(eps*n) must be in [1, n]");
    const double root_n = std::sqrt(static_cast<double>(n));

    return detail::run_trial_loop(trials, workers, base_seed, [&, n, k](TrialRecord& rec) {
        const Eigen::MatrixXcd a = sample_matrix(spec, rec.seed);
        const double norm = operator_norm(a);
        const Eigen::MatrixXcd restricted = shift_matrix(a, lambda0).leftCols(n - k);
        const double smin = restricted.cols() > 0 ? s_min(restricted) : 0.0;
        rec.metrics["smin_scaled"] = smin / root_n;
        rec.metrics["op_norm_scaled"] = norm / root_n;
        rec.flags["boundedness_held"] = norm <= spec.norm_bound_M * root_n;
    });
}

// Distance from an independent random vector to the column span of H.
inline std::vector<TrialRecord> distance_experiment(const EnsembleSpec& spec_h,
                                                    const EntryDist& z_dist,
                                                    std::int64_t trials, std::uint64_t base_seed,
                                                    int workers = 1,
                                                    std::optional<Eigen::VectorXd> z_fixed_imag = {}) {
    spec_h.validate();
    const Eigen::Index big_n = spec_h.n_rows;
    const Eigen::Index cols = spec_h.n_cols;
    if (cols > big_n) throw ShapeError("distance_experiment: H must be tall");
    const Eigen::Index eps_n = big_n - cols;
    if (eps_n < 1) throw ParameterError("distance_experiment: N - n must be >= 1");
    if (z_fixed_imag && z_fixed_imag->size() != big_n)
        throw ShapeError("distance_experiment: fixed imaginary part of Z has wrong size");
    const double scale = std::sqrt(static_cast<double>(eps_n));
    const double root_big_n = std::sqrt(static_cast<double>(big_n));

    return detail::run_trial_loop(trials, workers, base_seed, [&, big_n](TrialRecord& rec) {
        const Eigen::MatrixXcd h = sample_matrix(spec_h, rec.seed);
        Rng rng(derive_stream_seed(rec.seed, 0x5A5A5A5AULL));
        EntrySampler draw(z_dist);
        Eigen::VectorXcd z(big_n);
        for (Eigen::Index i = 0; i < big_n; ++i) {
            const double im = z_fixed_imag ? (*z_fixed_imag)(i) : 0.0;
            z(i) = Complex(draw(rng), im);
        }
        const double dist = dist_to_colspan(z, h);
        rec.metrics["dist_scaled"] = dist / scale;
        rec.metrics["z_norm"] = z.norm();
        rec.flags["boundedness_held"] = operator_norm(h) <= spec_h.norm_bound_M * root_big_n;
    });
}

struct KernelLcdOptions {
    double c_small = 0.5;    // exponent constant in the structure threshold
    double c0_floor = 0.5;   // incompressibility floor coefficient
    std::int64_t n_starts = 12;
    double search_cap = -1.0;   // <=0: default 16*sqrt(2N)
    double grid_step = -1.0;
};

// Upper LCD estimate for the realified kernel of an n x N draw, with
// L = sqrt(eps*N). One-sided: a censored or large estimate does not certify a
// large LCD, but an estimate below the floor would exhibit structure.
inline std::vector<TrialRecord> kernel_lcd_experiment(const EnsembleSpec& spec_b, double eps,
                                                      std::int64_t trials, std::uint64_t base_seed,
                                                      const KernelLcdOptions& opt = {},
                                                      int workers = 1) {
    spec_b.validate();
    const Eigen::Index rows = spec_b.n_rows;
    const Eigen::Index big_n = spec_b.n_cols;
    if (rows >= big_n) throw ShapeError("kernel_lcd_experiment: B must be wide (n < N)");
    const Eigen::Index eps_n = big_n - rows;
    const double eff_eps = static_cast<double>(eps_n) / static_cast<double>(big_n);
    if (std::abs(eff_eps - eps) > 0.51 / static_cast<double>(big_n))
        throw ParameterError("kernel_lcd_experiment: eps inconsistent with (n, N)");
    const double L = std::sqrt(static_cast<double>(eps_n));
    const double threshold =
        std::min(std::sqrt(static_cast<double>(big_n)) * std::exp(opt.c_small / std::sqrt(eff_eps)),
                 static_cast<double>(eps_n));
    const double floor = opt.c0_floor * std::sqrt(static_cast<double>(big_n));

    return detail::run_trial_loop(trials, workers, base_seed, [&](TrialRecord& rec) {
        const Eigen::MatrixXcd b = sample_matrix(spec_b, rec.seed);
        const Eigen::MatrixXcd kernel = kernel_basis(b);
        if (kernel.cols() == 0) throw NumericError("kernel_lcd_experiment: trivial kernel");
        const Eigen::MatrixXd real_basis = realify_subspace_basis(kernel);
        const LcdEstimate est =
            lcd_subspace_upper(real_basis, L, opt.n_starts,
                               derive_stream_seed(rec.seed, 0xA5A5A5A5ULL), opt.search_cap,
                               opt.grid_step);
        rec.metrics["lcd_upper"] = est.value;
        rec.metrics["structure_threshold"] = threshold;
        rec.metrics["incompressibility_floor"] = floor;
        rec.metrics["kernel_dim"] = static_cast<double>(kernel.cols());
        rec.flags["censored_lcd"] = est.censored;
        rec.flags["exceeds_floor"] = est.value >= floor;
        rec.flags["boundedness_held"] =
            operator_norm(b) <=
            spec_b.norm_bound_M * std::sqrt(static_cast<double>(std::max(rows, big_n)));
    });
}

// Full-spectrum localization profile of square draws. The loc_event flag is
// evaluated at eps_event (which must lie on the grid) with threshold delta.
inline std::vector<TrialRecord> deloc_profile_experiment(const EnsembleSpec& spec,
                                                         const std::vector<double>& eps_grid,
                                                         double eps_event, double delta,
                                                         std::int64_t trials,
                                                         std::uint64_t base_seed, int workers = 1) {
    spec.validate();
    if (spec.n_rows != spec.n_cols) throw ShapeError("deloc_profile_experiment: square ensemble required");
    if (eps_grid.empty()) throw ParameterError("deloc_profile_experiment: eps grid empty");
    if (std::none_of(eps_grid.begin(), eps_grid.end(),
                     [&](double e) { return std::abs(e - eps_event) <= 1e-12; }))
        throw ParameterError("deloc_profile_experiment: eps_event must lie on the grid");
    const double root_n = std::sqrt(static_cast<double>(spec.n_rows));

    return detail::run_trial_loop(trials, workers, base_seed, [&](TrialRecord& rec) {
        const Eigen::MatrixXcd a = sample_matrix(spec, rec.seed);
        const double norm = operator_norm(a);
        const std::vector<DelocReport> reports = deloc_reports(a, eps_grid);
        for (std::size_t gi = 0; gi < eps_grid.size(); ++gi) {
            double min_mass = std::numeric_limits<double>::infinity();
            for (const auto& rep : reports)
                min_mass = std::min(min_mass, rep.localization_curve[gi].second);
            std::ostringstream key;
            key << "min_loc_norm@eps" << gi;
            rec.metrics[key.str()] = min_mass;
        }
        double sup = 0.0, worst_res = 0.0;
        for (const auto& rep : reports) {
            sup = std::max(sup, rep.sup_norm);
            worst_res = std::max(worst_res, rep.residual);
        }
        rec.metrics["max_sup_norm"] = sup;
        rec.metrics["max_residual"] = worst_res;
        rec.metrics["op_norm_scaled"] = norm / root_n;
        rec.flags["boundedness_held"] = norm <= spec.norm_bound_M * root_n;
        rec.flags["loc_event"] = loc_event(reports, eps_event, delta);
    });
}

}  // namespace deloclab
