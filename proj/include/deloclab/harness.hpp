#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deloclab/deloc.hpp"
#include "deloclab/ensemble.hpp"
#include "deloclab/errors.hpp"
#include "deloclab/records.hpp"
#include "deloclab/smallball.hpp"

namespace deloclab {

inline constexpr const char* kCodeVersion = "deloclab 0.1.0";

// ---------------------------------------------------------------------------
// Config parsing. Flat JSON with typed keys; errors carry dotted key paths.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    std::string experiment;
    EnsembleSpec ensemble;
    Json parameters = Json::object();
    std::int64_t trials = 1;
    std::uint64_t base_seed = 0;
    std::string output_path;
    int workers = 1;
    Json raw = Json::object();  // canonical copy for hashing / sidecar
};

namespace detail {

inline const Json& require_key(const Json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError("missing required key: " + path);
    return j.at(key);
}

inline double require_number(const Json& j, const std::string& key, const std::string& path) {
    const Json& v = require_key(j, key, path);
    if (!v.is_number()) throw ConfigError("expected number at " + path);
    return v.get<double>();
}

inline EntryDist parse_entry_dist(const Json& j, const std::string& path) {
    const std::string kind = require_key(j, "kind", path + ".kind").get<std::string>();
    if (kind == "symmetric_sign") return SymmetricSign{};
    if (kind == "gaussian")
        return GaussianDist{require_number(j, "mean", path + ".mean"),
                            require_number(j, "sd", path + ".sd")};
    if (kind == "uniform")
        return UniformDist{require_number(j, "a", path + ".a"),
                           require_number(j, "b", path + ".b")};
    if (kind == "discrete") {
        DiscreteDist d;
        for (const auto& v : require_key(j, "values", path + ".values")) d.values.push_back(v.get<double>());
        for (const auto& v : require_key(j, "probs", path + ".probs")) d.probs.push_back(v.get<double>());
        return d;
    }
    throw ConfigError("unknown entry distribution kind at " + path + ".kind");
}

inline Dependency parse_dependency(const std::string& s, const std::string& path) {
    if (s == "independent") return Dependency::independent;
    if (s == "symmetric") return Dependency::symmetric;
    if (s == "skew") return Dependency::skew;
    throw ConfigError("unknown dependency at " + path);
}

inline EnsembleSpec parse_ensemble(const Json& j, const std::string& path) {
    EnsembleSpec spec;
    spec.n_rows = static_cast<Eigen::Index>(require_number(j, "n_rows", path + ".n_rows"));
    spec.n_cols = static_cast<Eigen::Index>(require_number(j, "n_cols", path + ".n_cols"));
    spec.entry_dist = parse_entry_dist(require_key(j, "entry_dist", path + ".entry_dist"),
                                       path + ".entry_dist");
    spec.dependency = parse_dependency(
        require_key(j, "dependency", path + ".dependency").get<std::string>(), path + ".dependency");
    spec.dist_K = require_number(j, "K", path + ".K");
    spec.dist_p = require_number(j, "p", path + ".p");
    spec.norm_bound_M = require_number(j, "M", path + ".M");
    if (j.contains("fixed_imag")) {
        const Json& rows = j.at("fixed_imag");
        Eigen::MatrixXd t(spec.n_rows, spec.n_cols);
        if (static_cast<Eigen::Index>(rows.size()) != spec.n_rows)
            throw ConfigError("bad shape at " + path + ".fixed_imag");
        for (Eigen::Index i = 0; i < spec.n_rows; ++i) {
            const Json& row = rows.at(static_cast<std::size_t>(i));
            if (static_cast<Eigen::Index>(row.size()) != spec.n_cols)
                throw ConfigError("bad shape at " + path + ".fixed_imag");
            for (Eigen::Index k = 0; k < spec.n_cols; ++k)
                t(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
        }
        spec.fixed_imag = t;
    }
    try {
        spec.validate();
    } catch (const ValidationError& e) {
        throw ConfigError(std::string(path) + ": " + e.what());
    }
    return spec;
}

inline std::vector<double> parse_grid(const Json& params, const std::string& key) {
    std::vector<double> out;
    for (const auto& v : params.at(key)) out.push_back(v.get<double>());
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.experiment = detail::require_key(j, "experiment", "experiment").get<std::string>();
    static const std::vector<std::string> known = {"deloc_profile", "smin",  "distance",
                                                   "kernel_lcd",    "audits", "smallball_suite"};
    if (std::find(known.begin(), known.end(), cfg.experiment) == known.end())
        throw ConfigError("unknown experiment: " + cfg.experiment);
    cfg.trials = static_cast<std::int64_t>(detail::require_number(j, "trials", "trials"));
    if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
    cfg.base_seed = detail::require_key(j, "base_seed", "base_seed").get<std::uint64_t>();
    cfg.output_path = detail::require_key(j, "output_path", "output_path").get<std::string>();
    if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
    cfg.parameters = j.contains("parameters") ? j.at("parameters") : Json::object();

    const bool needs_ensemble = cfg.experiment == "deloc_profile" || cfg.experiment == "smin" ||
                                cfg.experiment == "distance" || cfg.experiment == "kernel_lcd";
    if (needs_ensemble)
        cfg.ensemble = detail::parse_ensemble(detail::require_key(j, "ensemble", "ensemble"), "ensemble");

    // Per-experiment parameter schema.
    const auto need = [&](const char* key) {
        if (!cfg.parameters.contains(key))
            throw ConfigError(std::string("missing required key: parameters.") + key);
    };
    if (cfg.experiment == "deloc_profile") {
        need("epsilon");
        need("delta");
    } else if (cfg.experiment == "smin") {
        need("epsilon");
        need("lambda0");
    } else if (cfg.experiment == "kernel_lcd") {
        need("epsilon");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Built-in audit trial bodies (deterministic-identity checks on random inputs).
// ---------------------------------------------------------------------------

namespace detail {

inline Eigen::MatrixXcd random_complex_gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXcd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = Complex(rng.gaussian(), rng.gaussian());
    return m;
}

inline Eigen::VectorXcd random_complex_unit(Rng& rng, Eigen::Index n) {
    Eigen::VectorXcd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = Complex(rng.gaussian(), rng.gaussian());
    z.normalize();
    return z;
}

inline void audits_trial_body(TrialRecord& rec, Eigen::Index n) {
    Rng rng(rec.seed);

    // Negative second moment identity on a tall block.
    const Eigen::MatrixXcd b = random_complex_gaussian(rng, n + std::max<Eigen::Index>(2, n / 2), n);
    const NegSecondMomentAudit nsm = neg_second_moment_audit(b);
    rec.metrics["nsm_gap"] = nsm.gap;
    const bool nsm_ok = nsm.gap <= 1e-8;

    // Block decomposition bound with a random interior split and threshold.
    const Eigen::MatrixXcd a = random_complex_gaussian(rng, n, n);
    const auto split_row = static_cast<Eigen::Index>(1 + rng.uniform_below(static_cast<std::uint64_t>(n - 1)));
    Eigen::JacobiSVD<Eigen::MatrixXcd> top_svd(a.topRows(split_row));
    const double s_hi = top_svd.singularValues()(0);
    const double s_lo = std::max(top_svd.singularValues()(top_svd.singularValues().size() - 1), 1e-12 * s_hi);
    const double threshold = s_lo * std::pow(s_hi / s_lo, rng.uniform01());
    const DecompositionAudit dec = decomposition_bound_audit(a, split_row, threshold);
    rec.metrics["decomposition_margin"] = dec.applicable ? dec.s_a - dec.bound : 0.0;
    const bool dec_ok = dec.holds;

    // Realification homomorphism.
    const Eigen::MatrixXcd m = random_complex_gaussian(rng, n / 2 + 1, n);
    const Eigen::VectorXcd z = random_complex_unit(rng, n);
    const double hom_err =
        (realify_vector(m * z) - realify_matrix(m) * realify_vector(z)).cwiseAbs().maxCoeff();
    rec.metrics["realify_hom_err"] = hom_err;
    const bool hom_ok = hom_err <= 1e-12;

    rec.flags["audit_passed"] = nsm_ok && dec_ok && hom_ok;
}

inline void smallball_trial_body(TrialRecord& rec) {
    Rng rng(rec.seed);
    const auto n = static_cast<Eigen::Index>(4 + rng.uniform_below(7));  // 4..10
    Eigen::VectorXd a(n);
    for (Eigen::Index i = 0; i < n; ++i) a(i) = rng.gaussian();
    a.normalize();
    const DiscreteDist sign{{-1.0, 1.0}, {0.5, 0.5}};

    bool ok = true;
    // Monotone in t.
    double prev = -1.0;
    for (const double t : {0.0, 0.02, 0.05, 0.1, 0.2, 0.5}) {
        const double v = exact_concentration_enum(sign, a, t).value;
        if (v < prev - 1e-12) ok = false;
        prev = v;
    }
    // Restriction: the full sum concentrates no more than any sub-sum
    // (independent terms only spread mass).
    const double full = exact_concentration_enum(sign, a, 0.05).value;
    for (int rep = 0; rep < 8; ++rep) {
        std::vector<Eigen::Index> subset;
        for (Eigen::Index i = 0; i < n; ++i)
            if (rng.uniform01() < 0.5) subset.push_back(i);
        if (subset.empty() || static_cast<Eigen::Index>(subset.size()) == n) continue;
        Eigen::VectorXd sub(static_cast<Eigen::Index>(subset.size()));
        for (std::size_t i = 0; i < subset.size(); ++i) sub(static_cast<Eigen::Index>(i)) = a(subset[i]);
        const double part = exact_concentration_enum(sign, sub, 0.05).value;
        if (full > part + 1e-12) ok = false;
    }
    // The (c, c') = (0.05, 0.1) anti-concentration floor for unit weights.
    const double at_c = exact_concentration_enum(sign, a, 0.05).value;
    rec.metrics["concentration_at_c"] = at_c;
    if (at_c > 1.0 - 0.1 + 1e-12) ok = false;
    rec.flags["audit_passed"] = ok;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suite dispatch
// ---------------------------------------------------------------------------

inline std::vector<TrialRecord> run_suite(const ExperimentConfig& cfg) {
    const Json& p = cfg.parameters;
    if (cfg.experiment == "smin") {
        const double eps = p.at("epsilon").get<double>();
        const Json& l0 = p.at("lambda0");
        const Complex lambda0(l0.at(0).get<double>(), l0.at(1).get<double>());
        return smin_experiment(cfg.ensemble, eps, lambda0, cfg.trials, cfg.base_seed, cfg.workers);
    }
    if (cfg.experiment == "distance") {
        const EntryDist z_dist = p.contains("z_dist")
                                     ? detail::parse_entry_dist(p.at("z_dist"), "parameters.z_dist")
                                     : cfg.ensemble.entry_dist;
        return distance_experiment(cfg.ensemble, z_dist, cfg.trials, cfg.base_seed, cfg.workers);
    }
    if (cfg.experiment == "kernel_lcd") {
        const double eps = p.at("epsilon").get<double>();
        KernelLcdOptions opt;
        if (p.contains("c")) opt.c_small = p.at("c").get<double>();
        if (p.contains("c0")) opt.c0_floor = p.at("c0").get<double>();
        if (p.contains("n_starts")) opt.n_starts = p.at("n_starts").get<std::int64_t>();
        return kernel_lcd_experiment(cfg.ensemble, eps, cfg.trials, cfg.base_seed, opt, cfg.workers);
    }
    if (cfg.experiment == "deloc_profile") {
        const double eps = p.at("epsilon").get<double>();
        const double delta = p.at("delta").get<double>();
        std::vector<double> grid{eps};
        if (p.contains("eps_grid")) grid = detail::parse_grid(p, "eps_grid");
        if (std::find(grid.begin(), grid.end(), eps) == grid.end()) grid.insert(grid.begin(), eps);
        return deloc_profile_experiment(cfg.ensemble, grid, eps, delta, cfg.trials, cfg.base_seed,
                                        cfg.workers);
    }
    if (cfg.experiment == "audits") {
        const auto n = static_cast<Eigen::Index>(p.contains("n") ? p.at("n").get<int>() : 16);
        return detail::run_trial_loop(cfg.trials, cfg.workers, cfg.base_seed,
                                      [n](TrialRecord& rec) { detail::audits_trial_body(rec, n); });
    }
    if (cfg.experiment == "smallball_suite") {
        return detail::run_trial_loop(cfg.trials, cfg.workers, cfg.base_seed,
                                      [](TrialRecord& rec) { detail::smallball_trial_body(rec); });
    }
    throw ConfigError("unknown experiment: " + cfg.experiment);
}

// Writes <output>.jsonl, <output>.csv and <output>.meta.json.
inline void write_outputs(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records,
                          const std::map<std::string, double>& fitted_constants = {}) {
    const auto parent = std::filesystem::path(cfg.output_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    emit_jsonl(records, cfg.output_path + ".jsonl");
    emit_csv(records, cfg.output_path + ".csv");
    emit_metadata(cfg.output_path + ".meta.json", cfg.raw, fitted_constants, kCodeVersion);
}

inline double failure_fraction(const std::vector<TrialRecord>& records) {
    if (records.empty()) return 0.0;
    std::int64_t failed = 0;
    for (const auto& r : records)
        if (r.failed()) ++failed;
    return static_cast<double>(failed) / static_cast<double>(records.size());
}

}  // namespace deloclab
