// Command-line front end: run experiment suites from config files, summarize
// record streams, and expose the audit/LCD/net primitives directly.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "deloclab/harness.hpp"

namespace {

using namespace deloclab;

int cmd_run(const std::string& config_path, double max_failure_fraction) {
    const ExperimentConfig cfg = load_config(config_path);
    const std::vector<TrialRecord> records = run_suite(cfg);
    write_outputs(cfg, records);
    const double failures = failure_fraction(records);
    std::cout << "wrote " << records.size() << " records to " << cfg.output_path
              << ".{jsonl,csv,meta.json}";
    if (failures > 0.0) std::cout << " (failure fraction " << failures << ")";
    std::cout << "\n";
    return failures > max_failure_fraction ? 3 : 0;
}

int cmd_summarize(const std::string& records_path, const std::string& metric,
                  const std::vector<double>& thresholds) {
    const std::vector<TrialRecord> records = read_jsonl(records_path);
    const SummaryStats s = summarize(records, metric, thresholds);
    std::cout << "threshold,empirical_prob,wilson_lo,wilson_hi,n\n";
    for (std::size_t i = 0; i < s.threshold_grid.size(); ++i) {
        std::cout << s.threshold_grid[i] << "," << s.empirical_prob[i] << "," << s.wilson_lo[i]
                  << "," << s.wilson_hi[i] << "," << s.n << "\n";
    }
    if (s.failed > 0) std::cerr << "excluded " << s.failed << " failed trials\n";
    return 0;
}

int cmd_audit(const std::string& suite, std::uint64_t seed, std::int64_t trials) {
    ExperimentConfig cfg;
    cfg.trials = trials;
    cfg.base_seed = seed;
    cfg.workers = 2;
    if (suite == "identities") {
        cfg.experiment = "audits";
        cfg.parameters = Json{{"n", 16}};
    } else if (suite == "smallball") {
        cfg.experiment = "smallball_suite";
    } else {
        std::cerr << "unknown audit suite: " << suite << " (expected identities|smallball)\n";
        return 2;
    }
    const std::vector<TrialRecord> records = run_suite(cfg);
    std::int64_t passed = 0;
    for (const auto& r : records) {
        const auto it = r.flags.find("audit_passed");
        const bool ok = it != r.flags.end() && it->second && !r.failed();
        if (ok) ++passed;
        else
            std::cout << "[FAIL] trial " << r.trial_index << "\n";
    }
    std::cout << (passed == trials ? "[PASS] " : "[FAIL] ") << suite << ": " << passed << "/"
              << trials << " trials passed\n";
    return passed == trials ? 0 : 3;
}

int cmd_lcd(const std::string& vector_path, double L, double cap, double grid_step) {
    std::ifstream in(vector_path);
    if (!in) {
        std::cerr << "cannot open " << vector_path << "\n";
        return 2;
    }
    std::vector<double> entries;
    double x;
    while (in >> x) entries.push_back(x);
    if (entries.empty()) {
        std::cerr << "no numbers in " << vector_path << "\n";
        return 2;
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) v(static_cast<Eigen::Index>(i)) = entries[i];
    if (cap <= 0.0) cap = default_lcd_cap(v.size());
    if (grid_step <= 0.0) grid_step = 1e-3 * cap;
    const LcdEstimate est = lcd_vector(v, L, cap, grid_step);
    Json j;
    j["value"] = est.value;
    j["censored"] = est.censored;
    j["witness_theta"] = est.witness(0);
    j["witness_residual"] = est.witness_residual;
    j["grid_step"] = est.grid_step;
    j["lower_bound"] = lcd_lower_bound(v);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_net(double M, Eigen::Index n, double delta, bool print_centers) {
    const DiscNet net = disc_net(M, n, delta);
    Json j;
    j["cardinality"] = net.cardinality;
    j["mesh"] = net.mesh;
    j["bound"] = static_cast<std::int64_t>(std::ceil(5.0 / (delta * delta)));
    if (print_centers) {
        Json centers = Json::array();
        for (const Complex c : net.centers) centers.push_back(Json::array({c.real(), c.imag()}));
        j["centers"] = centers;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-matrix delocalization laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    double max_failure_fraction = 0.0;
    auto* run = app.add_subcommand("run", "run an experiment suite from a config file");
    run->add_option("config", config_path, "JSON config file")->required();
    run->add_option("--max-failure-fraction", max_failure_fraction,
                    "tolerated fraction of failed trials before exit code 3");

    std::string records_path, metric;
    std::vector<double> thresholds;
    auto* summ = app.add_subcommand("summarize", "tail probabilities with Wilson intervals");
    summ->add_option("records", records_path, "JSONL record file")->required();
    summ->add_option("--metric", metric, "metric name")->required();
    summ->add_option("--thresholds", thresholds, "threshold grid")->required()->delimiter(',');

    std::string suite = "identities";
    std::uint64_t seed = 0;
    std::int64_t audit_trials = 50;
    auto* audit = app.add_subcommand("audit", "run a named audit suite");
    audit->add_option("--suite", suite, "identities|smallball");
    audit->add_option("--seed", seed, "base seed");
    audit->add_option("--trials", audit_trials, "trial count");

    std::string vector_path;
    double L = 1.0, cap = -1.0, grid_step = -1.0;
    auto* lcd = app.add_subcommand("lcd", "least common denominator of a real vector");
    lcd->add_option("--vector", vector_path, "text file of whitespace-separated numbers")->required();
    lcd->add_option("--L", L, "slack scale L")->required();
    lcd->add_option("--cap", cap, "search cap (default 16*sqrt(N))");
    lcd->add_option("--grid-step", grid_step, "grid step (default 1e-3*cap)");

    double net_m = 1.0, net_delta = 0.1;
    Eigen::Index net_n = 1;
    bool print_centers = false;
    auto* net = app.add_subcommand("net", "covering net of the disc of radius M*sqrt(n)");
    net->add_option("--M", net_m, "norm constant M")->required();
    net->add_option("--n", net_n, "dimension n")->required();
    net->add_option("--delta", net_delta, "mesh parameter delta")->required();
    net->add_flag("--centers", print_centers, "print the centers");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, max_failure_fraction);
        if (summ->parsed()) return cmd_summarize(records_path, metric, thresholds);
        if (audit->parsed()) return cmd_audit(suite, seed, audit_trials);
        if (lcd->parsed()) return cmd_lcd(vector_path, L, cap, grid_step);
        if (net->parsed()) return cmd_net(net_m, net_n, net_delta, print_centers);
    } catch (const deloclab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
