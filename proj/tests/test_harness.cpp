#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <regex>

#include "deloclab/harness.hpp"
#include "helpers.hpp"

using namespace deloclab;

namespace {

Json base_config() {
    return Json{
        {"experiment", "smin"},
        {"ensemble",
         {{"n_rows", 8},
          {"n_cols", 8},
          {"entry_dist", {{"kind", "gaussian"}, {"mean", 0.0}, {"sd", 1.0}}},
          {"dependency", "independent"},
          {"K", 2.0},
          {"p", 0.5},
          {"M", 2.5}}},
        {"parameters", {{"epsilon", 0.25}, {"lambda0", {0.0, 0.0}}}},
        {"trials", 6},
        {"base_seed", 31},
        {"output_path", "/tmp/deloclab_test_run"},
    };
}

std::string strip_timing(const std::string& jsonl) {
    static const std::regex timing("\"wall_time_ms\":[0-9]+");
    return std::regex_replace(jsonl, timing, "\"wall_time_ms\":0");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

}  // namespace

TEST_CASE("config validation names the missing key path") {
    Json j = base_config();
    j["parameters"].erase("epsilon");
    CHECK_THROWS_WITH_AS(parse_config(j), doctest::Contains("parameters.epsilon"), ConfigError);

    Json bad_exp = base_config();
    bad_exp["experiment"] = "mystery";
    CHECK_THROWS_AS(parse_config(bad_exp), ConfigError);

    Json no_trials = base_config();
    no_trials.erase("trials");
    CHECK_THROWS_WITH_AS(parse_config(no_trials), doctest::Contains("trials"), ConfigError);

    Json bad_dist = base_config();
    bad_dist["ensemble"]["entry_dist"] = {{"kind", "cauchy"}};
    CHECK_THROWS_WITH_AS(parse_config(bad_dist), doctest::Contains("ensemble.entry_dist.kind"),
                         ConfigError);

    Json symmetric = base_config();
    symmetric["ensemble"]["dependency"] = "symmetric";
    CHECK(parse_config(symmetric).ensemble.dependency == Dependency::symmetric);
    symmetric["ensemble"]["n_cols"] = 9;  // pairing needs a square shape
    CHECK_THROWS_AS(parse_config(symmetric), ConfigError);
}

TEST_CASE("audits experiment passes on every trial") {
    ExperimentConfig cfg;
    cfg.experiment = "audits";
    cfg.parameters = Json{{"n", 16}};
    cfg.trials = 30;
    cfg.base_seed = 5;
    cfg.workers = 2;
    const auto records = run_suite(cfg);
    REQUIRE(records.size() == 30);
    for (const auto& rec : records) {
        REQUIRE_FALSE(rec.failed());
        CHECK(rec.flags.at("audit_passed"));
    }
}

TEST_CASE("smallball suite passes on every trial") {
    ExperimentConfig cfg;
    cfg.experiment = "smallball_suite";
    cfg.trials = 40;
    cfg.base_seed = 77;
    cfg.workers = 2;
    const auto records = run_suite(cfg);
    for (const auto& rec : records) CHECK(rec.flags.at("audit_passed"));
}

TEST_CASE("identical configs reproduce identical records") {
    const ExperimentConfig cfg = parse_config(base_config());
    const auto a = run_suite(cfg);
    const auto b = run_suite(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        Json ja = record_to_json(a[i]);
        Json jb = record_to_json(b[i]);
        ja.erase("wall_time_ms");
        jb.erase("wall_time_ms");
        CHECK(ja.dump() == jb.dump());
    }
}

TEST_CASE("worker count does not change emitted bytes") {
    ExperimentConfig cfg = parse_config(base_config());
    cfg.output_path = "/tmp/deloclab_workers1";
    cfg.workers = 1;
    write_outputs(cfg, run_suite(cfg));
    cfg.output_path = "/tmp/deloclab_workers4";
    cfg.workers = 4;
    write_outputs(cfg, run_suite(cfg));
    CHECK(strip_timing(slurp("/tmp/deloclab_workers1.jsonl")) ==
          strip_timing(slurp("/tmp/deloclab_workers4.jsonl")));
    std::remove("/tmp/deloclab_workers1.jsonl");
    std::remove("/tmp/deloclab_workers4.jsonl");
}

TEST_CASE("summarize: exact counts and the Wilson oracle") {
    std::vector<TrialRecord> records(100);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].trial_index = static_cast<std::int64_t>(i);
        records[i].metrics["m"] = 0.5;
    }
    const auto below = summarize(records, "m", {0.4});
    CHECK(below.empirical_prob[0] == 0.0);
    const auto above = summarize(records, "m", {0.6});
    CHECK(above.empirical_prob[0] == 1.0);
    CHECK(above.wilson_hi[0] == doctest::Approx(1.0));

    CHECK_THROWS_AS(summarize(records, "absent", {0.5}), ParameterError);

    // Synthetic Bernoulli(0.3) indicator metric.
    Rng rng(8);
    std::vector<TrialRecord> bern(1000);
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < bern.size(); ++i) {
        const bool hit = rng.uniform01() < 0.3;
        hits += hit;
        bern[i].metrics["x"] = hit ? 0.0 : 1.0;
    }
    const auto s = summarize(bern, "x", {0.5});
    CHECK(s.empirical_prob[0] == doctest::Approx(static_cast<double>(hits) / 1000.0));
    CHECK(s.wilson_lo[0] <= 0.3);
    CHECK(s.wilson_hi[0] >= 0.3);

    // Closed-form Wilson endpoints against the defining-inequality scan.
    for (const auto& [succ, n] : std::vector<std::pair<std::int64_t, std::int64_t>>{
             {0, 50}, {1, 50}, {25, 50}, {50, 50}, {3, 1000}, {997, 1000}, {0, 7}, {7, 7},
             {13, 40}, {2, 9}, {800, 1000}, {17, 17}, {1, 2}, {5, 6}, {33, 100}, {66, 100},
             {10, 10000}, {9990, 10000}, {123, 456}, {400, 401}}) {
        const auto w = wilson_interval(succ, n);
        const auto [lo, hi] = oracle::wilson_scan(succ, n);
        CHECK(w.lo == doctest::Approx(lo).epsilon(1e-3));
        CHECK(w.hi == doctest::Approx(hi).epsilon(1e-3));
    }
}

TEST_CASE("summarize skips failed trials and counts them") {
    std::vector<TrialRecord> records(10);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].trial_index = static_cast<std::int64_t>(i);
        if (i < 3) {
            records[i].flags["failed"] = true;
        } else {
            records[i].metrics["m"] = 1.0;
        }
    }
    const auto s = summarize(records, "m", {2.0});
    CHECK(s.n == 7);
    CHECK(s.failed == 3);
    CHECK(s.empirical_prob[0] == 1.0);
}

TEST_CASE("jsonl round trip is lossless") {
    ExperimentConfig cfg = parse_config(base_config());
    const auto records = run_suite(cfg);
    emit_jsonl(records, "/tmp/deloclab_roundtrip.jsonl");
    const auto loaded = read_jsonl("/tmp/deloclab_roundtrip.jsonl");
    REQUIRE(loaded.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(record_to_json(records[i]).dump() == record_to_json(loaded[i]).dump());
    std::remove("/tmp/deloclab_roundtrip.jsonl");
}

TEST_CASE("csv layout: header plus fixed columns plus metric and flag keys") {
    std::vector<TrialRecord> records(2);
    records[0].trial_index = 0;
    records[0].metrics = {{"alpha", 1.0}, {"beta", 2.0}};
    records[0].flags = {{"ok", true}};
    records[1].trial_index = 1;
    records[1].metrics = {{"alpha", 3.0}};
    records[1].flags = {{"ok", false}, {"extra", true}};
    emit_csv(records, "/tmp/deloclab_test.csv");
    const std::string csv = slurp("/tmp/deloclab_test.csv");
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    CHECK(header == "trial_index,seed,wall_time_ms,alpha,beta,extra,ok");
    // 3 fixed + union of metric and flag keys.
    CHECK(std::count(header.begin(), header.end(), ',') == 6);
    std::remove("/tmp/deloclab_test.csv");

    emit_csv({}, "/tmp/deloclab_empty.csv");
    const std::string empty_csv = slurp("/tmp/deloclab_empty.csv");
    CHECK(empty_csv == "trial_index,seed,wall_time_ms\r\n");
    std::remove("/tmp/deloclab_empty.csv");
}

TEST_CASE("metadata sidecar carries the config hash and fitted constants") {
    ExperimentConfig cfg = parse_config(base_config());
    cfg.output_path = "/tmp/deloclab_meta_test";
    write_outputs(cfg, run_suite(cfg), {{"fitted_C", 2.5}});
    const Json meta = Json::parse(slurp("/tmp/deloclab_meta_test.meta.json"));
    CHECK(meta.at("config_hash").get<std::uint64_t>() == fnv1a_hash(cfg.raw.dump()));
    CHECK(meta.at("fitted_constants").at("fitted_C").get<double>() == 2.5);
    CHECK(meta.at("code_version").get<std::string>() == kCodeVersion);
    for (const auto& suffix : {".jsonl", ".csv", ".meta.json"})
        std::remove(("/tmp/deloclab_meta_test" + std::string(suffix)).c_str());
}

TEST_CASE("failed trials become flagged records, not aborts") {
    const auto records = detail::run_trial_loop(4, 2, 7, [](TrialRecord& rec) {
        if (rec.trial_index % 2 == 1) throw NumericError("synthetic failure");
        rec.metrics["ok_metric"] = 1.0;
    });
    REQUIRE(records.size() == 4);
    CHECK_FALSE(records[0].failed());
    CHECK(records[1].failed());
    CHECK(records[1].metrics.empty());
    CHECK_FALSE(records[2].failed());
    CHECK(records[3].failed());
    const auto s = summarize(records, "ok_metric", {2.0});
    CHECK(s.n == 2);
    CHECK(s.failed == 2);
    CHECK(s.empirical_prob[0] == 1.0);
}
