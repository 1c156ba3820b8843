#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deloclab/errors.hpp"

namespace deloclab {

using Json = nlohmann::ordered_json;

struct TrialRecord {
    std::int64_t trial_index = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;  // sorted keys give a stable order
    std::map<std::string, bool> flags;
    std::int64_t wall_time_ms = 0;

    bool failed() const {
        const auto it = flags.find("failed");
        return it != flags.end() && it->second;
    }
};

inline Json record_to_json(const TrialRecord& r) {
    Json j;
    j["trial_index"] = r.trial_index;
    j["seed"] = r.seed;
    Json metrics = Json::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = v;
    j["metrics"] = metrics;
    Json flags = Json::object();
    for (const auto& [k, v] : r.flags) flags[k] = v;
    j["flags"] = flags;
    j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

inline TrialRecord record_from_json(const Json& j) {
    TrialRecord r;
    r.trial_index = j.at("trial_index").get<std::int64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
    for (const auto& [k, v] : j.at("flags").items()) r.flags[k] = v.get<bool>();
    r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
    return r;
}

// ---------------------------------------------------------------------------
// Summaries: empirical P(metric <= threshold) with Wilson 95% intervals.
// ---------------------------------------------------------------------------

struct WilsonInterval {
    double lo = 0.0;
    double hi = 1.0;
};

inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t n, double z = 1.959963984540054) {
    WilsonInterval w;
    if (n <= 0) return w;
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = phat + z2 / (2.0 * nn);
    const double spread = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn));
    w.lo = std::max(0.0, (center - spread) / denom);
    w.hi = std::min(1.0, (center + spread) / denom);
    return w;
}

struct SummaryStats {
    std::string metric;
    std::vector<double> threshold_grid;
    std::vector<double> empirical_prob;
    std::vector<double> wilson_lo;
    std::vector<double> wilson_hi;
    std::int64_t n = 0;        // trials included
    std::int64_t failed = 0;   // trials excluded
};

inline SummaryStats summarize(const std::vector<TrialRecord>& records, const std::string& metric,
                              const std::vector<double>& thresholds) {
    SummaryStats s;
    s.metric = metric;
    s.threshold_grid = thresholds;
    std::vector<double> values;
    for (const auto& r : records) {
        if (r.failed()) {
            ++s.failed;
            continue;
        }
        const auto it = r.metrics.find(metric);
        if (it == r.metrics.end())
            throw ParameterError("summarize: metric '" + metric + "' missing from record " +
                                 std::to_string(r.trial_index));
        values.push_back(it->second);
    }
    s.n = static_cast<std::int64_t>(values.size());
    for (const double thr : thresholds) {
        std::int64_t count = 0;
        for (const double v : values)
            if (v <= thr) ++count;
        const double p = s.n > 0 ? static_cast<double>(count) / static_cast<double>(s.n) : 0.0;
        const WilsonInterval w = wilson_interval(count, s.n);
        s.empirical_prob.push_back(p);
        s.wilson_lo.push_back(w.lo);
        s.wilson_hi.push_back(w.hi);
    }
    return s;
}

inline Json summary_to_json(const SummaryStats& s) {
    Json j;
    j["metric"] = s.metric;
    j["threshold_grid"] = s.threshold_grid;
    j["empirical_prob"] = s.empirical_prob;
    j["wilson_lo"] = s.wilson_lo;
    j["wilson_hi"] = s.wilson_hi;
    j["n"] = s.n;
    j["failed"] = s.failed;
    return j;
}

// ---------------------------------------------------------------------------
// Emission: JSONL (one record per line, stable key order), RFC-4180 CSV with
// flattened metrics/flags, and a JSON metadata sidecar.
// ---------------------------------------------------------------------------

inline void emit_jsonl(const std::vector<TrialRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_jsonl: cannot open " + path);
    for (const auto& r : records) out << record_to_json(r).dump() << "\n";
}

inline std::vector<TrialRecord> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_jsonl: cannot open " + path);
    std::vector<TrialRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(record_from_json(Json::parse(line)));
    }
    return records;
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline void emit_csv(const std::vector<TrialRecord>& records, const std::string& path) {
    std::set<std::string> metric_keys, flag_keys;
    for (const auto& r : records) {
        for (const auto& [k, _] : r.metrics) metric_keys.insert(k);
        for (const auto& [k, _] : r.flags) flag_keys.insert(k);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_csv: cannot open " + path);
    out << "trial_index,seed,wall_time_ms";
    for (const auto& k : metric_keys) out << "," << detail::csv_escape(k);
    for (const auto& k : flag_keys) out << "," << detail::csv_escape(k);
    out << "\r\n";
    for (const auto& r : records) {
        out << r.trial_index << "," << r.seed << "," << r.wall_time_ms;
        for (const auto& k : metric_keys) {
            out << ",";
            const auto it = r.metrics.find(k);
            if (it != r.metrics.end()) out << detail::format_double(it->second);
        }
        for (const auto& k : flag_keys) {
            out << ",";
            const auto it = r.flags.find(k);
            if (it != r.flags.end()) out << (it->second ? "true" : "false");
        }
        out << "\r\n";
    }
}

inline std::uint64_t fnv1a_hash(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline void emit_metadata(const std::string& path, const Json& config,
                          const std::map<std::string, double>& fitted_constants,
                          const std::string& code_version) {
    Json j;
    j["config_hash"] = fnv1a_hash(config.dump());
    j["code_version"] = code_version;
    Json fitted = Json::object();
    for (const auto& [k, v] : fitted_constants) fitted[k] = v;
    j["fitted_constants"] = fitted;
    j["config"] = config;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_metadata: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace deloclab
