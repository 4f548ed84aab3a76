#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "aod/collocation.hpp"
#include "aod/metrics.hpp"
#include "aod/util.hpp"

namespace aod {

constexpr const char* kToolName = "aodbench";
constexpr const char* kToolVersion = "0.1.0";

using json = nlohmann::json;

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct InputDigest {
    std::string path;
    std::uint64_t digest = 0;
};

// Every report embeds one of these. The timestamp is the only
// run-dependent field and sits alone so determinism checks can ignore it.
inline json manifest_json(const std::string& command, const json& config,
                          const std::vector<InputDigest>& inputs) {
    json m;
    m["command"] = command;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["timestamp_utc"] = utc_timestamp();
    m["config"] = config;
    m["inputs"] = json::array();
    for (const InputDigest& in : inputs)
        m["inputs"].push_back({{"path", in.path}, {"fnv1a64", hex64(in.digest)}});
    return m;
}

// NaN is not representable in JSON; absent metrics (n = 0) become null.
inline json error_stats_json(const ErrorStats& s) {
    json j;
    j["n"] = s.n;
    if (s.n == 0) {
        j["rmse"] = nullptr;
        j["mae"] = nullptr;
        j["mbe"] = nullptr;
    } else {
        j["rmse"] = s.rmse;
        j["mae"] = s.mae;
        j["mbe"] = s.mbe;
    }
    return j;
}

inline json breakdown_json(const BreakdownReport& b) {
    return {{"normal", error_stats_json(b.normal)},
            {"extreme", error_stats_json(b.extreme)},
            {"all", error_stats_json(b.all)},
            {"threshold", b.threshold}};
}

inline json site_stats_json(const SiteStats& s) {
    json j;
    j["site"] = {{"name", s.site.name}, {"lat", s.site.lat}, {"lon", s.site.lon}};
    j["n"] = s.stats.n;
    j["rmse"] = s.stats.rmse;
    j["mae"] = s.stats.mae;
    j["mbe"] = s.stats.mbe;
    j["extreme_count"] = s.extreme_count;
    j["variance"] = s.variance;
    return j;
}

inline json ranking_json(const std::vector<SiteStats>& ranked, RankKey key) {
    json arr = json::array();
    for (const SiteStats& s : ranked) {
        json e;
        e["site"] = s.site.name;
        switch (key) {
            case RankKey::ExtremeCount: e["extreme_count"] = s.extreme_count; break;
            case RankKey::Variance: e["variance"] = s.variance; break;
            case RankKey::Rmse: e["rmse"] = s.stats.rmse; break;
        }
        arr.push_back(e);
    }
    return arr;
}

// {MERRA-2, CNN} x {RMSE, MAE, MBE} x {extreme, all}: the twelve-number
// comparison table.
inline json comparison_table_json(const ModelComparison& cmp) {
    auto row = [](const ErrorStats& merra, const ErrorStats& cnn) {
        return json{{"merra2", error_stats_json(merra)}, {"cnn", error_stats_json(cnn)}};
    };
    return {{"extreme", row(cmp.baseline.extreme, cmp.model.extreme)},
            {"all", row(cmp.baseline.all, cmp.model.all)}};
}

} // namespace aod
