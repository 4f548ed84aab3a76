#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aod/collocation.hpp"
#include "aod/errors.hpp"
#include "aod/stations.hpp"

namespace aod {

// Error triple with e = pred - truth, so a low-biased model has negative MBE.
// Stats of an empty partition keep n = 0 and NaN metrics ("absent").
struct ErrorStats {
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double mae = std::numeric_limits<double>::quiet_NaN();
    double mbe = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 0;
};

struct BreakdownReport {
    ErrorStats normal;
    ErrorStats extreme;
    ErrorStats all;
    double threshold = 0.7;
};

struct SiteStats {
    Site site;
    ErrorStats stats;
    std::size_t extreme_count = 0;
    double variance = 0.0; // population variance of the site's truth values
};

// Baseline and model errors over the same pairs, Table-style.
struct ModelComparison {
    BreakdownReport baseline;
    BreakdownReport model;
};

enum class RankKey { ExtremeCount, Variance, Rmse };

// All accumulation is in 64-bit regardless of the storage precision upstream.
inline ErrorStats compute_stats(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw DataError("compute_stats: length mismatch");
    if (pred.empty()) throw DataError("compute_stats: empty input");
    double se = 0.0, ae = 0.0, be = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double e = pred[i] - truth[i];
        se += e * e;
        ae += std::fabs(e);
        be += e;
    }
    double n = static_cast<double>(pred.size());
    return {std::sqrt(se / n), ae / n, be / n, pred.size()};
}

namespace detail {

inline ErrorStats stats_or_empty(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.empty()) return ErrorStats{};
    return compute_stats(pred, truth);
}

// Partition on the truth side and compute stats per bucket. `preds` may
// override the pair's reanalysis value (used for model comparisons).
inline BreakdownReport breakdown_impl(const std::vector<CollocatedPair>& pairs,
                                      const double* preds, double threshold) {
    std::vector<double> np, nt, ep, et, ap, at;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        double pred = preds ? preds[i] : pairs[i].merra_aod;
        double truth = pairs[i].aeronet_aod;
        if (classify_extreme(truth, threshold)) {
            ep.push_back(pred);
            et.push_back(truth);
        } else {
            np.push_back(pred);
            nt.push_back(truth);
        }
        ap.push_back(pred);
        at.push_back(truth);
    }
    return {stats_or_empty(np, nt), stats_or_empty(ep, et), stats_or_empty(ap, at), threshold};
}

} // namespace detail

inline BreakdownReport breakdown(const std::vector<CollocatedPair>& pairs, double threshold = 0.7) {
    return detail::breakdown_impl(pairs, nullptr, threshold);
}

// Per-site stats over collocated pairs. Sites with fewer than `min_obs`
// pairs are filtered out (the reference analysis keeps sites with more than
// 365 observations, i.e. min_obs = 366). Output sorted by site name.
inline std::vector<SiteStats> per_site(const std::vector<CollocatedPair>& pairs,
                                       std::size_t min_obs = 0, double threshold = 0.7) {
    std::map<std::string, std::vector<const CollocatedPair*>> groups;
    for (const CollocatedPair& p : pairs) groups[p.site.name].push_back(&p);

    std::vector<SiteStats> out;
    for (const auto& [name, group] : groups) {
        if (group.size() < min_obs) continue;
        SiteStats s;
        s.site = group.front()->site;
        std::vector<double> pred, truth;
        pred.reserve(group.size());
        truth.reserve(group.size());
        double mean = 0.0;
        for (const CollocatedPair* p : group) {
            pred.push_back(p->merra_aod);
            truth.push_back(p->aeronet_aod);
            mean += p->aeronet_aod;
            if (classify_extreme(p->aeronet_aod, threshold)) ++s.extreme_count;
        }
        mean /= static_cast<double>(group.size());
        double var = 0.0;
        for (double t : truth) var += (t - mean) * (t - mean);
        s.variance = var / static_cast<double>(group.size());
        s.stats = compute_stats(pred, truth);
        out.push_back(std::move(s));
    }
    return out;
}

// Top-k by the chosen key, descending; ties break by site name ascending.
inline std::vector<SiteStats> rank_sites(std::vector<SiteStats> stats, RankKey key, std::size_t k) {
    if (k < 1) throw DataError("rank_sites: k must be >= 1");
    auto key_of = [key](const SiteStats& s) -> double {
        switch (key) {
            case RankKey::ExtremeCount: return static_cast<double>(s.extreme_count);
            case RankKey::Variance: return s.variance;
            case RankKey::Rmse: return s.stats.rmse;
        }
        return 0.0;
    };
    std::stable_sort(stats.begin(), stats.end(), [&](const SiteStats& a, const SiteStats& b) {
        double ka = key_of(a), kb = key_of(b);
        if (ka != kb) return ka > kb;
        return a.site.name < b.site.name;
    });
    if (stats.size() > k) stats.resize(k);
    return stats;
}

// Reanalysis vs model over identical pairs. model_preds[i] belongs to pairs[i].
inline ModelComparison compare_models(const std::vector<CollocatedPair>& pairs,
                                      std::span<const double> model_preds, double threshold = 0.7) {
    if (model_preds.size() != pairs.size())
        throw DataError("compare_models: prediction list not aligned with pairs");
    return {detail::breakdown_impl(pairs, nullptr, threshold),
            detail::breakdown_impl(pairs, model_preds.data(), threshold)};
}

} // namespace aod
