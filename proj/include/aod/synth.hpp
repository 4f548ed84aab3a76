#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "aod/collocation.hpp"
#include "aod/date.hpp"
#include "aod/errors.hpp"
#include "aod/geo_grid.hpp"
#include "aod/rng.hpp"
#include "aod/stations.hpp"
#include "aod/util.hpp"

namespace aod {

// Desk-scale sub-grid at reanalysis resolution: 60x60 cells, 0.5 x 0.625
// degrees, centered on the equator.
inline GridSpec default_synth_spec() {
    return {-15.0, 0.5, 60, 60.0, 0.625, 60};
}

struct SynthConfig {
    std::uint64_t seed = 7;
    std::size_t days = 400;
    GridSpec spec = default_synth_spec();
    std::size_t sites = 12;
    double extreme_fraction = 0.15; // target share of truth values > 0.7
    double noise_sd = 0.02;
    std::uint32_t start_date = 20160101;

    void validate() const {
        spec.validate();
        if (days < 2) throw DataError("synth: need at least 2 days (day t-1 feeds day t)");
        if (sites < 1) throw DataError("synth: need at least 1 site");
        if (!(extreme_fraction > 0.0 && extreme_fraction < 1.0))
            throw DataError("synth: extreme_fraction must lie in (0, 1)");
        if (noise_sd < 0.0) throw DataError("synth: negative noise_sd");
    }
};

// truth(t) = a*m + b + gain*max(0, m - start) + noise, where m is the mean
// of the central 5x5 block of the day t-1 patch at the site. The recorded
// coefficients let tests reconstruct truth exactly from the patch.
struct TruthFunction {
    double a = 1.0;
    double b = 0.02;
    double bonus_gain = 0.0;
    double bonus_start = 0.0;
    double noise_sd = 0.0;
    std::string stat = "patch_center_5x5_mean";

    double noiseless(double m) const {
        return a * m + b + bonus_gain * std::max(0.0, m - bonus_start);
    }
};

// Central 5x5 mean of a patch produced by extract_patch with the default
// 30-cell window (center node sits at patch offset 15).
inline double patch_center_stat(const Patch& patch) {
    const std::size_t side = patch.size;
    const std::size_t c = side / 2; // 15 for the default window
    double sum = 0.0;
    for (std::size_t i = c - 2; i <= c + 2; ++i)
        for (std::size_t j = c - 2; j <= c + 2; ++j) sum += patch.values[i * side + j];
    return sum / 25.0;
}

namespace detail {

constexpr std::uint64_t kPlumeStream = 0x504c554d; // "PLUM"
constexpr std::uint64_t kSiteStream = 0x53495445;  // "SITE"
constexpr std::uint64_t kNoiseStream = 0x4e4f4953; // "NOIS"

struct Plume {
    double row0, col0;     // orbit center, grid units
    double row_amp, col_amp;
    double row_omega, col_omega, row_phase, col_phase;
    double sigma;          // cells
    double amp;            // peak AOD contribution
    double amp_omega, amp_phase;

    double row_at(double t) const { return row0 + row_amp * std::sin(row_omega * t + row_phase); }
    double col_at(double t) const { return col0 + col_amp * std::cos(col_omega * t + col_phase); }
    double amp_at(double t) const { return amp * (0.55 + 0.45 * std::sin(amp_omega * t + amp_phase)); }
};

inline std::vector<Plume> make_plumes(const SynthConfig& config) {
    Xoshiro256 rng(config.seed, kPlumeStream);
    const double nlat = static_cast<double>(config.spec.nlat);
    const double nlon = static_cast<double>(config.spec.nlon);
    std::vector<Plume> plumes(6);
    for (Plume& p : plumes) {
        p.row0 = rng.uniform(0.15 * nlat, 0.85 * nlat);
        p.col0 = rng.uniform(0.15 * nlon, 0.85 * nlon);
        p.row_amp = rng.uniform(3.0, 10.0);
        p.col_amp = rng.uniform(3.0, 10.0);
        p.row_omega = rng.uniform(0.05, 0.15);
        p.col_omega = rng.uniform(0.05, 0.15);
        p.row_phase = rng.uniform(0.0, 6.283185307179586);
        p.col_phase = rng.uniform(0.0, 6.283185307179586);
        p.sigma = rng.uniform(2.0, 4.5);
        p.amp = rng.uniform(0.5, 1.3);
        p.amp_omega = rng.uniform(0.02, 0.1);
        p.amp_phase = rng.uniform(0.0, 6.283185307179586);
    }
    return plumes;
}

} // namespace detail

// Smooth non-negative daily fields: 0.1 background plus drifting Gaussian
// plumes on slow sinusoidal orbits, so adjacent days stay correlated. Each
// day is a pure function of (seed, t) and is generated in parallel.
inline std::vector<GridField> gen_grid_series(const SynthConfig& config) {
    config.validate();
    const std::vector<detail::Plume> plumes = detail::make_plumes(config);

    std::vector<GridField> series(config.days);
    parallel_for(config.days, [&](std::size_t day) {
        GridField& field = series[day];
        field.spec = config.spec;
        field.date = add_days(config.start_date, static_cast<int>(day));
        field.values.resize(config.spec.nlat * config.spec.nlon);
        const double t = static_cast<double>(day);
        for (std::size_t r = 0; r < config.spec.nlat; ++r) {
            for (std::size_t c = 0; c < config.spec.nlon; ++c) {
                double v = 0.1;
                for (const detail::Plume& p : plumes) {
                    const double dr = static_cast<double>(r) - p.row_at(t);
                    const double dc = static_cast<double>(c) - p.col_at(t);
                    v += p.amp_at(t) * std::exp(-(dr * dr + dc * dc) / (2.0 * p.sigma * p.sigma));
                }
                field.at(r, c) = static_cast<float>(std::max(0.0, v));
            }
        }
    });
    return series;
}

struct SynthTruth {
    std::vector<Site> sites;
    std::vector<StationRecord> records; // dates start_date+1 .. start_date+days-1
    TruthFunction truth;
};

// Places sites on interior grid rows (at least 15 rows from the grid edge so
// the 30x30 window fits, and at least 8 degrees away from the poles) and
// synthesizes daily truth from the previous day's field. The bonus term only
// activates where the local field is high, so the grid under-predicts
// extremes by construction. The bonus knee is calibrated against the
// empirical distribution of the patch statistic to land near the requested
// extreme fraction.
inline SynthTruth gen_station_truth(const std::vector<GridField>& series, const SynthConfig& config) {
    config.validate();
    if (series.size() != config.days) throw DataError("gen_station_truth: series/config day mismatch");
    const GridSpec& spec = config.spec;
    if (spec.nlat < 31) throw DataError("gen_station_truth: grid too short for a 30-row window");

    const std::size_t row_lo = 15, row_hi = spec.nlat - 16;
    std::vector<std::size_t> rows_ok;
    for (std::size_t r = row_lo; r <= row_hi; ++r)
        if (std::fabs(spec.lat_of_row(r)) <= 82.0) rows_ok.push_back(r);
    if (rows_ok.empty()) throw DataError("gen_station_truth: no eligible site rows (poles too close)");

    SynthTruth out;
    Xoshiro256 site_rng(config.seed, detail::kSiteStream);
    std::vector<GridIndex> nodes(config.sites);
    for (std::size_t s = 0; s < config.sites; ++s) {
        GridIndex node{rows_ok[site_rng.next_below(rows_ok.size())], site_rng.next_below(spec.nlon)};
        nodes[s] = node;
        char name[32];
        std::snprintf(name, sizeof(name), "site_%03zu", s);
        // jitter below half a cell keeps the node assignment unambiguous
        out.sites.push_back({name,
                             spec.lat_of_row(node.row) + site_rng.uniform(-0.45, 0.45) * spec.dlat,
                             spec.lon_of_col(node.col) + site_rng.uniform(-0.45, 0.45) * spec.dlon});
    }

    // patch statistic per (site, predictor day)
    std::vector<std::vector<double>> stat(config.sites, std::vector<double>(config.days - 1));
    for (std::size_t s = 0; s < config.sites; ++s)
        for (std::size_t d = 0; d + 1 < config.days; ++d)
            stat[s][d] = patch_center_stat(extract_patch(series[d], nodes[s]));

    // calibrate the bonus so that roughly extreme_fraction of truths pass 0.7
    std::vector<double> all_stats;
    all_stats.reserve(config.sites * (config.days - 1));
    for (const auto& row : stat) all_stats.insert(all_stats.end(), row.begin(), row.end());
    std::sort(all_stats.begin(), all_stats.end());
    const double rank = (1.0 - config.extreme_fraction) * static_cast<double>(all_stats.size() - 1);
    const double q = all_stats[static_cast<std::size_t>(rank)];

    TruthFunction fn;
    fn.noise_sd = config.noise_sd;
    fn.bonus_start = 0.8 * q;
    const double denom = q - fn.bonus_start;
    double gain = denom > 1e-9 ? (0.7 - fn.a * q - fn.b) / denom : 1.0;
    fn.bonus_gain = std::clamp(gain, 0.25, 40.0);
    out.truth = fn;

    Xoshiro256 noise_rng(config.seed, detail::kNoiseStream);
    for (std::size_t s = 0; s < config.sites; ++s) {
        for (std::size_t d = 0; d + 1 < config.days; ++d) {
            double truth = fn.noiseless(stat[s][d]);
            if (config.noise_sd > 0.0) truth = std::max(0.0, truth + config.noise_sd * noise_rng.gaussian());
            out.records.push_back({out.sites[s], series[d + 1].date, truth, 1});
        }
    }
    return out;
}

} // namespace aod
