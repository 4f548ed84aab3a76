#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "aod/date.hpp"
#include "aod/geo_grid.hpp"
#include "aod/stations.hpp"

namespace aod {

// Station daily mean paired with the same-day value of its nearest grid cell.
struct CollocatedPair {
    Site site;
    std::uint32_t date = 0;
    double merra_aod = 0.0;
    double aeronet_aod = 0.0;
    double distance_km = 0.0;
};

// Supervised example: yesterday's patch, today's station truth.
struct Sample {
    Patch patch;
    double target = 0.0;
    Site site;
    std::uint32_t date = 0; // day t; the patch is from t-1
};

// Daily fields keyed by date. Dates are unique by construction.
using GridSeries = std::map<std::uint32_t, GridField>;

inline GridSeries make_series(std::vector<GridField> fields) {
    GridSeries series;
    for (GridField& f : fields) {
        auto [it, inserted] = series.emplace(f.date, std::move(f));
        if (!inserted) throw DataError("grid series: duplicate date " + std::to_string(it->first));
    }
    return series;
}

struct CollocateStats {
    std::size_t paired = 0;
    std::size_t date_absent = 0;
    std::size_t missing_cell = 0;
};

// One pair per record whose date is present and whose nearest cell is not
// missing. Output is sorted by (site, date) regardless of input order.
inline std::vector<CollocatedPair> collocate(const GridSeries& series,
                                             const std::vector<StationRecord>& records,
                                             CollocateStats* stats = nullptr) {
    CollocateStats local;
    std::vector<CollocatedPair> pairs;
    pairs.reserve(records.size());
    for (const StationRecord& rec : records) {
        auto it = series.find(rec.date);
        if (it == series.end()) {
            ++local.date_absent;
            continue;
        }
        const GridField& field = it->second;
        GridIndex idx = nearest_index(field.spec, rec.site.lat, rec.site.lon);
        float cell = field.at(idx.row, idx.col);
        if (std::isnan(cell)) {
            ++local.missing_cell;
            continue;
        }
        double dist = haversine_km(rec.site.lat, rec.site.lon, field.spec.lat_of_row(idx.row),
                                   field.spec.lon_of_col(idx.col));
        pairs.push_back({rec.site, rec.date, static_cast<double>(cell), rec.aod550, dist});
        ++local.paired;
    }
    std::sort(pairs.begin(), pairs.end(), [](const CollocatedPair& a, const CollocatedPair& b) {
        return a.site.name != b.site.name ? a.site.name < b.site.name : a.date < b.date;
    });
    if (stats) *stats = local;
    return pairs;
}

// Every record lands in exactly one bucket; buckets sum to the record count.
struct SampleDropCounts {
    std::size_t sampled = 0;
    std::size_t date_absent = 0;       // record's own day not in the series
    std::size_t no_previous_day = 0;   // day t-1 not in the series
    std::size_t latitude_out_of_range = 0;
    std::size_t missing_cells = 0;

    std::size_t total() const {
        return sampled + date_absent + no_previous_day + latitude_out_of_range + missing_cells;
    }
};

// Builds (t-1 patch, t truth) samples. Patches with any missing cell are
// dropped, not imputed. Output sorted by (site, date).
inline std::vector<Sample> build_samples(const GridSeries& series,
                                         const std::vector<StationRecord>& records,
                                         SampleDropCounts* drops = nullptr,
                                         std::size_t patch_size = 30) {
    SampleDropCounts local;
    std::vector<Sample> samples;
    samples.reserve(records.size());
    const std::size_t half = patch_size / 2;
    for (const StationRecord& rec : records) {
        if (series.find(rec.date) == series.end()) {
            ++local.date_absent;
            continue;
        }
        auto it = series.find(prev_day(rec.date));
        if (it == series.end()) {
            ++local.no_previous_day;
            continue;
        }
        const GridField& field = it->second;
        GridIndex idx = nearest_index(field.spec, rec.site.lat, rec.site.lon);
        if (idx.row < half || idx.row + (patch_size - half) > field.spec.nlat) {
            ++local.latitude_out_of_range;
            continue;
        }
        Patch patch = extract_patch(field, idx, patch_size);
        if (!patch.valid) {
            ++local.missing_cells;
            continue;
        }
        samples.push_back({std::move(patch), rec.aod550, rec.site, rec.date});
        ++local.sampled;
    }
    std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
        return a.site.name != b.site.name ? a.site.name < b.site.name : a.date < b.date;
    });
    if (drops) *drops = local;
    return samples;
}

// Worst-case distance from a point to its assigned node, i.e. the supremum of
// haversine distance over the cell quadrant nearest the equator, found by
// dense sampling (>= 10^4 points).
inline double max_collocation_distance(const GridSpec& spec) {
    spec.validate();
    std::size_t eq_row = 0;
    double best = std::fabs(spec.lat_of_row(0));
    for (std::size_t r = 1; r < spec.nlat; ++r) {
        double a = std::fabs(spec.lat_of_row(r));
        if (a < best) {
            best = a;
            eq_row = r;
        }
    }
    const double lat_c = spec.lat_of_row(eq_row);
    const double lon_c = spec.lon_of_col(0);

    // Points within [0, dlat/2] x [0, dlon/2] of a node round to that node.
    // Both signs of the latitude offset are scanned; the longitude side is
    // symmetric on a sphere.
    const int steps = 101; // 101^2 > 10^4 sample points per quadrant
    double sup = 0.0;
    for (int sign : {-1, 1}) {
        for (int i = 0; i < steps; ++i) {
            double a = sign * (spec.dlat / 2.0) * (static_cast<double>(i) / (steps - 1));
            double lat = lat_c + a;
            if (lat < -90.0 || lat > 90.0) continue;
            for (int j = 0; j < steps; ++j) {
                double b = (spec.dlon / 2.0) * (static_cast<double>(j) / (steps - 1));
                sup = std::max(sup, haversine_km(lat, lon_c + b, lat_c, lon_c));
            }
        }
    }
    return sup;
}

} // namespace aod
