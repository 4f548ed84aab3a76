#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "aod/errors.hpp"

namespace aod {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = 0.017453292519943295;

// Regular lat/lon grid geometry. Row 0 is at lat0, column 0 at lon0;
// longitude is periodic modulo 360, latitude is not.
struct GridSpec {
    double lat0 = 0.0;
    double dlat = 0.0;
    std::size_t nlat = 0;
    double lon0 = 0.0;
    double dlon = 0.0;
    std::size_t nlon = 0;

    bool operator==(const GridSpec&) const = default;

    double lat_of_row(std::size_t row) const { return lat0 + static_cast<double>(row) * dlat; }
    double lon_of_col(std::size_t col) const { return lon0 + static_cast<double>(col) * dlon; }

    void validate() const {
        if (dlat <= 0.0 || dlon <= 0.0) throw DataError("grid spec: dlat/dlon must be positive");
        if (nlat < 1 || nlon < 1) throw DataError("grid spec: empty grid");
        if (lat0 < -90.0 || lat_of_row(nlat - 1) > 90.0)
            throw DataError("grid spec: latitude rows leave [-90, 90]");
    }
};

// One daily field. Missing cells are quiet NaN; values are stored in the
// on-disk precision (binary32).
struct GridField {
    GridSpec spec;
    std::uint32_t date = 0; // YYYYMMDD
    std::vector<float> values; // row-major, nlat * nlon

    float at(std::size_t row, std::size_t col) const { return values[row * spec.nlon + col]; }
    float& at(std::size_t row, std::size_t col) { return values[row * spec.nlon + col]; }
};

struct GridIndex {
    std::size_t row = 0;
    std::size_t col = 0;
    bool operator==(const GridIndex&) const = default;
};

// 30x30 (by default) window of a field, the model input. `valid` is false
// when any cell was missing.
struct Patch {
    std::vector<double> values;
    std::size_t size = 0;
    double center_lat = 0.0;
    double center_lon = 0.0;
    std::uint32_t source_date = 0;
    bool valid = false;
};

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
    double phi1 = lat1 * kDegToRad;
    double phi2 = lat2 * kDegToRad;
    double dphi = (lat2 - lat1) * kDegToRad;
    double dlambda = (lon2 - lon1) * kDegToRad;
    double s1 = std::sin(dphi / 2.0);
    double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    if (h > 1.0) h = 1.0;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

// Half-up rounding (ties toward +inf), applied before clamping.
inline long long round_half_up(double x) {
    return static_cast<long long>(std::floor(x + 0.5));
}

// Index of the grid node nearest to (lat, lon). Latitude clamps at the grid
// edge, longitude wraps.
inline GridIndex nearest_index(const GridSpec& spec, double lat, double lon) {
    long long row = round_half_up((lat - spec.lat0) / spec.dlat);
    if (row < 0) row = 0;
    if (row >= static_cast<long long>(spec.nlat)) row = static_cast<long long>(spec.nlat) - 1;

    double rel = std::fmod(lon - spec.lon0, 360.0);
    if (rel < 0.0) rel += 360.0;
    long long col = round_half_up(rel / spec.dlon) % static_cast<long long>(spec.nlon);

    return {static_cast<std::size_t>(row), static_cast<std::size_t>(col)};
}

// Extracts a size x size window centered at (row, col). For even sizes the
// window is rows [row - size/2, row + size/2 - 1]; columns wrap modulo nlon.
// Throws if the row window leaves the grid (latitude is not periodic).
inline Patch extract_patch(const GridField& field, GridIndex center, std::size_t size = 30) {
    const GridSpec& spec = field.spec;
    const long long half = static_cast<long long>(size) / 2;
    const long long row0 = static_cast<long long>(center.row) - half;
    const long long row1 = row0 + static_cast<long long>(size) - 1;
    if (row0 < 0 || row1 >= static_cast<long long>(spec.nlat))
        throw std::out_of_range("extract_patch: latitude window [" + std::to_string(row0) + ", " +
                                std::to_string(row1) + "] out of range");

    Patch patch;
    patch.size = size;
    patch.center_lat = spec.lat_of_row(center.row);
    patch.center_lon = spec.lon_of_col(center.col);
    patch.source_date = field.date;
    patch.values.resize(size * size);
    patch.valid = true;

    const long long ncols = static_cast<long long>(spec.nlon);
    for (std::size_t i = 0; i < size; ++i) {
        const std::size_t row = static_cast<std::size_t>(row0) + i;
        for (std::size_t j = 0; j < size; ++j) {
            long long col = static_cast<long long>(center.col) - half + static_cast<long long>(j);
            col %= ncols;
            if (col < 0) col += ncols;
            double v = field.at(row, static_cast<std::size_t>(col));
            patch.values[i * size + j] = v;
            if (std::isnan(v)) patch.valid = false;
        }
    }
    return patch;
}

// Cellwise mean over several fields of the same day, skipping missing cells.
// A cell is missing in the output only if missing in every input.
inline GridField aggregate_daily_mean(const std::vector<GridField>& fields) {
    if (fields.empty()) throw DataError("aggregate_daily_mean: empty input");
    const GridField& first = fields.front();
    for (const GridField& f : fields) {
        if (!(f.spec == first.spec)) throw DataError("aggregate_daily_mean: mismatched grid specs");
        if (f.date != first.date) throw DataError("aggregate_daily_mean: mismatched dates");
    }

    GridField out;
    out.spec = first.spec;
    out.date = first.date;
    out.values.assign(first.values.size(), std::numeric_limits<float>::quiet_NaN());
    for (std::size_t cell = 0; cell < out.values.size(); ++cell) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const GridField& f : fields) {
            float v = f.values[cell];
            if (!std::isnan(v)) {
                sum += v;
                ++count;
            }
        }
        if (count > 0) out.values[cell] = static_cast<float>(sum / static_cast<double>(count));
    }
    return out;
}

} // namespace aod
