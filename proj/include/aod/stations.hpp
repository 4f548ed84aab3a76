#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aod/date.hpp"
#include "aod/errors.hpp"

namespace aod {

struct Site {
    std::string name;
    double lat = 0.0;
    double lon = 0.0;

    bool operator==(const Site&) const = default;
};

// One raw row: AOD at 500 nm plus the 440-675 nm Angstrom exponent.
// Several rows may share a site-day; daily averaging happens later.
struct StationObservation {
    Site site;
    std::uint32_t date = 0;
    double aod500 = 0.0;
    double alpha = 0.0;
};

// Daily ground truth at 550 nm.
struct StationRecord {
    Site site;
    std::uint32_t date = 0;
    double aod550 = 0.0;
    std::size_t n_obs = 0;
};

// tau(l2) = tau(l1) * (l2/l1)^(-alpha)
inline double angstrom_convert(double aod_from, double alpha, double lambda_from = 500.0,
                               double lambda_to = 550.0) {
    if (aod_from < 0.0) throw DataError("angstrom_convert: negative AOD");
    if (lambda_from <= 0.0 || lambda_to <= 0.0)
        throw DataError("angstrom_convert: wavelengths must be positive");
    return aod_from * std::pow(lambda_to / lambda_from, -alpha);
}

inline bool classify_extreme(double aod, double threshold = 0.7) {
    return aod > threshold; // strict
}

// Mean of the 550 nm-converted values of one site-day.
inline StationRecord daily_mean(const std::vector<StationObservation>& observations) {
    if (observations.empty()) throw DataError("daily_mean: empty observation list");
    const StationObservation& first = observations.front();
    double sum = 0.0;
    for (const StationObservation& obs : observations) {
        if (obs.site.name != first.site.name) throw DataError("daily_mean: mixed sites");
        if (obs.date != first.date) throw DataError("daily_mean: mixed dates");
        sum += angstrom_convert(obs.aod500, obs.alpha);
    }
    return {first.site, first.date, sum / static_cast<double>(observations.size()),
            observations.size()};
}

namespace detail {

inline double parse_csv_number(const std::string& token, std::size_t line, const char* what) {
    try {
        std::size_t used = 0;
        double v = std::stod(token, &used);
        if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw DataError("stations csv line " + std::to_string(line) + ": non-numeric " +
                        std::string(what) + " '" + token + "'");
    }
}

} // namespace detail

constexpr const char* kStationCsvHeader = "site,lat,lon,date,aod_500nm,angstrom_440_675";

// Plain comma-separated rows, no quoting. Errors carry 1-based line numbers.
inline std::vector<StationObservation> parse_station_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("stations csv: empty input, missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kStationCsvHeader)
        throw DataError("stations csv line 1: missing or wrong header, expected '" +
                        std::string(kStationCsvHeader) + "'");

    std::vector<StationObservation> observations;
    std::map<std::string, std::pair<double, double>> seen_coords;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> fields;
        std::string token;
        std::istringstream row(line);
        while (std::getline(row, token, ',')) fields.push_back(token);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 6)
            throw DataError("stations csv line " + std::to_string(line_no) + ": expected 6 fields, got " +
                            std::to_string(fields.size()));

        StationObservation obs;
        obs.site.name = fields[0];
        if (obs.site.name.empty())
            throw DataError("stations csv line " + std::to_string(line_no) + ": empty site name");
        obs.site.lat = detail::parse_csv_number(fields[1], line_no, "lat");
        obs.site.lon = detail::parse_csv_number(fields[2], line_no, "lon");
        if (obs.site.lat < -90.0 || obs.site.lat > 90.0)
            throw DataError("stations csv line " + std::to_string(line_no) + ": latitude " +
                            fields[1] + " out of [-90, 90]");
        try {
            obs.date = parse_iso_date(fields[3]);
        } catch (const DataError& e) {
            throw DataError("stations csv line " + std::to_string(line_no) + ": " + e.what());
        }
        obs.aod500 = detail::parse_csv_number(fields[4], line_no, "aod_500nm");
        if (obs.aod500 < 0.0)
            throw DataError("stations csv line " + std::to_string(line_no) + ": negative aod_500nm");
        obs.alpha = detail::parse_csv_number(fields[5], line_no, "angstrom_440_675");

        auto [it, inserted] = seen_coords.emplace(obs.site.name,
                                                  std::make_pair(obs.site.lat, obs.site.lon));
        if (!inserted && (it->second.first != obs.site.lat || it->second.second != obs.site.lon))
            throw DataError("stations csv line " + std::to_string(line_no) + ": site '" +
                            obs.site.name + "' redefined with different coordinates");

        observations.push_back(std::move(obs));
    }
    return observations;
}

// Groups observations into per-site-day records, sorted by (site, date).
inline std::vector<StationRecord> build_daily_records(
    const std::vector<StationObservation>& observations) {
    std::map<std::pair<std::string, std::uint32_t>, std::vector<StationObservation>> groups;
    for (const StationObservation& obs : observations)
        groups[{obs.site.name, obs.date}].push_back(obs);

    std::vector<StationRecord> records;
    records.reserve(groups.size());
    for (const auto& [key, group] : groups) records.push_back(daily_mean(group));
    return records;
}

} // namespace aod
