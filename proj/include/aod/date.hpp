#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include "aod/errors.hpp"

namespace aod {

// Calendar days are passed around as packed u32 YYYYMMDD (the on-disk form);
// arithmetic goes through std::chrono.

inline std::chrono::year_month_day to_ymd(std::uint32_t yyyymmdd) {
    return std::chrono::year_month_day{
        std::chrono::year(static_cast<int>(yyyymmdd / 10000)),
        std::chrono::month(yyyymmdd / 100 % 100),
        std::chrono::day(yyyymmdd % 100)};
}

inline std::uint32_t from_ymd(std::chrono::year_month_day ymd) {
    return static_cast<std::uint32_t>(static_cast<int>(ymd.year())) * 10000u +
           static_cast<unsigned>(ymd.month()) * 100u + static_cast<unsigned>(ymd.day());
}

inline bool valid_date(std::uint32_t yyyymmdd) {
    return to_ymd(yyyymmdd).ok();
}

inline std::uint32_t add_days(std::uint32_t yyyymmdd, int days) {
    auto d = std::chrono::sys_days(to_ymd(yyyymmdd)) + std::chrono::days(days);
    return from_ymd(std::chrono::year_month_day(d));
}

inline std::uint32_t prev_day(std::uint32_t yyyymmdd) { return add_days(yyyymmdd, -1); }

// "2015-06-01" -> 20150601. Throws DataError on malformed or impossible dates.
inline std::uint32_t parse_iso_date(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw DataError("bad date '" + text + "': expected YYYY-MM-DD");
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (text[i] < '0' || text[i] > '9')
            throw DataError("bad date '" + text + "': expected YYYY-MM-DD");
    std::uint32_t value =
        static_cast<std::uint32_t>(std::stoul(text.substr(0, 4))) * 10000u +
        static_cast<std::uint32_t>(std::stoul(text.substr(5, 2))) * 100u +
        static_cast<std::uint32_t>(std::stoul(text.substr(8, 2)));
    if (!valid_date(value)) throw DataError("impossible date '" + text + "'");
    return value;
}

inline std::string format_iso_date(std::uint32_t yyyymmdd) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04u-%02u-%02u", yyyymmdd / 10000, yyyymmdd / 100 % 100,
                  yyyymmdd % 100);
    return buf;
}

} // namespace aod
