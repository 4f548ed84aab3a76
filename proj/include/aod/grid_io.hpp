#pragma once

#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "aod/date.hpp"
#include "aod/errors.hpp"
#include "aod/geo_grid.hpp"

namespace aod {

// AODGRID v1: little-endian binary container for one daily field.
//
//   magic "AODG" | version u8 = 1 | nlat u32 | nlon u32
//   | lat0 f64 | dlat f64 | lon0 f64 | dlon f64 | date u32 (YYYYMMDD)
//   | nlat*nlon binary32 values, row-major, missing = quiet NaN
//
// The header fields above sum to 49 bytes.

constexpr std::size_t kGridHeaderBytes = 49;
constexpr char kGridMagic[4] = {'A', 'O', 'D', 'G'};

namespace detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    // The build targets little-endian hosts; memcpy already yields LE order.
    out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get_le(const std::uint8_t* data) {
    T value;
    std::memcpy(&value, data, sizeof(T));
    return value;
}

} // namespace detail

inline std::vector<std::uint8_t> write_grid_file(const GridField& field) {
    const GridSpec& spec = field.spec;
    spec.validate();
    if (spec.nlat > std::numeric_limits<std::uint32_t>::max() ||
        spec.nlon > std::numeric_limits<std::uint32_t>::max())
        throw GridFormatError(GridFormatError::Kind::DimOverflow,
                              "grid dimensions exceed 32-bit unsigned range");
    if (field.values.size() != spec.nlat * spec.nlon)
        throw GridFormatError(GridFormatError::Kind::InconsistentDims,
                              "value count does not match nlat*nlon");

    std::vector<std::uint8_t> out;
    out.reserve(kGridHeaderBytes + field.values.size() * 4);
    out.insert(out.end(), kGridMagic, kGridMagic + 4);
    out.push_back(1);
    detail::put_le(out, static_cast<std::uint32_t>(spec.nlat));
    detail::put_le(out, static_cast<std::uint32_t>(spec.nlon));
    detail::put_le(out, spec.lat0);
    detail::put_le(out, spec.dlat);
    detail::put_le(out, spec.lon0);
    detail::put_le(out, spec.dlon);
    detail::put_le(out, field.date);
    for (float v : field.values) detail::put_le(out, v);
    return out;
}

inline GridField parse_grid_file(const std::uint8_t* data, std::size_t len) {
    if (len < 5) throw GridFormatError(GridFormatError::Kind::Truncated, "file shorter than magic+version");
    if (std::memcmp(data, kGridMagic, 4) != 0)
        throw GridFormatError(GridFormatError::Kind::BadMagic,
                              "bad magic, expected \"AODG\"");
    if (data[4] != 1)
        throw GridFormatError(GridFormatError::Kind::UnsupportedVersion,
                              "unsupported AODGRID version " + std::to_string(data[4]));
    if (len < kGridHeaderBytes)
        throw GridFormatError(GridFormatError::Kind::Truncated, "truncated header");

    GridField field;
    field.spec.nlat = detail::get_le<std::uint32_t>(data + 5);
    field.spec.nlon = detail::get_le<std::uint32_t>(data + 9);
    field.spec.lat0 = detail::get_le<double>(data + 13);
    field.spec.dlat = detail::get_le<double>(data + 21);
    field.spec.lon0 = detail::get_le<double>(data + 29);
    field.spec.dlon = detail::get_le<double>(data + 37);
    field.date = detail::get_le<std::uint32_t>(data + 45);

    if (field.spec.nlat == 0 || field.spec.nlon == 0)
        throw GridFormatError(GridFormatError::Kind::InconsistentDims, "zero grid dimension");
    const std::uint64_t cells =
        static_cast<std::uint64_t>(field.spec.nlat) * static_cast<std::uint64_t>(field.spec.nlon);
    const std::uint64_t expected = kGridHeaderBytes + cells * 4;
    if (len < expected)
        throw GridFormatError(GridFormatError::Kind::Truncated,
                              "truncated payload: expected " + std::to_string(expected) +
                                  " bytes, got " + std::to_string(len));
    if (len > expected)
        throw GridFormatError(GridFormatError::Kind::InconsistentDims,
                              "payload longer than nlat*nlon values");
    try {
        field.spec.validate();
    } catch (const DataError& e) {
        throw GridFormatError(GridFormatError::Kind::InconsistentDims, e.what());
    }
    if (!valid_date(field.date))
        throw GridFormatError(GridFormatError::Kind::InconsistentDims,
                              "impossible date " + std::to_string(field.date));

    field.values.resize(cells);
    std::memcpy(field.values.data(), data + kGridHeaderBytes, cells * 4);
    return field;
}

inline GridField parse_grid_file(const std::vector<std::uint8_t>& bytes) {
    return parse_grid_file(bytes.data(), bytes.size());
}

} // namespace aod
