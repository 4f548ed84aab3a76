#pragma once

#include <stdexcept>
#include <string>

namespace aod {

// Error taxonomy mirrors the CLI exit codes: usage -> 1, data -> 2, numeric -> 3.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Binary grid format failures, one kind per corruption class.
class GridFormatError : public DataError {
public:
    enum class Kind {
        BadMagic,
        UnsupportedVersion,
        Truncated,
        InconsistentDims,
        DimOverflow,
    };

    GridFormatError(Kind kind, const std::string& msg) : DataError(msg), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

} // namespace aod
