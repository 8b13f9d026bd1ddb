#pragma once

#include <stdexcept>
#include <string>

namespace clinaudit {

// Bad input data or schema (missing file, non-numeric cell, width mismatch).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure: divergence, degeneracy, non-identifiable fits.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace clinaudit
