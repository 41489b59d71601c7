#pragma once

#include <stdexcept>
#include <string>

namespace dsebm {

/// Malformed or inconsistent input data (files, records, shape mismatches
/// between data and model). Maps to CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: divergence, non-finite intermediates, failed gradient
/// checks. Maps to CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dsebm
