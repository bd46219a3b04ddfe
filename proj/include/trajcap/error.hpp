#pragma once

#include <stdexcept>
#include <string>

namespace trajcap {

/// Problems with on-disk inputs: missing files, size mismatches, bad schemas.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric contract violations: non-finite losses, failed gradient checks.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid in-memory inputs (shape mismatches, bad indices) throw
// std::invalid_argument directly.

}  // namespace trajcap
