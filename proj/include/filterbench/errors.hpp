#pragma once
#include <stdexcept>
#include <string>

namespace fb {

// Invalid model specification (bad matrix shapes, rows that don't sum to one,
// parameters out of range, ...). CLI exit code 2.
struct SpecError : std::runtime_error {
    explicit SpecError(const std::string& m) : std::runtime_error(m) {}
};

// Malformed input data (NaN in a CSV cell, blank field, wrong column count).
// CLI exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// Numerical failure at runtime (singular innovation covariance, filter mass
// collapse, non-convergent iteration). CLI exit code 4.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

} // namespace fb
