#pragma once

#include <stdexcept>
#include <string>

namespace walsnb {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RankDeficient : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergence : std::runtime_error {
    NonConvergence(const std::string& what, int iterations)
        : std::runtime_error(what), iterations(iterations) {}
    int iterations;
};

struct NumericOverflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateDenominator : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularFocusBlock : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SmwDenominatorZero : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuadratureFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateNorm : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace walsnb
