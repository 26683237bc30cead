#pragma once

#include <stdexcept>
#include <string>

namespace qrs {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract arguments (non-Hermitian input, beta out of
// range, bad config values, ...).
struct InvalidInputError : Error {
    using Error::Error;
};

// Coefficient extraction or model assembly failed its residual check.
struct ModelConstructionError : Error {
    using Error::Error;
};

// A filter state lost all of its mass; normalized quantities are undefined.
struct DegenerateStateError : Error {
    using Error::Error;
};

// Requested problem size exceeds a hard resource ceiling.
struct CapacityError : Error {
    using Error::Error;
};

// An internally computed quantity violated an exact identity by more than
// rounding can explain (e.g. an outcome probability outside [0, 1]).
struct NumericalConsistencyError : Error {
    using Error::Error;
};

// Conditioning on a zero-probability measurement record.
struct UndefinedConditionalError : Error {
    using Error::Error;
};

}  // namespace qrs
