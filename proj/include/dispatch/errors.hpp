#pragma once

#include <stdexcept>
#include <string>

namespace dispatch {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed scenario config or CSV input.
struct ParseError : Error {
    using Error::Error;
};

/// Structurally valid input violating a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// inv_d1 could not bracket a root within the magnitude bound.
struct BracketFailure : Error {
    using Error::Error;
};

/// Newton-KKT failed to reach the tolerance within the iteration budget.
struct MaxIters : Error {
    using Error::Error;
};

/// KKT matrix rank-deficient (duplicate or degenerate constraints).
struct SingularKkt : Error {
    using Error::Error;
};

/// cheap_redistribution precondition: aggregate state sums differ.
struct SumMismatch : Error {
    using Error::Error;
};

/// Co-state reconstruction from two classes with equal leakage rates.
struct SingularPair : Error {
    using Error::Error;
};

/// Residual certification requires a minimum grid resolution.
struct GridTooCoarse : Error {
    using Error::Error;
};

}  // namespace dispatch
