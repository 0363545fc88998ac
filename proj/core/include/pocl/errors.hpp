#pragma once

#include <stdexcept>
#include <string>

namespace pocl {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (rosters, architectures, hyperparams).
struct ConfigError : Error {
    using Error::Error;
};

/// Tensor/batch dimension mismatch.
struct ShapeError : Error {
    using Error::Error;
};

/// Value outside its documented domain (bad label, negative contribution).
struct DomainError : Error {
    using Error::Error;
};

/// Model aggregation failure (empty input, architecture mismatch).
struct AggregationError : Error {
    using Error::Error;
};

/// Internal cross-checks between protocol artifacts failed.
struct ConsistencyError : Error {
    using Error::Error;
};

/// Structured-text input (chain dumps, configs) could not be parsed.
struct ParseError : Error {
    using Error::Error;
};

/// A consensus round could not complete (e.g. no ballots were cast).
struct RoundAbort : Error {
    using Error::Error;
};

} // namespace pocl
