#pragma once

#include <stdexcept>
#include <string>

namespace fqte {

/// Base class for all fqte failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV ingestion and dataset invariant violations.
class DataError : public Error {
public:
    using Error::Error;
};

/// Working-model fitting failures (separation, rank deficiency, degenerate scale).
class FitError : public Error {
public:
    using Error::Error;
};

/// Estimating-equation solver failures.
class SolveError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration (quantile levels, dimensions, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fqte
