#pragma once

#include <stdexcept>
#include <string>

namespace bumpforge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed descriptor, inconsistent parameters, or a violated precondition
/// on user-supplied configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A field violates a pointwise precondition (e.g. negative values).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative or root-finding procedure could not produce an answer.
class SolverError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class ThresholdViolated : public Error {
public:
    using Error::Error;
};

/// An emerging part is identically zero, or has collapsed below resolution.
class EmptyBump : public Error {
public:
    using Error::Error;
};

class BumpCollapse : public Error {
public:
    using Error::Error;
};

class EmergingOutsideBalls : public Error {
public:
    using Error::Error;
};

class NotConverged : public Error {
public:
    using Error::Error;
};

/// A ground-state probe ended without a decisive verdict.
class IndeterminateVerdict : public Error {
public:
    using Error::Error;
};

} // namespace bumpforge
