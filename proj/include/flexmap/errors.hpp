#pragma once

#include <stdexcept>
#include <string>

namespace flexmap {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file or unparsable text.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally well-formed input that violates a model invariant.
/// The message names the offending element (bus, branch, unit, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A program could not be assembled (e.g. reference bus with no branch).
class ModelError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown inside a solver (non-factorizable KKT system,
/// diverging sweep, ...).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Synthetic network generation could not reach a feasible instance.
class GenerationError : public Error {
public:
    using Error::Error;
};

/// Guard against combinatorial blowup (uncapped subset enumeration).
class CapacityError : public Error {
public:
    using Error::Error;
};

/// The requested optimization admits no operating point at all (not the
/// per-slice empty-window outcome, which is reported in-band).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

} // namespace flexmap
