#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its mathematical domain (invalid covariance
/// parameters, argument outside the m.g.f. convergence strip, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent user input (misaligned tables, bad CSV, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A requested size exceeds a configured or structural limit.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Cholesky factorization met a non-positive pivot.
class FactorizationError : public Error {
public:
    FactorizationError(std::size_t pivot, double value)
        : Error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                " has value " + std::to_string(value)),
          pivot_(pivot), value_(value) {}

    std::size_t pivot() const noexcept { return pivot_; }
    double pivot_value() const noexcept { return value_; }

private:
    std::size_t pivot_;
    double value_;
};

/// An iterative solver or optimizer failed; the message carries its trace.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::string trace)
        : Error(what), trace_(std::move(trace)) {}

    const std::string& trace() const noexcept { return trace_; }

private:
    std::string trace_;
};

}  // namespace smf
