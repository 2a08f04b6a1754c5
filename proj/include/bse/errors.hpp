#pragma once

#include <stdexcept>
#include <string>

namespace bse {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration values (counts, thresholds, flags).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Operand sizes that do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A small inner system of a structured inverse could not be factorized.
class SingularSystemError : public Error {
public:
    SingularSystemError(std::string system, double estimate)
        : Error("structured inverse: inner system " + system +
                " is numerically singular (pivot ratio / rcond = " + std::to_string(estimate) + ")"),
          system_(std::move(system)), estimate_(estimate) {}

    const std::string& system() const noexcept { return system_; }
    double estimate() const noexcept { return estimate_; }

private:
    std::string system_;
    double estimate_;
};

/// A desk-scale size guard was exceeded.
class GuardError : public Error {
public:
    using Error::Error;
};

/// Instance / tensor container I/O failures. Each failure mode has its own kind.
class FormatError : public Error {
public:
    enum class Kind { Io, UnknownMagic, MalformedHeader, TruncatedPayload, DimensionMismatch };

    FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

} // namespace bse
