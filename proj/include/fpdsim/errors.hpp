#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace fpdsim {

/// Base class for every error the library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument values, violated preconditions, dimension mismatches.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Configuration text problems: unknown key, malformed number, violated invariant.
/// Carries the offending line (1-based, 0 when not tied to a line) and key.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg, int line = 0, std::string key = {})
        : Error(msg), line_(line), key_(std::move(key)) {}
    int line() const { return line_; }
    const std::string& key() const { return key_; }

private:
    int line_;
    std::string key_;
};

/// Bin pattern with overlapping, missing, or out-of-range coordinates.
class PatternError : public Error {
public:
    using Error::Error;
};

/// Newton (DC or implicit-Euler step) failed to converge.
class SolverError : public Error {
public:
    explicit SolverError(const std::string& msg, double residual = 0.0, double t = -1.0)
        : Error(msg), residual_(residual), time_(t) {}
    double residual() const { return residual_; }
    /// Simulation time of the failed step; -1 for DC solves.
    double time() const { return time_; }

private:
    double residual_;
    double time_;
};

/// Mirror reference bias would exceed the supply rail.
class ComplianceError : public SolverError {
public:
    explicit ComplianceError(const std::string& msg) : SolverError(msg) {}
};

/// File read/write failure; the message carries path and cause.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace fpdsim
