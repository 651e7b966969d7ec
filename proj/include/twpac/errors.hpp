#pragma once

#include <stdexcept>
#include <string>

namespace twpac {

/// Input outside the validity range of a model (bias at I_c, frequency above plasma resonance).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Numerical failure: singular matrix, step-size underflow, Newton divergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace twpac
