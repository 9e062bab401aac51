#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fbdsde {

/// Bad argument: empty grid, value outside a control domain, mismatched sizes.
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Lattice enumeration would exceed 2^24 atoms.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Picard iteration failed; carries the sup-norm change of every sweep.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, std::vector<double> h)
        : std::runtime_error(what), history(std::move(h)) {}
    std::vector<double> history;
};

/// Least-squares projection could not be formed (rank or path-count problem).
struct RegressionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A model or game specification violates its standing assumptions.
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fbdsde
