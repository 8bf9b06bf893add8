#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace valforme {

/// An input table or parameter violates a structural invariant.
struct StructuralError : std::runtime_error {
    explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A linear system is singular to working precision.
struct SingularSystemError : std::runtime_error {
    SingularSystemError(const std::string& msg, std::size_t pivot)
        : std::runtime_error(msg), pivot_index(pivot) {}
    std::size_t pivot_index;
};

/// An iteration exhausted its budget before reaching tolerance.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& msg, double last)
        : std::runtime_error(msg), last_estimate(last) {}
    double last_estimate;
};

/// The matrix handed to the dominant-eigenpair routine has no strictly
/// positive Perron vector (reducible or otherwise out of domain).
struct EigenDomainError : std::runtime_error {
    explicit EigenDomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A capital allocation came out negative for some branch.
struct InfeasibleAllocationError : std::runtime_error {
    InfeasibleAllocationError(const std::string& msg, std::size_t branch)
        : std::runtime_error(msg), branch_index(branch) {}
    std::size_t branch_index;
};

/// The constraint closure is singular, underdetermined or overdetermined.
struct DegenerateConstraintsError : std::runtime_error {
    explicit DegenerateConstraintsError(const std::string& msg) : std::runtime_error(msg) {}
};

/// No profit rate in the scanned range cancels the z-function top-down.
struct NoRootError : std::runtime_error {
    explicit NoRootError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Every scanned rate produced an infeasible allocation; a different fixed
/// capital should be chosen.
struct FixedCapitalChoiceError : std::runtime_error {
    explicit FixedCapitalChoiceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A constructive procedure was asked for a configuration it does not cover.
struct UnsupportedConstructionError : std::runtime_error {
    explicit UnsupportedConstructionError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace valforme
