#pragma once

#include <stdexcept>
#include <string>

namespace tally {

/// Raised when an exact computation would exceed its configured state or
/// size budget. Signals that the caller should fall back to an estimator.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when an iterative solver fails to reach its tolerance within the
/// iteration cap.
class convergence_error : public std::runtime_error {
public:
    explicit convergence_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tally
