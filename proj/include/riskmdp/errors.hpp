#pragma once

#include <stdexcept>
#include <string>

namespace riskmdp {

/// A solver declined to run because the request is outside its guaranteed
/// regime (e.g. MADPE with lambda > 1/2). Maps to CLI exit code 3.
struct SolverRefusal : std::runtime_error {
    explicit SolverRefusal(const std::string& msg) : std::runtime_error(msg) {}
};

/// An enumeration/unrolling budget ran out before the request completed.
/// Maps to CLI exit code 4.
struct BudgetExceeded : std::runtime_error {
    explicit BudgetExceeded(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace riskmdp
