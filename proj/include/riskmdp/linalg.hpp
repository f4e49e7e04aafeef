#pragma once

#include <vector>

#include "riskmdp/rational.hpp"

namespace riskmdp {

/// Solves A x = b exactly over the rationals. Forward elimination is
/// fraction-free (Bareiss) on a denominator-cleared integer copy with
/// partial pivoting by magnitude, which keeps intermediate coefficients from
/// blowing up; back substitution is done in rationals.
/// Throws std::runtime_error if A is singular.
std::vector<Rat> solve_linear_system(std::vector<std::vector<Rat>> a, std::vector<Rat> b);

}  // namespace riskmdp
