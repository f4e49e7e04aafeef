#pragma once

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "riskmdp/lp.hpp"

namespace riskmdp {

/// Plain-text optimization program: the exchange surface for both the LP
/// interchange format and the QP export (which adds bilinear objective
/// terms). Deterministic writer: term order is preserved, rationals print
/// as p/q, LF line endings.
///
///   \ riskmdp qp v1  lambda=2/5 k=2 ell=2 model=<hex>
///   maximize: e - 2/5 x_goal_0_tau * g_0 - ...
///   subject to:
///   c1: x_s_init_0_alpha + x_s_init_0_beta - 1 = 0
///   bounds: all >= 0
///   end
struct TextProgram {
    std::string kind = "lp";  // "lp" or "qp"
    std::vector<std::pair<std::string, std::string>> header;  // key=value comment entries

    std::vector<std::pair<Rat, std::string>> objective_linear;
    std::vector<std::tuple<Rat, std::string, std::string>> objective_bilinear;

    struct Constraint {
        std::string name;
        std::vector<std::pair<Rat, std::string>> terms;
        Relation rel = Relation::eq;
        Rat rhs;
    };
    std::vector<Constraint> constraints;

    bool operator==(const TextProgram& other) const;
};

std::string write_program(const TextProgram& p);
/// Throws std::invalid_argument with a line reference on malformed input.
TextProgram parse_program(const std::string& text);

/// Bridges to the solver's problem type (linear programs only).
TextProgram lp_to_text(const LpProblem& p);
LpProblem lp_from_text(const TextProgram& p);

}  // namespace riskmdp
