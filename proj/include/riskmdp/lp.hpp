#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskmdp/rational.hpp"

namespace riskmdp {

enum class Relation { eq, le, ge };

/// Linear program in the solver's native form: maximize c'x subject to the
/// rows, with per-variable lower bounds (default 0) and optional uppers.
struct LpProblem {
    std::vector<std::string> var_names;
    std::vector<Rat> objective;  // maximize; sized like var_names
    struct Row {
        std::string name;
        std::vector<std::pair<int, Rat>> terms;  // (variable, coefficient)
        Relation rel = Relation::eq;
        Rat rhs;
    };
    std::vector<Row> rows;
    std::vector<Rat> lower;                 // empty means all 0
    std::vector<std::optional<Rat>> upper;  // empty means none

    int add_var(const std::string& name, const Rat& obj_coeff = Rat(0));
    void add_row(std::string name, std::vector<std::pair<int, Rat>> terms, Relation rel, Rat rhs);
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
    LpStatus status = LpStatus::optimal;
    Rat objective_value;
    std::vector<Rat> values;         // primal values per variable (optimal only)
    std::vector<int> basis;          // basic structural variables, -1 entries for slacks
    std::vector<Rat> reduced_costs;  // per structural variable (optimal only); <= 0 certifies optimality
    std::vector<Rat> witness;        // infeasible: Farkas-style row multipliers; unbounded: improving ray
    bool bland_engaged = false;      // anti-cycling rule was switched on
};

/// Exact primal simplex: two-phase, dense rational tableau, Dantzig pricing
/// with a switch to Bland's rule when degeneracy stalls progress.
LpSolution solve_lp(const LpProblem& p);

}  // namespace riskmdp
