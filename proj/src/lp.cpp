#include "riskmdp/lp.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskmdp {

int LpProblem::add_var(const std::string& name, const Rat& obj_coeff) {
    var_names.push_back(name);
    objective.push_back(obj_coeff);
    if (!lower.empty()) lower.push_back(Rat(0));
    if (!upper.empty()) upper.push_back(std::nullopt);
    return static_cast<int>(var_names.size()) - 1;
}

void LpProblem::add_row(std::string name, std::vector<std::pair<int, Rat>> terms, Relation rel, Rat rhs) {
    rows.push_back(Row{std::move(name), std::move(terms), rel, std::move(rhs)});
}

namespace {

/// Dense two-phase tableau. Columns: structural vars, then slacks/surplus,
/// then artificials, then rhs. Row 0..m-1 constraints; two objective rows
/// (phase-1 and phase-2 reduced costs) are kept in step.
struct Tableau {
    int m, n_struct, n_cols;  // n_cols excludes rhs
    std::vector<std::vector<Rat>> t;
    std::vector<Rat> obj1, obj2;  // reduced-cost rows; entry n_cols = value
    std::vector<int> basis;       // column index basic in each row
    int first_artificial;
    bool bland = false;
    long stalled = 0;

    Rat& rhs(int i) { return t[i][n_cols]; }

    void pivot(int row, int col) {
        Rat inv = 1 / t[row][col];
        for (int j = 0; j <= n_cols; ++j) t[row][j] *= inv;
        for (int i = 0; i < m; ++i) {
            if (i == row || t[i][col] == 0) continue;
            Rat f = t[i][col];
            for (int j = 0; j <= n_cols; ++j) t[i][j] -= f * t[row][j];
        }
        for (auto* obj : {&obj1, &obj2}) {
            if ((*obj)[col] == 0) continue;
            Rat f = (*obj)[col];
            for (int j = 0; j <= n_cols; ++j) (*obj)[j] -= f * t[row][j];
        }
        basis[row] = col;
    }

    /// One simplex phase maximizing the given objective row over the columns
    /// [0, limit). Returns false on unbounded (entering column recorded).
    bool run(std::vector<Rat>& obj, int limit, int& unbounded_col) {
        const long stall_threshold = 2L * (m + n_cols);
        long guard = 0;
        while (true) {
            if (++guard > 2000000) throw std::logic_error("simplex pivot guard tripped");
            int enter = -1;
            if (!bland) {
                Rat best(0);
                for (int j = 0; j < limit; ++j)
                    if (obj[j] > best) {
                        best = obj[j];
                        enter = j;
                    }
            } else {
                for (int j = 0; j < limit; ++j)
                    if (obj[j] > 0) {
                        enter = j;
                        break;
                    }
            }
            if (enter < 0) return true;  // optimal for this phase

            int leave = -1;
            Rat best_ratio;
            for (int i = 0; i < m; ++i) {
                if (t[i][enter] <= 0) continue;
                Rat ratio = rhs(i) / t[i][enter];
                if (leave < 0 || ratio < best_ratio || (ratio == best_ratio && basis[i] < basis[leave])) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
            if (leave < 0) {
                unbounded_col = enter;
                return false;
            }
            if (best_ratio == 0) {
                if (++stalled > stall_threshold) bland = true;
            } else {
                stalled = 0;
            }
            pivot(leave, enter);
        }
    }
};

}  // namespace

LpSolution solve_lp(const LpProblem& p) {
    const int n = static_cast<int>(p.var_names.size());
    std::vector<Rat> lower = p.lower.empty() ? std::vector<Rat>(n, Rat(0)) : p.lower;

    // assemble rows in y = x - lower coordinates, fold upper bounds in as
    // extra <= rows, and orient every rhs non-negative
    struct NormRow {
        std::vector<Rat> coeff;
        Relation rel;
        Rat rhs;
    };
    std::vector<NormRow> rows;
    Rat obj_shift(0);
    for (int j = 0; j < n; ++j) obj_shift += p.objective[j] * lower[j];
    for (const auto& r : p.rows) {
        NormRow nr{std::vector<Rat>(n, Rat(0)), r.rel, r.rhs};
        for (const auto& [v, c] : r.terms) {
            if (v < 0 || v >= n) throw std::invalid_argument("row references undeclared variable");
            nr.coeff[v] += c;
            nr.rhs -= c * lower[v];
        }
        rows.push_back(std::move(nr));
    }
    if (!p.upper.empty())
        for (int j = 0; j < n; ++j)
            if (p.upper[j]) {
                NormRow nr{std::vector<Rat>(n, Rat(0)), Relation::le, *p.upper[j] - lower[j]};
                nr.coeff[j] = 1;
                rows.push_back(std::move(nr));
            }
    for (auto& r : rows) {
        if (r.rhs < 0) {
            for (auto& c : r.coeff) c = -c;
            r.rhs = -r.rhs;
            r.rel = r.rel == Relation::le ? Relation::ge : (r.rel == Relation::ge ? Relation::le : Relation::eq);
        }
    }

    const int m = static_cast<int>(rows.size());
    int n_slack = 0, n_art = 0;
    for (const auto& r : rows) {
        if (r.rel != Relation::eq) ++n_slack;
        if (r.rel != Relation::le) ++n_art;
    }

    Tableau tb;
    tb.m = m;
    tb.n_struct = n;
    tb.n_cols = n + n_slack + n_art;
    tb.first_artificial = n + n_slack;
    tb.t.assign(m, std::vector<Rat>(tb.n_cols + 1, Rat(0)));
    tb.obj1.assign(tb.n_cols + 1, Rat(0));
    tb.obj2.assign(tb.n_cols + 1, Rat(0));
    tb.basis.assign(m, -1);

    int slack_at = n, art_at = tb.first_artificial;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) tb.t[i][j] = rows[i].coeff[j];
        tb.t[i][tb.n_cols] = rows[i].rhs;
        if (rows[i].rel == Relation::le) {
            tb.t[i][slack_at] = 1;
            tb.basis[i] = slack_at++;
        } else if (rows[i].rel == Relation::ge) {
            tb.t[i][slack_at] = -1;
            ++slack_at;
            tb.t[i][art_at] = 1;
            tb.basis[i] = art_at++;
        } else {
            tb.t[i][art_at] = 1;
            tb.basis[i] = art_at++;
        }
    }

    // phase 1: maximize -(sum of artificials); price out basic artificials
    for (int j = tb.first_artificial; j < tb.n_cols; ++j) tb.obj1[j] = -1;
    for (int i = 0; i < m; ++i)
        if (tb.basis[i] >= tb.first_artificial)
            for (int j = 0; j <= tb.n_cols; ++j) tb.obj1[j] += tb.t[i][j];
    // phase 2 objective on structural columns
    for (int j = 0; j < n; ++j) tb.obj2[j] = p.objective[j];

    LpSolution sol;
    int unbounded_col = -1;
    if (n_art > 0) {
        // artificials never re-enter: the scan stops at first_artificial
        tb.run(tb.obj1, tb.first_artificial, unbounded_col);  // bounded by construction
        if (tb.obj1[tb.n_cols] != 0) {
            sol.status = LpStatus::infeasible;
            // multipliers proving Ax{rel}b unsatisfiable, read off the
            // phase-1 price row under each row's starting unit column
            sol.witness.assign(m, Rat(0));
            int s_at = n, a_at = tb.first_artificial;
            for (int i = 0; i < m; ++i) {
                int unit = rows[i].rel == Relation::le ? s_at : a_at;
                if (rows[i].rel != Relation::eq) ++s_at;
                if (rows[i].rel != Relation::le) ++a_at;
                sol.witness[i] = tb.obj1[unit];
            }
            sol.bland_engaged = tb.bland;
            return sol;
        }
        // drive leftover zero-valued artificials out of the basis; rows
        // where that is impossible are redundant (0 = 0) and get removed so
        // phase 2 cannot push their artificial positive again
        std::vector<int> redundant;
        for (int i = 0; i < tb.m; ++i) {
            if (tb.basis[i] < tb.first_artificial) continue;
            int col = -1;
            for (int j = 0; j < tb.first_artificial; ++j)
                if (tb.t[i][j] != 0) {
                    col = j;
                    break;
                }
            if (col >= 0)
                tb.pivot(i, col);
            else
                redundant.push_back(i);
        }
        for (auto it = redundant.rbegin(); it != redundant.rend(); ++it) {
            tb.t.erase(tb.t.begin() + *it);
            tb.basis.erase(tb.basis.begin() + *it);
            --tb.m;
        }
    }

    if (!tb.run(tb.obj2, tb.first_artificial, unbounded_col)) {
        sol.status = LpStatus::unbounded;
        // improving ray in original coordinates
        sol.witness.assign(n, Rat(0));
        if (unbounded_col < n) sol.witness[unbounded_col] = 1;
        for (int i = 0; i < tb.m; ++i)
            if (tb.basis[i] < n) sol.witness[tb.basis[i]] = -tb.t[i][unbounded_col];
        sol.bland_engaged = tb.bland;
        return sol;
    }

    sol.status = LpStatus::optimal;
    sol.values.assign(n, Rat(0));
    for (int i = 0; i < tb.m; ++i)
        if (tb.basis[i] < n) sol.values[tb.basis[i]] = tb.t[i][tb.n_cols];
    for (int j = 0; j < n; ++j) sol.values[j] += lower[j];
    sol.objective_value = Rat(0);
    for (int j = 0; j < n; ++j) sol.objective_value += p.objective[j] * sol.values[j];
    sol.reduced_costs.assign(n, Rat(0));
    for (int j = 0; j < n; ++j) sol.reduced_costs[j] = tb.obj2[j];
    for (int i = 0; i < tb.m; ++i) sol.basis.push_back(tb.basis[i] < n ? tb.basis[i] : -1);
    sol.bland_engaged = tb.bland;
    return sol;
}

}  // namespace riskmdp
