#pragma once

#include <map>
#include <string>
#include <vector>

#include "riskmdp/expect.hpp"
#include "riskmdp/lp.hpp"
#include "riskmdp/lp_text.hpp"
#include "riskmdp/measures.hpp"
#include "riskmdp/model.hpp"
#include "riskmdp/preprocess.hpp"

namespace riskmdp {

/// The reward-counter unfolding used by the MADPE machinery. Counter values
/// run over {0..k+ell-1} with k = ceil(max expected reward) and ell the
/// largest reward; rewards move to a final tau step into goal'.
struct UnfoldedN {
    Mdp mdp;
    long k = 0;
    long ell = 0;
    int tau_action = 0;
    int goal_prime = 0;
    std::vector<Rat> emax;                    // per original state
    std::map<int, int> emax_policy;           // the scheduler T used above k
    Rat emax_initial;
    std::vector<std::pair<int, long>> node_info;  // unfolded state -> (orig, w); (-1,-1) for goal'
    std::map<std::pair<int, long>, int> node_of;
    int original_goal = 0;
    std::string source_hash;

    bool is_terminal(int node) const;     // node carries the final tau step
    Rat terminal_reward(int node) const;  // w (goal) or w + emax[s]
    /// Frequency variable name, "x_<state>_<w>_<action>".
    std::string x_name(int node, int action) const;
};

/// Frequency polytope + auxiliary variables + bilinear objective; the
/// exported quadratic program. `program` is the exact text-level content.
struct QpModel {
    TextProgram program;
    Rat lambda;
    long k = 0, ell = 0;
    std::string model_hash;
};

struct SweepConfig {
    Rat delta;                 // 0 -> default emax/64
    int refinement_rounds = 3;
    int jobs = 1;
};

struct MadpeSolution {
    Rat value;      // exact MADPE of the returned scheduler (certified lower bound)
    Rat e_star;     // expectation pinned at the incumbent
    Rat gap_bound;  // sweep resolution * objective Lipschitz constant
    std::map<std::string, Rat> frequencies;
    Scheduler scheduler;  // reward-based randomized, the S^k T shape
    std::vector<std::pair<Rat, Rat>> sweep_log;  // (pinned e, LP value)
    long skipped_infeasible = 0;
};

/// Lambda-independent; computes k from the exact maximal expected reward.
UnfoldedN build_unfolding_n(const NormalizedMdp& m);

/// Constraints (non-negativity implicit in bounds, flow balance per
/// (state, counter) pair) over all declared frequency variables.
LpProblem build_frequency_constraints(const UnfoldedN& n);

/// Full quadratic program; requires 0 < lambda <= 1/2 (SolverRefusal above).
QpModel build_qp(const UnfoldedN& n, const Rat& lambda);

/// Expectation-sweep solver: pins the expectation to each candidate value,
/// which turns the absolute-value objective into an LP, and keeps the best
/// candidate. The reported value is the exact MADPE of the extracted
/// scheduler; gap_bound bounds the distance to the true optimum.
MadpeSolution solve_madpe_sweep(const NormalizedMdp& m, const Rat& lambda, const SweepConfig& cfg = {});

/// Frequencies -> reward-based randomized scheduler (follows the
/// expectation-optimal policy on zero-frequency pairs and above k).
Scheduler extract_scheduler(const UnfoldedN& n, const std::map<std::string, Rat>& frequencies);

std::string export_qp(const QpModel& q);
QpModel parse_qp(const std::string& text);

}  // namespace riskmdp
