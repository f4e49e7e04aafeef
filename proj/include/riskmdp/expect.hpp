#pragma once

#include <map>
#include <vector>

#include "riskmdp/model.hpp"
#include "riskmdp/preprocess.hpp"

namespace riskmdp {

enum class Direction { max, min };

/// Exact per-state optimal expected total reward with an optimal memoryless
/// deterministic policy. value(trap) = 0 and Bellman consistency holds with
/// exact rational equality.
struct ValueTable {
    std::vector<Rat> values;
    std::map<int, int> policy;  // non-trap state -> action
    Direction direction = Direction::max;
};

struct FloatValueTable {
    std::vector<double> values;
    std::map<int, int> policy;
    Direction direction = Direction::max;
    long iterations = 0;
};

/// Exact optimum. Acyclic models are solved by backward induction; cyclic
/// ones by policy iteration with exact policy evaluation. Precondition: no
/// end components and every trap has value 0 (holds for normalized models
/// and for the solver unfoldings, which may carry negative rationals).
ValueTable optimal_expected_reward(const Mdp& m, Direction dir);

inline ValueTable max_expected_reward(const NormalizedMdp& m) {
    return optimal_expected_reward(m.mdp, Direction::max);
}
inline ValueTable min_expected_reward(const NormalizedMdp& m) {
    return optimal_expected_reward(m.mdp, Direction::min);
}

/// Exact expected total reward of a fixed memoryless deterministic policy.
std::vector<Rat> evaluate_policy(const Mdp& m, const std::map<int, int>& policy);

/// Gauss-Seidel value iteration in fixed state order; stops when the
/// sup-norm step difference drops to `tolerance`. Throws BudgetExceeded on
/// non-convergence within max_iterations.
FloatValueTable value_iteration(const Mdp& m, Direction dir, double tolerance, long max_iterations = 1000000);

/// True iff the table satisfies the Bellman optimality equations exactly
/// and each policy action attains the optimum.
bool bellman_consistent(const Mdp& m, const ValueTable& vt);

/// Probability that `target` is reached from the initial state under a
/// memoryless randomized scheduler, by exact linear solve. Intended for
/// normalized models (absorption guaranteed).
Rat reach_probability(const Mdp& m, const MemorylessRandomized& sched, int target);

}  // namespace riskmdp
