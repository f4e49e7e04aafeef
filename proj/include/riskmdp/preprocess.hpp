#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "riskmdp/model.hpp"

namespace riskmdp {

/// A maximal end component: a closed, strongly connected sub-MDP given by a
/// state subset and the retained action subset per member state.
struct EndComponent {
    std::vector<int> states;
    std::map<int, std::vector<int>> actions;  // state -> retained actions
    bool is_zero = true;                      // all retained pairs have reward 0
};

/// An MDP satisfying the standing assumption: `goal` is its unique trap
/// state, no end components exist, and consequently goal is reached with
/// probability 1 under every scheduler.
struct NormalizedMdp {
    Mdp mdp;
    int goal = 0;
    // collapse record: new state name -> original state names (only for
    // states that absorbed something)
    std::map<std::string, std::set<std::string>> provenance;

    /// Wraps a model that already satisfies the invariants, without
    /// collapsing anything. Throws ModelError otherwise.
    static NormalizedMdp adopt(Mdp m);
};

/// Maximal end components, ordered by lexicographically smallest member
/// state name; the standard SCC-refinement fixpoint.
std::vector<EndComponent> mec_decomposition(const Mdp& m);

/// True iff the maximal expected total reward is finite, i.e. every maximal
/// end component is a 0-end-component.
bool check_finite_expectation(const Mdp& m);

/// Collapses 0-end-components and zero-value states into a single goal trap.
/// The achievable distributions of total reward are preserved. Throws
/// ModelError (precondition) if some end component has positive reward.
NormalizedMdp normalize(const Mdp& m);

/// adopt() if the invariants already hold, otherwise normalize().
NormalizedMdp ensure_normalized(const Mdp& m);

}  // namespace riskmdp
