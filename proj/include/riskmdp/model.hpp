#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "riskmdp/rational.hpp"

namespace riskmdp {

/// Error categories for model parsing and validation. Every parse failure
/// carries exactly one category so callers can react programmatically.
enum class ModelErrorKind {
    syntax,
    probability_sum,
    negative_reward,
    non_integer_reward,
    unknown_reference,
    duplicate_transition,
    scheduler,
    precondition,
};

struct ModelError : std::runtime_error {
    ModelErrorKind kind;
    int line;

    ModelError(ModelErrorKind kind, std::string message, int line = 0)
        : std::runtime_error(std::move(message)), kind(kind), line(line) {}
};

struct Transition {
    int target = 0;
    Rat prob;
};

/// One enabled action of a state: its reward and successor distribution.
/// Rewards are non-negative integers in parsed models; internally (for
/// unfoldings) arbitrary rationals are allowed.
struct ActionChoice {
    int action = 0;
    Rat reward;
    std::vector<Transition> successors;
};

/// Finite MDP with exact rational transition probabilities. A state is a
/// trap iff it has no enabled actions. Chains are represented as degenerate
/// MDPs (at most one choice per state); `Chain` below is a validated view.
struct Mdp {
    std::vector<std::string> state_names;
    std::vector<std::string> action_names;
    std::vector<std::vector<ActionChoice>> choices;  // indexed by state
    int initial = 0;
    std::optional<int> goal;
    bool declared_chain = false;   // parsed from a "chain" document
    std::map<std::string, int> state_lookup;  // maintained by intern_state

    int state_count() const { return static_cast<int>(state_names.size()); }
    bool is_trap(int s) const { return choices[s].empty(); }
    int state_index(const std::string& name) const;  // -1 if absent
    int action_index(const std::string& name) const;
    /// Index of `name` in the action table, adding it if missing.
    int intern_action(const std::string& name);
    int intern_state(const std::string& name);
    const ActionChoice* choice_for(int state, int action) const;
    /// Largest action reward in the model (zero for trap-only models).
    Rat max_reward() const;
    /// True if the state graph (ignoring actions) has no directed cycle.
    bool acyclic() const;
    /// States in topological order; empty if the graph is cyclic.
    std::vector<int> topological_order() const;
};

/// Validated single-action view of a degenerate Mdp. The underlying Mdp is
/// kept; rew maps each non-trap state to the reward of its only action.
struct Chain {
    Mdp mdp;

    static Chain from_mdp(Mdp m);  // throws ModelError if some state has >1 action
    int state_count() const { return mdp.state_count(); }
    bool is_trap(int s) const { return mdp.is_trap(s); }
    const Rat& reward(int s) const { return mdp.choices[s][0].reward; }
    const std::vector<Transition>& successors(int s) const { return mdp.choices[s][0].successors; }
};

struct ActionProb {
    int action = 0;
    Rat prob;
};

/// state -> distribution over enabled actions
struct MemorylessRandomized {
    std::map<int, std::vector<ActionProb>> choice;
};

/// (state, accumulated reward) -> distribution over enabled actions.
/// Lookups for a reward w beyond the stored levels fall back to the entry
/// with the largest level <= w; this is the "default rule beyond the bound"
/// and makes capped-counter schedulers expressible with finitely many rows.
struct RewardBasedRandomized {
    std::map<std::pair<int, long>, std::vector<ActionProb>> choice;
};

/// Deterministic finite-memory scheduler whose memory is the accumulated
/// reward clamped to `cap` (the ERMax shape produced by the TBPE solver).
/// Mode update: m' = min(m + rew(s, a), cap); initial mode 0.
struct FiniteMemoryDeterministic {
    long cap = 0;
    std::map<std::pair<int, long>, int> choice;  // (state, mode) -> action
};

struct Scheduler {
    std::variant<MemorylessRandomized, RewardBasedRandomized, FiniteMemoryDeterministic> rule;

    /// Distribution chosen at `state` given accumulated (uncapped) reward w.
    std::vector<ActionProb> distribution_at(const Mdp& m, int state, const Rat& w) const;
    bool deterministic() const;
};

/// Finite exact distribution of total reward. Atoms are sorted by value,
/// probabilities positive, and sum + tail_mass == 1 exactly.
struct RewardDistribution {
    std::vector<std::pair<Rat, Rat>> atoms;
    Rat tail_mass;

    static RewardDistribution from_map(const std::map<Rat, Rat>& m, const Rat& tail = Rat(0));
    bool exact() const { return tail_mass == 0; }
    Rat total_mass() const;
};

struct ValidationIssue {
    ModelErrorKind kind;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

/// Parses the line-oriented model format. Throws ModelError with a distinct
/// category per failure mode; see README for the grammar.
Mdp parse_model(const std::string& text);
std::string serialize_model(const Mdp& m);

ValidationReport validate(const Mdp& m);

/// Expands (state, chosen action) into an intermediate node that carries the
/// action reward, so integer rewards survive scheduler mixing exactly.
Chain induce_chain(const Mdp& m, const MemorylessRandomized& sched);

Scheduler parse_scheduler(const Mdp& m, const std::string& text);
std::string serialize_scheduler(const Mdp& m, const Scheduler& sched);

/// FNV-1a over the canonical serialization; stable across runs.
std::string model_hash(const Mdp& m);

std::string distribution_to_json(const RewardDistribution& d);

}  // namespace riskmdp
