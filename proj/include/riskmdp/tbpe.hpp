#pragma once

#include <map>
#include <optional>
#include <vector>

#include "riskmdp/expect.hpp"
#include "riskmdp/model.hpp"
#include "riskmdp/preprocess.hpp"

namespace riskmdp {

enum class PenaltyShape { tbp, crinkle2, custom };

/// Piecewise-linear penalty m with m(x) = x for x >= t:
///   tbp:      m(x) = x - lambda * max(t - x, 0)
///   crinkle2: m(x) = 2x below t, x + t from t on
///   custom:   linear interpolation of user breakpoints on [0, ceil(t)]
class PenaltyFunction {
public:
    PenaltyShape shape() const { return shape_; }
    const Rat& threshold() const { return t_; }
    const Rat& lambda() const { return lambda_; }
    Rat operator()(const Rat& x) const;

    friend PenaltyFunction make_penalty(PenaltyShape shape, const Rat& t, std::optional<Rat> lambda,
                                        std::vector<std::pair<Rat, Rat>> breakpoints);

private:
    PenaltyShape shape_ = PenaltyShape::tbp;
    Rat t_;
    Rat lambda_;
    std::vector<std::pair<Rat, Rat>> breakpoints_;
};

PenaltyFunction make_penalty(PenaltyShape shape, const Rat& t, std::optional<Rat> lambda = std::nullopt,
                             std::vector<std::pair<Rat, Rat>> breakpoints = {});

/// Counter unfolding for threshold penalties: states (s, w) with the
/// accumulated reward clamped to ceil(t), reward m(w + rew) - m(w) per step
/// and m(0) on the initial step. No end components; rewards may be negative
/// rationals.
struct UnfoldedT {
    Mdp mdp;
    long cap = 0;
    int initial_prime = 0;
    std::vector<std::pair<int, long>> back_map;  // unfolded -> (orig, w); (-1,-1) for s_init'
    std::map<std::pair<int, long>, int> node_of;
};

UnfoldedT build_unfolding_t(const NormalizedMdp& m, const PenaltyFunction& pen);

struct TbpeSolution {
    Rat value;  // E^max of the penalized reward
    Scheduler scheduler;  // deterministic, finite-memory (capped reward counter)
    std::map<std::pair<int, long>, Rat> state_values;  // per (orig state, counter)
};

/// Exact pseudo-polynomial optimum via the counter unfolding.
TbpeSolution solve_tbpe(const NormalizedMdp& m, const PenaltyFunction& pen);

/// E(m o rew) for a chain, computed on the unfolding by exact linear solve;
/// works for cyclic chains and never touches the reward distribution.
Rat expectation_of_penalty(const Chain& c, const PenaltyFunction& pen);

}  // namespace riskmdp
