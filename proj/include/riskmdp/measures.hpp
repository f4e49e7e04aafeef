#pragma once

#include <optional>

#include "riskmdp/model.hpp"
#include "riskmdp/preprocess.hpp"

namespace riskmdp {

/// Exact deviation measures of a reward distribution.
/// smad == mad/2 and variance == E(X^2) - E(X)^2 always hold.
struct MeasureReport {
    Rat expectation;
    Rat variance;
    Rat mad;
    Rat smad;
    Rat semivariance;
};

enum class PenaltyKind { vpe, madpe, smadpe, svpe, tbpe };

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::madpe;
    Rat lambda;
    std::optional<Rat> threshold;  // tbpe only
};

/// Exact distribution of total reward over the maximal paths of an acyclic
/// chain; throws ModelError (precondition) on cyclic input directing the
/// caller to truncated_distribution.
RewardDistribution exact_distribution(const Chain& c);

/// Unrolls a (possibly cyclic) chain until the non-absorbed probability
/// drops to epsilon; enumerated atoms are exact, tail_mass <= epsilon.
RewardDistribution truncated_distribution(const Chain& c, const Rat& epsilon, long max_steps = 200000);

/// Requires tail_mass == 0.
MeasureReport deviation_report(const RewardDistribution& d);

/// The requested penalized expectation, exact. Requires tail_mass == 0 and,
/// for tbpe, a threshold.
Rat penalized(const RewardDistribution& d, const PenaltySpec& spec);

struct Interval {
    Rat lo, hi;
    Rat width() const { return hi - lo; }
    bool contains(const Rat& v) const { return lo <= v && v <= hi; }
    bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
};

/// Bounds mode for truncated distributions: each measure is evaluated with
/// the tail mass placed at reward 0 and at (max enumerated reward + period),
/// and the min/max of the two completions is reported per measure.
struct MeasureBounds {
    Interval expectation, variance, mad, smad, semivariance;
};

MeasureBounds deviation_bounds(const RewardDistribution& d, const Rat& period);

/// Distribution of total reward under an arbitrary scheduler, by dynamic
/// programming over (state, accumulated reward) nodes. epsilon == 0 demands
/// an acyclic model and returns the exact distribution; otherwise the chain
/// is unrolled to tail mass <= epsilon.
RewardDistribution distribution_of(const Mdp& m, const Scheduler& sched, const Rat& epsilon = Rat(0),
                                   long max_steps = 200000);

inline RewardDistribution distribution_of(const NormalizedMdp& m, const Scheduler& sched,
                                          const Rat& epsilon = Rat(0), long max_steps = 200000) {
    return distribution_of(m.mdp, sched, epsilon, max_steps);
}

}  // namespace riskmdp
