#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "riskmdp/measures.hpp"
#include "riskmdp/model.hpp"

namespace riskmdp {

/// Ground-truth distribution by explicit maximal-path enumeration. Paths cut
/// off at max_depth contribute to tail_mass (zero on acyclic inputs). Kept
/// deliberately naive and independent of the DP in the measures module.
RewardDistribution enumerate_paths(const Mdp& m, const Scheduler& sched, long max_paths = 2000000,
                                   long max_depth = 100000);

struct GridSpec {
    long resolution = 1;  // probabilities are multiples of 1/resolution
    enum class SchedClass { memoryless, reward_based };
    SchedClass sched_class = SchedClass::memoryless;
    long reward_bound = 0;  // reward-based: free choices for (s, w <= bound)
    PenaltySpec objective;
    long budget = 20000000;  // max grid points
    bool surface = false;    // also return every grid point's value
};

struct GridResult {
    Rat best_value;
    Scheduler best;
    long points = 0;
    // flattened scheduler probability vector per surface entry, in the
    // enumeration order (decision points sorted, actions sorted by name)
    std::vector<std::pair<std::vector<Rat>, Rat>> surface;
};

/// Evaluates the exact objective at every grid scheduler of the requested
/// class and returns the argmax (ties: lexicographically smallest
/// probability vector). Requires an acyclic model; throws BudgetExceeded
/// when the grid is larger than the budget.
GridResult grid_search(const Mdp& m, const GridSpec& spec, int jobs = 1);

struct SimReport {
    long n = 0;
    std::uint64_t seed = 0;
    double expectation = 0, variance = 0, mad = 0, smad = 0, semivariance = 0;
    double se_expectation = 0, se_mad = 0;
    std::map<Rat, long> histogram;
    long resampled = 0;
};

/// Monte Carlo over maximal paths with a counter-based splittable PRNG
/// (SplitMix64 streams; see README), reproducible for a given
/// (seed, n, model, scheduler) independent of the job count.
SimReport simulate(const Mdp& m, const Scheduler& sched, long n, std::uint64_t seed, long step_cap = 1000000,
                   int retry_limit = 16, int jobs = 1);

}  // namespace riskmdp
