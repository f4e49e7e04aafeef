#pragma once

#include <functional>

#include "riskmdp/model.hpp"
#include "riskmdp/tbpe.hpp"

namespace riskmdp {

/// The two chain variants whose MADs encode a tail probability: expectations
/// pinned to t and t + 1/2 by a probabilistic split at a fresh initial
/// state. Per target T the split is half/half onto a trap branch of reward
/// 2T - E when T >= E, and T/E onto the original chain otherwise.
struct ReductionGadget {
    Chain m1, m2;
    bool branch_t_ge_e = true;  // the t-vs-E comparison that picked the shape
    bool m1_half = true, m2_half = true;  // which split each variant used
    mpz_class big_l;  // product of all transition-probability denominators
    long max_reward = 0;  // K
    Rat expectation;      // E of the input chain
    long t = 0;
};

/// Requires an acyclic chain with non-negative rewards and t >= 0; rejects
/// the degenerate split (t < E impossible with E = 0 anyway, but E = 0 with
/// t > 0 routes to the half split). Expectations are asserted exactly at
/// construction.
ReductionGadget build_gadgets(const Chain& c, long t);

/// Pr(rew > t) recovered purely from MAD(M1), MAD(M2), E and t via the
/// telescoping identity; exact.
Rat recover_tail_probability_mad(const Chain& c, long t);

/// Pr(rew >= t) as a difference of two penalty expectations, without ever
/// touching the distribution. Requires t >= 1.
Rat recover_tail_probability_crinkle(const Chain& c, long t);

struct MadSearchResult {
    Rat mad;
    long oracle_calls = 0;
};

/// Exact MAD located among the multiples of 1/L^2 in [0, K] by binary
/// search against a threshold oracle answering "MAD >= theta?". Detects
/// non-monotone (lying) oracles.
MadSearchResult binary_search_mad(const Chain& c, const std::function<bool(const Rat&)>& oracle);

}  // namespace riskmdp
