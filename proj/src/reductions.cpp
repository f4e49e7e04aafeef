#include "riskmdp/reductions.hpp"

#include <algorithm>
#include <set>

#include "riskmdp/measures.hpp"

namespace riskmdp {

namespace {

std::string fresh(const Mdp& m, std::string base) {
    std::set<std::string> taken(m.state_names.begin(), m.state_names.end());
    while (taken.count(base)) base += "'";
    return base;
}

/// New initial state splitting into the original chain and a side branch.
/// half split: 1/2 to the chain, 1/2 to a reward node (2T - E, then trap).
/// ratio split: T/E to the chain, rest to a zero-reward trap.
Chain attach_split(const Chain& c, const Rat& target, const Rat& e, bool half) {
    Mdp g = c.mdp;
    int init2 = g.intern_state(fresh(g, "split"));
    int sink = g.intern_state(fresh(g, "sink"));
    int step = g.intern_action("step");
    ActionChoice at_init{step, Rat(0), {}};
    if (half) {
        int rnode = g.intern_state(fresh(g, "pad"));
        g.choices[rnode].push_back(ActionChoice{step, 2 * target - e, {Transition{sink, Rat(1)}}});
        at_init.successors = {Transition{g.initial, rat(1, 2)}, Transition{rnode, rat(1, 2)}};
    } else {
        Rat q = target / e;
        at_init.successors = {Transition{g.initial, q}};
        if (q != 1) at_init.successors.push_back(Transition{sink, 1 - q});
    }
    g.choices[init2].push_back(std::move(at_init));
    g.initial = init2;
    g.declared_chain = true;
    return Chain::from_mdp(std::move(g));
}

Rat chain_expectation(const Chain& c) {
    MeasureReport r = deviation_report(exact_distribution(c));
    return r.expectation;
}

Rat chain_mad(const Chain& c) { return deviation_report(exact_distribution(c)).mad; }

long max_path_reward(const Chain& c) {
    // longest-path DP over the acyclic chain
    auto topo = c.mdp.topological_order();
    std::vector<Rat> best(c.state_count(), Rat(0));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        int s = *it;
        if (c.is_trap(s)) continue;
        Rat m(0);
        bool first = true;
        for (const auto& t : c.successors(s)) {
            if (first || best[t.target] > m) m = best[t.target];
            first = false;
        }
        best[s] = c.reward(s) + m;
    }
    return rat_ceil_long(best[c.mdp.initial]);
}

}  // namespace

ReductionGadget build_gadgets(const Chain& c, long t) {
    if (t < 0) throw std::invalid_argument("t must be non-negative");
    if (!c.mdp.acyclic())
        throw ModelError(ModelErrorKind::precondition, "gadget construction needs an acyclic chain");

    ReductionGadget g;
    g.t = t;
    g.expectation = chain_expectation(c);
    g.max_reward = max_path_reward(c);
    g.big_l = 1;
    for (int s = 0; s < c.state_count(); ++s)
        if (!c.is_trap(s))
            for (const auto& tr : c.successors(s)) g.big_l *= tr.prob.get_den();

    const Rat& e = g.expectation;
    g.branch_t_ge_e = Rat(t) >= e;
    if (!g.branch_t_ge_e && e == 0)
        throw ModelError(ModelErrorKind::precondition, "degenerate split: t < E requires E > 0");

    // each variant picks the split shape its own target allows; the ratio
    // split needs target/E <= 1
    Rat t1(t), t2 = Rat(t) + rat(1, 2);
    g.m1_half = t1 >= e;
    g.m2_half = t2 >= e;
    g.m1 = attach_split(c, t1, e, g.m1_half);
    g.m2 = attach_split(c, t2, e, g.m2_half);

    if (chain_expectation(g.m1) != t1 || chain_expectation(g.m2) != t2)
        throw std::logic_error("gadget expectation assertion failed");
    return g;
}

Rat recover_tail_probability_mad(const Chain& c, long t) {
    ReductionGadget g = build_gadgets(c, t);
    const Rat& e = g.expectation;
    Rat t1(t), t2 = Rat(t) + rat(1, 2);

    // extract S_T = sum_w p_w |w - T| from MAD of the variant with mean T
    auto extract = [&](const Chain& variant, const Rat& target, bool half) -> Rat {
        if (target == 0) return e;  // |w - 0| = w, so S_0 is the expectation itself
        Rat mad = chain_mad(variant);
        if (half) return Rat(2 * mad - (target - e));
        Rat q = target / e;
        return Rat((mad - (1 - q) * target) / q);
    };
    Rat s1 = extract(g.m1, t1, g.m1_half);
    Rat s2 = extract(g.m2, t2, g.m2_half);
    return s1 - s2 + rat(1, 2);
}

Rat recover_tail_probability_crinkle(const Chain& c, long t) {
    if (t < 1) throw std::invalid_argument("crinkle recovery needs t >= 1");
    Rat hi = expectation_of_penalty(c, make_penalty(PenaltyShape::crinkle2, Rat(t)));
    Rat lo = expectation_of_penalty(c, make_penalty(PenaltyShape::crinkle2, Rat(t - 1)));
    return hi - lo;
}

MadSearchResult binary_search_mad(const Chain& c, const std::function<bool(const Rat&)>& oracle) {
    if (!c.mdp.acyclic())
        throw ModelError(ModelErrorKind::precondition, "binary search needs an acyclic chain");
    mpz_class l = 1;
    for (int s = 0; s < c.state_count(); ++s)
        if (!c.is_trap(s))
            for (const auto& tr : c.successors(s)) l *= tr.prob.get_den();
    long k = max_path_reward(c);

    MadSearchResult res;
    std::vector<std::pair<Rat, bool>> transcript;
    auto ask = [&](const mpz_class& idx, const mpz_class& l2) {
        Rat theta = Rat(idx) / Rat(l2);
        theta.canonicalize();
        bool ans = oracle(theta);
        transcript.emplace_back(theta, ans);
        ++res.oracle_calls;
        return ans;
    };

    mpz_class l2 = l * l;
    mpz_class lo = 0, hi = l2 * k;  // MAD = (largest true index) / L^2
    while (lo < hi) {
        mpz_class mid = (lo + hi + 1) / 2;
        if (ask(mid, l2))
            lo = mid;
        else
            hi = mid - 1;
    }
    res.mad = Rat(lo) / Rat(l2);
    res.mad.canonicalize();

    // a truthful oracle answers a monotone predicate; a false below a true
    // is flagged. The adaptive probe sequence itself cannot produce such a
    // pair, so this guards repeated or auxiliary probes, not clever liars.
    std::sort(transcript.begin(), transcript.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (size_t i = 1; i < transcript.size(); ++i)
        if (!transcript[i - 1].second && transcript[i].second)
            throw std::logic_error("threshold oracle is inconsistent (non-monotone answers)");
    return res;
}

}  // namespace riskmdp
