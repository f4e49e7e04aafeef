#include "riskmdp/tbpe.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace riskmdp {

Rat PenaltyFunction::operator()(const Rat& x) const {
    switch (shape_) {
        case PenaltyShape::tbp:
            return x >= t_ ? x : Rat(x - lambda_ * (t_ - x));
        case PenaltyShape::crinkle2:
            // slope 1 with offset t above the threshold; the unfoldings
            // only rely on unit slope there, not on the identity
            return x >= t_ ? Rat(x + t_) : Rat(2 * x);
        case PenaltyShape::custom: {
            // interpolate on [0, ceil(t)], identity beyond; validation pins
            // the interpolation to the identity on [t, ceil(t)]
            if (x > breakpoints_.back().first) return x;
            if (x <= breakpoints_.front().first) return breakpoints_.front().second;
            for (size_t i = 1; i < breakpoints_.size(); ++i) {
                if (x <= breakpoints_[i].first) {
                    const auto& [x0, y0] = breakpoints_[i - 1];
                    const auto& [x1, y1] = breakpoints_[i];
                    return Rat(y0 + (y1 - y0) * (x - x0) / (x1 - x0));
                }
            }
            return breakpoints_.back().second;
        }
    }
    throw std::logic_error("unreachable");
}

PenaltyFunction make_penalty(PenaltyShape shape, const Rat& t, std::optional<Rat> lambda,
                             std::vector<std::pair<Rat, Rat>> breakpoints) {
    if (t < 0) throw std::invalid_argument("threshold must be non-negative");
    PenaltyFunction pen;
    pen.shape_ = shape;
    pen.t_ = t;
    switch (shape) {
        case PenaltyShape::tbp:
            if (!lambda || *lambda <= 0) throw std::invalid_argument("tbp needs lambda > 0");
            pen.lambda_ = *lambda;
            break;
        case PenaltyShape::crinkle2:
            break;
        case PenaltyShape::custom: {
            if (breakpoints.size() < 2) throw std::invalid_argument("custom penalty needs >= 2 breakpoints");
            for (size_t i = 1; i < breakpoints.size(); ++i)
                if (breakpoints[i].first <= breakpoints[i - 1].first)
                    throw std::invalid_argument("breakpoints must be strictly increasing");
            if (breakpoints.front().first != 0 || breakpoints.back().first != rat_ceil(t))
                throw std::invalid_argument("breakpoints must span [0, ceil(t)]");
            pen.breakpoints_ = std::move(breakpoints);
            break;
        }
    }
    // from t on the function must climb with unit slope so capping the
    // counter is sound; tbp and custom are pinned to the identity there
    // (checked at t, ceil(t) and all breakpoints >= t), crinkle runs at the
    // fixed offset t by definition
    if (shape != PenaltyShape::crinkle2) {
        std::vector<Rat> probes{t, rat_ceil(t)};
        for (const auto& [x, y] : pen.breakpoints_)
            if (x >= t) probes.push_back(x);
        for (const Rat& x : probes)
            if (pen(x) != x)
                throw std::invalid_argument("penalty violates m(x) = x at x = " + rat_to_string(x));
    }
    return pen;
}

UnfoldedT build_unfolding_t(const NormalizedMdp& m, const PenaltyFunction& pen) {
    UnfoldedT u;
    u.cap = rat_ceil_long(pen.threshold());
    Mdp& out = u.mdp;
    out.action_names = m.mdp.action_names;
    int tau = out.intern_action("tau");

    for (int s = 0; s < m.mdp.state_count(); ++s)
        for (long w = 0; w <= u.cap; ++w) {
            int node = out.intern_state(m.mdp.state_names[s] + "@" + std::to_string(w));
            u.back_map.emplace_back(s, w);
            u.node_of[{s, w}] = node;
        }
    std::set<std::string> taken(out.state_names.begin(), out.state_names.end());
    std::string iname = "init'";
    while (taken.count(iname)) iname += "'";
    u.initial_prime = out.intern_state(iname);
    u.back_map.emplace_back(-1, -1);
    out.initial = u.initial_prime;
    out.choices[u.initial_prime].push_back(
        ActionChoice{tau, pen(Rat(0)), {Transition{u.node_of.at({m.mdp.initial, 0}), Rat(1)}}});

    const Rat& t = pen.threshold();
    for (int node = 0; node < out.state_count(); ++node) {
        const auto& [s, w] = u.back_map[node];
        if (s < 0) continue;
        for (const auto& c : m.mdp.choices[s]) {
            Rat reached = Rat(w) + c.reward;
            long v = reached >= t ? u.cap : w + c.reward.get_num().get_si();
            ActionChoice nc{c.action, pen(reached) - pen(Rat(w)), {}};
            for (const auto& tr : c.successors) nc.successors.push_back({u.node_of.at({tr.target, v}), tr.prob});
            out.choices[node].push_back(std::move(nc));
        }
    }
    return u;
}

TbpeSolution solve_tbpe(const NormalizedMdp& m, const PenaltyFunction& pen) {
    UnfoldedT u = build_unfolding_t(m, pen);
    ValueTable vt = optimal_expected_reward(u.mdp, Direction::max);

    TbpeSolution sol;
    sol.value = vt.values[u.initial_prime];
    FiniteMemoryDeterministic fm;
    fm.cap = u.cap;
    for (int node = 0; node < u.mdp.state_count(); ++node) {
        const auto& [s, w] = u.back_map[node];
        if (s < 0) continue;
        sol.state_values[{s, w}] = vt.values[node];
        auto it = vt.policy.find(node);
        if (it != vt.policy.end()) fm.choice[{s, w}] = it->second;
    }
    sol.scheduler.rule = std::move(fm);
    return sol;
}

Rat expectation_of_penalty(const Chain& c, const PenaltyFunction& pen) {
    NormalizedMdp wrapped;
    wrapped.mdp = c.mdp;
    UnfoldedT u = build_unfolding_t(wrapped, pen);
    // chains have a single action everywhere, so evaluating the only policy
    // is the expectation; no maximization happens
    std::map<int, int> policy;
    for (int node = 0; node < u.mdp.state_count(); ++node)
        if (!u.mdp.is_trap(node)) policy[node] = u.mdp.choices[node][0].action;
    std::vector<Rat> values = evaluate_policy(u.mdp, policy);
    return values[u.initial_prime];
}

}  // namespace riskmdp
