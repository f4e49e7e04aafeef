#include "riskmdp/measures.hpp"

#include <algorithm>

#include "riskmdp/errors.hpp"

namespace riskmdp {

namespace {

/// Generation-synchronous unrolling of the scheduler-induced chain over
/// (state, accumulated reward) nodes. With epsilon == 0 the caller has
/// already checked acyclicity, so the frontier drains completely.
RewardDistribution unroll(const Mdp& m, const Scheduler* sched, const Rat& epsilon, long max_steps) {
    std::map<std::pair<int, Rat>, Rat> frontier;
    frontier[{m.initial, Rat(0)}] = Rat(1);
    std::map<Rat, Rat> atoms;
    Rat absorbed(0);

    for (long step = 0;; ++step) {
        // absorb trap mass
        for (auto it = frontier.begin(); it != frontier.end();) {
            if (m.is_trap(it->first.first)) {
                atoms[it->first.second] += it->second;
                absorbed += it->second;
                it = frontier.erase(it);
            } else {
                ++it;
            }
        }
        if (frontier.empty()) break;
        if (epsilon > 0 && Rat(1) - absorbed <= epsilon) break;
        if (step >= max_steps)
            throw BudgetExceeded("distribution unrolling exceeded " + std::to_string(max_steps) +
                                 " steps before reaching the requested tail mass");

        std::map<std::pair<int, Rat>, Rat> next;
        for (const auto& [node, p] : frontier) {
            const auto& [s, w] = node;
            if (sched) {
                for (const auto& ap : sched->distribution_at(m, s, w)) {
                    if (ap.prob == 0) continue;
                    const ActionChoice* c = m.choice_for(s, ap.action);
                    if (!c)
                        throw ModelError(ModelErrorKind::scheduler,
                                         "scheduler picks disabled action at '" + m.state_names[s] + "'");
                    for (const auto& t : c->successors) next[{t.target, w + c->reward}] += p * ap.prob * t.prob;
                }
            } else {
                const ActionChoice& c = m.choices[s][0];
                for (const auto& t : c.successors) next[{t.target, w + c.reward}] += p * t.prob;
            }
        }
        frontier = std::move(next);
    }

    Rat tail = Rat(1) - absorbed;
    return RewardDistribution::from_map(atoms, tail);
}

}  // namespace

RewardDistribution exact_distribution(const Chain& c) {
    if (!c.mdp.acyclic())
        throw ModelError(ModelErrorKind::precondition,
                         "chain is cyclic; use truncated_distribution with a tail bound");
    return unroll(c.mdp, nullptr, Rat(0), c.mdp.state_count() + 1);
}

RewardDistribution truncated_distribution(const Chain& c, const Rat& epsilon, long max_steps) {
    if (epsilon <= 0 || epsilon >= 1) throw std::invalid_argument("epsilon must lie in (0,1)");
    return unroll(c.mdp, nullptr, epsilon, max_steps);
}

RewardDistribution distribution_of(const Mdp& m, const Scheduler& sched, const Rat& epsilon, long max_steps) {
    if (epsilon == 0) {
        if (!m.acyclic())
            throw ModelError(ModelErrorKind::precondition,
                             "model is cyclic; pass a positive epsilon for a truncated distribution");
        return unroll(m, &sched, Rat(0), m.state_count() + 1);
    }
    if (epsilon < 0 || epsilon >= 1) throw std::invalid_argument("epsilon must lie in [0,1)");
    return unroll(m, &sched, epsilon, max_steps);
}

MeasureReport deviation_report(const RewardDistribution& d) {
    if (d.tail_mass != 0)
        throw ModelError(ModelErrorKind::precondition,
                         "distribution has nonzero tail mass; use deviation_bounds");
    MeasureReport r;
    Rat e(0), e2(0);
    for (const auto& [v, p] : d.atoms) {
        e += p * v;
        e2 += p * v * v;
    }
    r.expectation = e;
    r.variance = e2 - e * e;
    Rat mad(0), smad(0), sv(0);
    for (const auto& [v, p] : d.atoms) {
        Rat dev = v - e;
        mad += p * rat_abs(dev);
        if (dev < 0) {
            smad += p * (-dev);
            sv += p * dev * dev;
        }
    }
    r.mad = mad;
    r.smad = smad;
    r.semivariance = sv;
    return r;
}

Rat penalized(const RewardDistribution& d, const PenaltySpec& spec) {
    if (spec.kind == PenaltyKind::tbpe) {
        if (!spec.threshold) throw std::invalid_argument("tbpe needs a threshold");
        if (d.tail_mass != 0)
            throw ModelError(ModelErrorKind::precondition, "distribution has nonzero tail mass");
        Rat e(0), pen(0);
        for (const auto& [v, p] : d.atoms) {
            e += p * v;
            if (v < *spec.threshold) pen += p * (*spec.threshold - v);
        }
        return e - spec.lambda * pen;
    }
    MeasureReport r = deviation_report(d);
    switch (spec.kind) {
        case PenaltyKind::vpe:
            return r.expectation - spec.lambda * r.variance;
        case PenaltyKind::madpe:
            return r.expectation - spec.lambda * r.mad;
        case PenaltyKind::smadpe:
            return r.expectation - spec.lambda * r.smad;
        case PenaltyKind::svpe:
            return r.expectation - spec.lambda * r.semivariance;
        default:
            throw std::logic_error("unreachable");
    }
}

MeasureBounds deviation_bounds(const RewardDistribution& d, const Rat& period) {
    Rat max_atom(0);
    if (!d.atoms.empty()) max_atom = d.atoms.back().first;
    auto complete = [&](const Rat& where) {
        std::map<Rat, Rat> m;
        for (const auto& [v, p] : d.atoms) m[v] += p;
        if (d.tail_mass > 0) m[where] += d.tail_mass;
        return RewardDistribution::from_map(m);
    };
    MeasureReport lo = deviation_report(complete(Rat(0)));
    MeasureReport hi = deviation_report(complete(max_atom + period));
    auto iv = [](const Rat& a, const Rat& b) { return Interval{std::min(a, b), std::max(a, b)}; };
    MeasureBounds b;
    b.expectation = iv(lo.expectation, hi.expectation);
    b.variance = iv(lo.variance, hi.variance);
    b.mad = iv(lo.mad, hi.mad);
    b.smad = iv(lo.smad, hi.smad);
    b.semivariance = iv(lo.semivariance, hi.semivariance);
    return b;
}

}  // namespace riskmdp
