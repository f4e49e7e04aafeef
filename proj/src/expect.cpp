#include "riskmdp/expect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "riskmdp/errors.hpp"
#include "riskmdp/linalg.hpp"

namespace riskmdp {

namespace {

bool better(Direction dir, const Rat& a, const Rat& b) { return dir == Direction::max ? a > b : a < b; }

Rat q_value(const ActionChoice& c, const std::vector<Rat>& v) {
    Rat q = c.reward;
    for (const auto& t : c.successors) q += t.prob * v[t.target];
    return q;
}

/// Lexicographically smallest action name among the optimizers.
int pick_action(const Mdp& m, int s, Direction dir, const std::vector<Rat>& v, Rat* best_out) {
    int best_action = -1;
    Rat best;
    for (const auto& c : m.choices[s]) {
        Rat q = q_value(c, v);
        if (best_action < 0 || better(dir, q, best) ||
            (q == best && m.action_names[c.action] < m.action_names[best_action])) {
            best = q;
            best_action = c.action;
        }
    }
    if (best_out) *best_out = best;
    return best_action;
}

ValueTable solve_acyclic(const Mdp& m, Direction dir, const std::vector<int>& topo) {
    ValueTable vt;
    vt.direction = dir;
    vt.values.assign(m.state_count(), Rat(0));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        int s = *it;
        if (m.is_trap(s)) continue;
        Rat best;
        vt.policy[s] = pick_action(m, s, dir, vt.values, &best);
        vt.values[s] = best;
    }
    return vt;
}

}  // namespace

std::vector<Rat> evaluate_policy(const Mdp& m, const std::map<int, int>& policy) {
    int n = m.state_count();
    std::vector<int> transient;
    std::vector<int> pos(n, -1);
    for (int s = 0; s < n; ++s)
        if (!m.is_trap(s)) {
            pos[s] = static_cast<int>(transient.size());
            transient.push_back(s);
        }
    int k = static_cast<int>(transient.size());
    // (I - P_pi) v = r_pi over the non-trap states
    std::vector<std::vector<Rat>> a(k, std::vector<Rat>(k, Rat(0)));
    std::vector<Rat> b(k, Rat(0));
    for (int i = 0; i < k; ++i) {
        int s = transient[i];
        auto it = policy.find(s);
        if (it == policy.end()) throw std::invalid_argument("policy misses state '" + m.state_names[s] + "'");
        const ActionChoice* c = m.choice_for(s, it->second);
        if (!c) throw std::invalid_argument("policy picks disabled action at '" + m.state_names[s] + "'");
        a[i][i] = 1;
        b[i] = c->reward;
        for (const auto& t : c->successors)
            if (pos[t.target] >= 0) a[i][pos[t.target]] -= t.prob;
    }
    std::vector<Rat> sol = solve_linear_system(std::move(a), std::move(b));
    std::vector<Rat> values(n, Rat(0));
    for (int i = 0; i < k; ++i) values[transient[i]] = sol[i];
    return values;
}

ValueTable optimal_expected_reward(const Mdp& m, Direction dir) {
    auto topo = m.topological_order();
    if (!topo.empty() || m.state_count() == 0) return solve_acyclic(m, dir, topo);

    // policy iteration from the lexicographically smallest action per state;
    // every stationary policy is proper on an EC-free model, so exact
    // evaluation is always defined and improvement is monotone
    std::map<int, int> policy;
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.is_trap(s)) continue;
        int best = -1;
        for (const auto& c : m.choices[s])
            if (best < 0 || m.action_names[c.action] < m.action_names[best]) best = c.action;
        policy[s] = best;
    }
    const long max_rounds = 100000;
    std::vector<Rat> values;
    for (long round = 0; round < max_rounds; ++round) {
        values = evaluate_policy(m, policy);
        bool changed = false;
        for (auto& [s, act] : policy) {
            Rat best;
            int pick = pick_action(m, s, dir, values, &best);
            if (pick != act && better(dir, best, q_value(*m.choice_for(s, act), values))) {
                act = pick;
                changed = true;
            }
        }
        if (!changed) {
            ValueTable vt;
            vt.direction = dir;
            vt.values = std::move(values);
            vt.policy = std::move(policy);
            return vt;
        }
    }
    throw std::logic_error("policy iteration did not converge");
}

FloatValueTable value_iteration(const Mdp& m, Direction dir, double tolerance, long max_iterations) {
    if (tolerance <= 0) throw std::invalid_argument("tolerance must be positive");
    int n = m.state_count();
    FloatValueTable vt;
    vt.direction = dir;
    vt.values.assign(n, 0.0);
    std::vector<std::vector<std::pair<double, std::vector<std::pair<int, double>>>>> num(n);
    for (int s = 0; s < n; ++s)
        for (const auto& c : m.choices[s]) {
            std::vector<std::pair<int, double>> succ;
            for (const auto& t : c.successors) succ.emplace_back(t.target, rat_to_double(t.prob));
            num[s].emplace_back(rat_to_double(c.reward), std::move(succ));
        }
    for (long it = 0; it < max_iterations; ++it) {
        double diff = 0.0;
        for (int s = 0; s < n; ++s) {
            if (m.is_trap(s)) continue;
            double best = 0.0;
            bool first = true;
            for (const auto& [rew, succ] : num[s]) {
                double q = rew;
                for (const auto& [t, p] : succ) q += p * vt.values[t];
                if (first || (dir == Direction::max ? q > best : q < best)) {
                    best = q;
                    first = false;
                }
            }
            diff = std::max(diff, std::fabs(best - vt.values[s]));
            vt.values[s] = best;
        }
        vt.iterations = it + 1;
        if (diff <= tolerance) {
            for (int s = 0; s < n; ++s) {
                if (m.is_trap(s)) continue;
                int best_action = -1;
                double best = 0.0;
                for (const auto& c : m.choices[s]) {
                    double q = rat_to_double(c.reward);
                    for (const auto& t : c.successors) q += rat_to_double(t.prob) * vt.values[t.target];
                    if (best_action < 0 || (dir == Direction::max ? q > best : q < best) ||
                        (q == best && m.action_names[c.action] < m.action_names[best_action])) {
                        best = q;
                        best_action = c.action;
                    }
                }
                vt.policy[s] = best_action;
            }
            return vt;
        }
    }
    throw BudgetExceeded("value iteration did not reach tolerance within " + std::to_string(max_iterations) +
                         " sweeps");
}

bool bellman_consistent(const Mdp& m, const ValueTable& vt) {
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.is_trap(s)) {
            if (vt.values[s] != 0) return false;
            continue;
        }
        auto it = vt.policy.find(s);
        if (it == vt.policy.end()) return false;
        const ActionChoice* chosen = m.choice_for(s, it->second);
        if (!chosen || q_value(*chosen, vt.values) != vt.values[s]) return false;
        for (const auto& c : m.choices[s])
            if (better(vt.direction, q_value(c, vt.values), vt.values[s])) return false;
    }
    return true;
}

Rat reach_probability(const Mdp& m, const MemorylessRandomized& sched, int target) {
    int n = m.state_count();
    if (m.initial == target) return Rat(1);
    std::vector<int> transient, pos(n, -1);
    for (int s = 0; s < n; ++s)
        if (!m.is_trap(s) && s != target) {
            pos[s] = static_cast<int>(transient.size());
            transient.push_back(s);
        }
    int k = static_cast<int>(transient.size());
    std::vector<std::vector<Rat>> a(k, std::vector<Rat>(k, Rat(0)));
    std::vector<Rat> b(k, Rat(0));
    for (int i = 0; i < k; ++i) {
        int s = transient[i];
        a[i][i] = 1;
        auto it = sched.choice.find(s);
        if (it == sched.choice.end())
            throw ModelError(ModelErrorKind::scheduler, "scheduler misses state '" + m.state_names[s] + "'");
        for (const auto& ap : it->second) {
            const ActionChoice* c = m.choice_for(s, ap.action);
            if (!c)
                throw ModelError(ModelErrorKind::scheduler,
                                 "scheduler picks disabled action at '" + m.state_names[s] + "'");
            for (const auto& t : c->successors) {
                if (t.target == target)
                    b[i] += ap.prob * t.prob;
                else if (pos[t.target] >= 0)
                    a[i][pos[t.target]] -= ap.prob * t.prob;
            }
        }
    }
    if (pos[m.initial] < 0) return Rat(0);  // initial is a non-target trap
    auto sol = solve_linear_system(std::move(a), std::move(b));
    return sol[pos[m.initial]];
}

}  // namespace riskmdp
