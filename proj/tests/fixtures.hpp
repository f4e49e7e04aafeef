#pragma once

#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "riskmdp/expect.hpp"
#include "riskmdp/linalg.hpp"
#include "riskmdp/lp.hpp"
#include "riskmdp/madpe.hpp"
#include "riskmdp/measures.hpp"
#include "riskmdp/model.hpp"

namespace riskmdp::testing {

/// Four-way branch at the initial state; tau exits pay 0/1/2.
inline Mdp branch_mdp() {
    return parse_model(R"(mdp
initial s_init
goal goal
state s_init
  action alpha reward 0
    -> s0 1/4
    -> s1 3/4
  action beta reward 0
    -> s2 1/4
    -> s1 3/4
state s0
  action tau reward 0
    -> goal 1
state s1
  action tau reward 1
    -> goal 1
state s2
  action tau reward 2
    -> goal 1
state goal
)");
}

/// Geometric self-loop feeding a final 0/1 decision; entry probability p.
inline Mdp loop_mdp(const std::string& p) {
    std::ostringstream out;
    out << R"(mdp
initial s_init
goal goal
state s_init
  action tau reward 0
    -> s1 )" << p
        << "\n    -> goal " << rat_to_string(1 - *parse_rational(p)) << R"(
state s1
  action tau reward 1
    -> s_dec 1/2
    -> s1 1/2
state s_dec
  action alpha reward 1
    -> goal 1
  action beta reward 0
    -> goal 1
state goal
)";
    return parse_model(out.str());
}

/// Like loop_mdp but entered with probability 1/2 and loop reward k.
inline Mdp heavy_loop_mdp(long k) {
    std::ostringstream out;
    out << R"(mdp
initial s_init
goal goal
state s_init
  action tau reward 0
    -> s1 1/2
    -> goal 1/2
state s1
  action tau reward )"
        << k << R"(
    -> s_dec 1/2
    -> s1 1/2
state s_dec
  action alpha reward 1
    -> goal 1
  action beta reward 0
    -> goal 1
state goal
)";
    return parse_model(out.str());
}

/// 0/100 gamble against a safe 40.
inline Mdp gamble_mdp() {
    return parse_model(R"(mdp
initial s_init
goal goal
state s_init
  action alpha reward 0
    -> s0 1/2
    -> s1 1/2
  action beta reward 0
    -> s2 1
state s0
  action tau reward 0
    -> goal 1
state s1
  action tau reward 100
    -> goal 1
state s2
  action tau reward 40
    -> goal 1
state goal
)");
}

inline Mdp trap_only() {
    return parse_model(R"(mdp
initial goal
goal goal
state goal
)");
}

inline MemorylessRandomized dirac_choice(const Mdp& m, const std::string& state, const std::string& action) {
    MemorylessRandomized ml;
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.is_trap(s)) continue;
        if (m.state_names[s] == state) {
            ml.choice[s] = {ActionProb{m.action_index(action), Rat(1)}};
        } else {
            ml.choice[s] = {ActionProb{m.choices[s][0].action, Rat(1)}};
        }
    }
    return ml;
}

/// Mixes `action` with probability p against the other action at `state`;
/// all other states follow their single action.
inline MemorylessRandomized mix_choice(const Mdp& m, const std::string& state, const std::string& action,
                                       const Rat& p) {
    MemorylessRandomized ml;
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.is_trap(s)) continue;
        if (m.state_names[s] == state) {
            std::vector<ActionProb> dist;
            for (const auto& c : m.choices[s])
                dist.push_back({c.action, m.action_names[c.action] == action ? p : 1 - p});
            ml.choice[s] = std::move(dist);
        } else {
            ml.choice[s] = {ActionProb{m.choices[s][0].action, Rat(1)}};
        }
    }
    return ml;
}

inline Scheduler wrap(MemorylessRandomized ml) {
    Scheduler s;
    s.rule = std::move(ml);
    return s;
}

/// Exact expected total reward of a memoryless randomized scheduler, by
/// policy evaluation on the induced chain.
inline Rat expected_reward_of(const Mdp& m, const MemorylessRandomized& sched) {
    Chain c = induce_chain(m, sched);
    std::map<int, int> policy;
    for (int s = 0; s < c.state_count(); ++s)
        if (!c.is_trap(s)) policy[s] = c.mdp.choices[s][0].action;
    return evaluate_policy(c.mdp, policy)[c.mdp.initial];
}

/// Layered random DAG: states s0..s_{n-2} plus goal; every action jumps
/// strictly forward, so the model is acyclic with goal the unique trap.
/// Probability denominators are powers of two up to 2^max_den_pow.
inline Mdp random_acyclic_mdp(std::mt19937_64& rng, int n_states, int max_actions, long max_reward,
                              int decision_states = -1, int max_den_pow = 3) {
    Mdp m;
    for (int i = 0; i < n_states - 1; ++i) m.intern_state("s" + std::to_string(i));
    int goal = m.intern_state("goal");
    m.initial = 0;
    m.goal = goal;
    auto rnd = [&](long lo, long hi) { return static_cast<long>(lo + rng() % (hi - lo + 1)); };
    for (int i = 0; i < n_states - 1; ++i) {
        int acts;
        if (decision_states >= 0)
            acts = i < decision_states ? 2 : 1;
        else
            acts = static_cast<int>(rnd(1, max_actions));
        for (int a = 0; a < acts; ++a) {
            int action = m.intern_action("a" + std::to_string(a));
            ActionChoice c{action, Rat(rnd(0, max_reward)), {}};
            long den = 1 << rnd(0, max_den_pow);
            long remaining = den;
            std::vector<std::pair<int, Rat>> succ;
            while (remaining > 0) {
                int target = static_cast<int>(rnd(i + 1, n_states - 1));
                long part = remaining == 1 ? 1 : rnd(1, remaining);
                remaining -= part;
                bool merged = false;
                for (auto& [t, p] : succ)
                    if (t == target) {
                        p += rat(part, den);
                        merged = true;
                    }
                if (!merged) succ.emplace_back(target, rat(part, den));
            }
            for (auto& [t, p] : succ) {
                p.canonicalize();
                c.successors.push_back({t, p});
            }
            m.choices[i].push_back(std::move(c));
        }
    }
    return m;
}

inline Chain random_acyclic_chain(std::mt19937_64& rng, int n_states, long max_reward) {
    Mdp m = random_acyclic_mdp(rng, n_states, 1, max_reward, 0);
    m.declared_chain = true;
    return Chain::from_mdp(std::move(m));
}

/// Largest accumulated reward over maximal paths (finite on acyclic models).
inline long max_path_reward_of(const Mdp& m) {
    auto topo = m.topological_order();
    std::vector<Rat> best(m.state_count(), Rat(0));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        for (const auto& c : m.choices[*it])
            for (const auto& t : c.successors) {
                Rat v = c.reward + best[t.target];
                if (v > best[*it]) best[*it] = v;
            }
    }
    return rat_ceil_long(best[m.initial]);
}

/// Random reward-based scheduler covering every reachable (state, reward)
/// pair of an acyclic model; denominators <= 8.
inline Scheduler random_reward_based(std::mt19937_64& rng, const Mdp& m) {
    std::set<std::pair<int, long>> seen{{m.initial, 0}};
    std::vector<std::pair<int, long>> work{{m.initial, 0}};
    while (!work.empty()) {
        auto [s, w] = work.back();
        work.pop_back();
        for (const auto& c : m.choices[s]) {
            long v = w + c.reward.get_num().get_si();
            for (const auto& t : c.successors)
                if (seen.insert({t.target, v}).second) work.push_back({t.target, v});
        }
    }
    RewardBasedRandomized rb;
    for (const auto& [s, w] : seen) {
        if (m.is_trap(s)) continue;
        long den = 8;
        long remaining = den;
        std::vector<ActionProb> dist;
        for (size_t i = 0; i < m.choices[s].size(); ++i) {
            long part = i + 1 == m.choices[s].size() ? remaining
                                                     : static_cast<long>(rng() % (remaining + 1));
            remaining -= part;
            dist.push_back({m.choices[s][i].action, rat(part, den)});
        }
        rb.choice[{s, w}] = std::move(dist);
    }
    Scheduler sched;
    sched.rule = std::move(rb);
    return sched;
}

/// S raised to T at bound k: the input scheduler below k, the expectation
/// optimal policy from k on.
inline Scheduler lift_to_ermax(const Mdp& m, const Scheduler& s, long k, const std::map<int, int>& tmax_policy) {
    RewardBasedRandomized out;
    const auto& rb = std::get<RewardBasedRandomized>(s.rule);
    for (const auto& [key, dist] : rb.choice)
        if (key.second < k) out.choice[key] = dist;
    for (const auto& [st, a] : tmax_policy) out.choice[{st, k}] = {ActionProb{a, Rat(1)}};
    Scheduler lifted;
    lifted.rule = std::move(out);
    return lifted;
}

/// Reward-based scheduler reinterpreted as a memoryless one on the
/// unfolding: (s, w) nodes take S(s, w), terminal nodes take tau. Nodes the
/// scheduler never covers are unreachable pairs; any choice works there.
inline MemorylessRandomized scheduler_on_unfolding(const UnfoldedN& n, const Scheduler& s) {
    MemorylessRandomized ml;
    for (int node = 0; node < n.mdp.state_count(); ++node) {
        const auto& [orig, w] = n.node_info[node];
        if (orig < 0) continue;
        if (n.mdp.is_trap(node)) continue;
        if (n.is_terminal(node)) {
            ml.choice[node] = {ActionProb{n.mdp.choices[node][0].action, Rat(1)}};
        } else {
            try {
                ml.choice[node] = s.distribution_at(n.mdp, orig, Rat(w));
            } catch (const ModelError&) {
                ml.choice[node] = {ActionProb{n.mdp.choices[node][0].action, Rat(1)}};
            }
        }
    }
    return ml;
}

/// Enumerates basic solutions from every n-subset of the tight hyperplane
/// candidates (rows as equalities plus the variable bounds); the brute
/// oracle the simplex is checked against. Returns the best objective over
/// feasible vertices, or nothing when no vertex is feasible.
inline std::optional<Rat> vertex_enumeration_optimum(const LpProblem& p) {
    int n = static_cast<int>(p.var_names.size());
    std::vector<std::vector<Rat>> planes;  // coefficients, last entry rhs
    for (const auto& r : p.rows) {
        std::vector<Rat> row(n + 1, Rat(0));
        for (const auto& [v, c] : r.terms) row[v] += c;
        row[n] = r.rhs;
        planes.push_back(std::move(row));
    }
    for (int j = 0; j < n; ++j) {
        std::vector<Rat> row(n + 1, Rat(0));
        row[j] = 1;
        row[n] = 0;  // x_j = 0
        planes.push_back(row);
        if (!p.upper.empty() && p.upper[j]) {
            std::vector<Rat> up(n + 1, Rat(0));
            up[j] = 1;
            up[n] = *p.upper[j];
            planes.push_back(up);
        }
    }
    std::optional<Rat> best;
    int m = static_cast<int>(planes.size());
    std::vector<int> pick(n);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == n) {
            std::vector<std::vector<Rat>> a(n, std::vector<Rat>(n));
            std::vector<Rat> b(n);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) a[i][j] = planes[pick[i]][j];
                b[i] = planes[pick[i]][n];
            }
            std::vector<Rat> x;
            try {
                x = solve_linear_system(a, b);
            } catch (...) {
                return;
            }
            for (int j = 0; j < n; ++j)
                if (x[j] < 0 || (!p.upper.empty() && p.upper[j] && x[j] > *p.upper[j])) return;
            for (const auto& r : p.rows) {
                Rat lhs(0);
                for (const auto& [v, c] : r.terms) lhs += c * x[v];
                if (r.rel == Relation::le && lhs > r.rhs) return;
                if (r.rel == Relation::ge && lhs < r.rhs) return;
                if (r.rel == Relation::eq && lhs != r.rhs) return;
            }
            Rat obj(0);
            for (int j = 0; j < n; ++j) obj += p.objective[j] * x[j];
            if (!best || obj > *best) best = obj;
            return;
        }
        for (int i = start; i < m; ++i) {
            pick[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
    return best;
}

/// Random exact distribution on small integer support.
inline RewardDistribution random_distribution(std::mt19937_64& rng, int max_atoms = 6, long max_value = 20) {
    int k = 2 + static_cast<int>(rng() % (max_atoms - 1));
    long den = 1 + static_cast<long>(rng() % 64);
    std::map<Rat, Rat> atoms;
    long remaining = den;
    for (int i = 0; i < k && remaining > 0; ++i) {
        long part = i + 1 == k ? remaining : 1 + static_cast<long>(rng() % remaining);
        remaining -= part;
        atoms[Rat(static_cast<long>(rng() % (max_value + 1)))] += rat(part, den);
    }
    if (remaining > 0) atoms[Rat(0)] += rat(remaining, den);
    return RewardDistribution::from_map(atoms);
}

}  // namespace riskmdp::testing
