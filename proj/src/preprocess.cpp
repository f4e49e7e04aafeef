#include "riskmdp/preprocess.hpp"

#include <algorithm>
#include <stdexcept>

namespace riskmdp {

namespace {

/// Iterative Tarjan over an adjacency list; returns component id per node
/// (ids are arbitrary but consistent).
std::vector<int> strongly_connected_components(const std::vector<std::vector<int>>& adj, int& scc_count) {
    int n = static_cast<int>(adj.size());
    std::vector<int> index(n, -1), lowlink(n, 0), comp(n, -1);
    std::vector<bool> on_stack(n, false);
    std::vector<int> stack;
    int next_index = 0;
    scc_count = 0;

    struct Frame {
        int node;
        size_t edge;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] != -1) continue;
        std::vector<Frame> call;
        call.push_back({root, 0});
        index[root] = lowlink[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < adj[f.node].size()) {
                int t = adj[f.node][f.edge++];
                if (index[t] == -1) {
                    index[t] = lowlink[t] = next_index++;
                    stack.push_back(t);
                    on_stack[t] = true;
                    call.push_back({t, 0});
                } else if (on_stack[t]) {
                    lowlink[f.node] = std::min(lowlink[f.node], index[t]);
                }
            } else {
                if (lowlink[f.node] == index[f.node]) {
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        on_stack[w] = false;
                        comp[w] = scc_count;
                        if (w == f.node) break;
                    }
                    ++scc_count;
                }
                int done = f.node;
                call.pop_back();
                if (!call.empty()) {
                    int parent = call.back().node;
                    lowlink[parent] = std::min(lowlink[parent], lowlink[done]);
                }
            }
        }
    }
    return comp;
}

}  // namespace

std::vector<EndComponent> mec_decomposition(const Mdp& m) {
    int n = m.state_count();
    // retained[s] = indices into m.choices[s] still in play
    std::vector<std::vector<int>> retained(n);
    for (int s = 0; s < n; ++s)
        for (int i = 0; i < static_cast<int>(m.choices[s].size()); ++i) retained[s].push_back(i);

    bool changed = true;
    std::vector<int> comp;
    int scc_count = 0;
    while (changed) {
        changed = false;
        std::vector<std::vector<int>> adj(n);
        for (int s = 0; s < n; ++s)
            for (int i : retained[s])
                for (const auto& t : m.choices[s][i].successors) adj[s].push_back(t.target);
        comp = strongly_connected_components(adj, scc_count);
        for (int s = 0; s < n; ++s) {
            auto& keep = retained[s];
            auto in_same = [&](int i) {
                for (const auto& t : m.choices[s][i].successors)
                    if (comp[t.target] != comp[s]) return false;
                return true;
            };
            size_t before = keep.size();
            keep.erase(std::remove_if(keep.begin(), keep.end(), [&](int i) { return !in_same(i); }), keep.end());
            if (keep.size() != before) changed = true;
        }
    }

    // group states by component; a component is an EC iff every member still
    // has a retained action (singletons need a retained self-loop)
    std::vector<std::vector<int>> members(scc_count);
    for (int s = 0; s < n; ++s) members[comp[s]].push_back(s);
    std::vector<EndComponent> result;
    for (const auto& group : members) {
        bool all_have = true;
        for (int s : group)
            if (retained[s].empty()) all_have = false;
        if (!all_have || group.empty()) continue;
        EndComponent ec;
        ec.states = group;
        std::sort(ec.states.begin(), ec.states.end(),
                  [&](int a, int b) { return m.state_names[a] < m.state_names[b]; });
        for (int s : ec.states) {
            std::vector<int> acts;
            for (int i : retained[s]) {
                acts.push_back(m.choices[s][i].action);
                if (m.choices[s][i].reward != 0) ec.is_zero = false;
            }
            ec.actions[s] = acts;
        }
        result.push_back(std::move(ec));
    }
    std::sort(result.begin(), result.end(), [&](const EndComponent& a, const EndComponent& b) {
        return m.state_names[a.states[0]] < m.state_names[b.states[0]];
    });
    return result;
}

bool check_finite_expectation(const Mdp& m) {
    for (const auto& ec : mec_decomposition(m))
        if (!ec.is_zero) return false;
    return true;
}

namespace {

std::string fresh_name(const std::set<std::string>& taken, std::string base) {
    while (taken.count(base)) base += "'";
    return base;
}

/// Remaps successor targets, merging duplicates while keeping the original
/// first-occurrence order (so untouched models serialize identically).
std::vector<Transition> remap_successors(const std::vector<Transition>& succs, const std::vector<int>& to) {
    std::vector<Transition> out;
    for (const auto& t : succs) {
        int target = to[t.target];
        bool merged = false;
        for (auto& existing : out)
            if (existing.target == target) {
                existing.prob += t.prob;
                merged = true;
            }
        if (!merged) out.push_back({target, t.prob});
    }
    return out;
}

}  // namespace

NormalizedMdp normalize(const Mdp& m) {
    if (!check_finite_expectation(m))
        throw ModelError(ModelErrorKind::precondition,
                         "maximal expected reward is infinite (positive-reward end component)");
    auto ecs = mec_decomposition(m);

    // stage 1: collapse every maximal end component into one state with the
    // non-retained exits of its members plus a zero-reward escape to a trap
    int n = m.state_count();
    std::vector<int> ec_of(n, -1);
    for (int k = 0; k < static_cast<int>(ecs.size()); ++k)
        for (int s : ecs[k].states) ec_of[s] = k;

    Mdp mid;
    mid.action_names = m.action_names;
    std::set<std::string> taken(m.state_names.begin(), m.state_names.end());
    std::vector<std::string> ec_names;
    for (size_t k = 0; k < ecs.size(); ++k) {
        ec_names.push_back(fresh_name(taken, "ec#" + std::to_string(k)));
        taken.insert(ec_names.back());
    }

    // state mapping old -> mid
    std::vector<int> to_mid(n, -1);
    for (int s = 0; s < n; ++s)
        to_mid[s] = mid.intern_state(ec_of[s] < 0 ? m.state_names[s] : ec_names[ec_of[s]]);
    int trap_mid = -1;
    int escape_action = -1;
    std::string trap_name;
    if (!ecs.empty()) {
        // escape target for the collapsed components
        trap_name = fresh_name(taken, "sink");
        trap_mid = mid.intern_state(trap_name);
        escape_action = mid.intern_action(
            fresh_name(std::set<std::string>(m.action_names.begin(), m.action_names.end()), "escape"));
    }
    mid.initial = to_mid[m.initial];

    std::map<std::string, std::set<std::string>> provenance;
    for (size_t k = 0; k < ecs.size(); ++k)
        for (int s : ecs[k].states) provenance[ec_names[k]].insert(m.state_names[s]);

    auto add_redirected = [&](int mid_state, int action, const Rat& reward, const std::vector<Transition>& succs) {
        ActionChoice c{action, reward, remap_successors(succs, to_mid)};
        mid.choices[mid_state].push_back(std::move(c));
    };

    for (int s = 0; s < n; ++s) {
        if (ec_of[s] >= 0) continue;
        for (const auto& c : m.choices[s]) add_redirected(to_mid[s], c.action, c.reward, c.successors);
    }
    for (size_t k = 0; k < ecs.size(); ++k) {
        int node = mid.state_index(ec_names[k]);
        for (int s : ecs[k].states) {
            const auto& kept = ecs[k].actions.at(s);
            for (const auto& c : m.choices[s]) {
                if (std::find(kept.begin(), kept.end(), c.action) != kept.end()) continue;
                // exits keep their reward; qualify the name so two members'
                // same-named exits stay distinct pairs
                int a = mid.intern_action(m.state_names[s] + ":" + m.action_names[c.action]);
                add_redirected(node, a, c.reward, c.successors);
            }
        }
        mid.choices[node].push_back(ActionChoice{escape_action, Rat(0), {Transition{trap_mid, Rat(1)}}});
    }

    // stage 2: collapse states with maximal expected reward zero (no
    // positive-reward pair reachable) together with the trap into `goal`
    int nm = mid.state_count();
    std::vector<std::vector<int>> radj(nm);
    std::vector<int> seeds;
    for (int s = 0; s < nm; ++s) {
        bool positive = false;
        for (const auto& c : mid.choices[s]) {
            if (c.reward > 0) positive = true;
            for (const auto& t : c.successors) radj[t.target].push_back(s);
        }
        if (positive) seeds.push_back(s);
    }
    std::vector<bool> has_value(nm, false);
    std::vector<int> work = seeds;
    for (int s : seeds) has_value[s] = true;
    while (!work.empty()) {
        int s = work.back();
        work.pop_back();
        for (int p : radj[s])
            if (!has_value[p]) {
                has_value[p] = true;
                work.push_back(p);
            }
    }

    Mdp out;
    out.action_names = mid.action_names;
    std::set<std::string> survivors;
    for (int s = 0; s < nm; ++s)
        if (has_value[s]) survivors.insert(mid.state_names[s]);
    std::string goal_name = fresh_name(survivors, "goal");

    // the collapsed goal takes the position of the first value-zero state,
    // which keeps already-normalized models bit identical
    std::vector<int> to_out(nm, -1);
    int goal_out = -1;
    for (int s = 0; s < nm; ++s) {
        if (has_value[s]) {
            to_out[s] = out.intern_state(mid.state_names[s]);
        } else if (goal_out < 0) {
            goal_out = out.intern_state(goal_name);
            to_out[s] = goal_out;
        }
    }
    if (goal_out < 0) goal_out = out.intern_state(goal_name);  // every state had value; fresh trap
    for (int s = 0; s < nm; ++s)
        if (to_out[s] < 0) to_out[s] = goal_out;

    std::set<std::string> absorbed;
    for (int s = 0; s < nm; ++s) {
        if (!has_value[s]) {
            // the synthetic escape sink is bookkeeping, not an input state
            if (trap_name.empty() || mid.state_names[s] != trap_name) absorbed.insert(mid.state_names[s]);
            continue;
        }
        for (const auto& c : mid.choices[s])
            out.choices[to_out[s]].push_back(ActionChoice{c.action, c.reward, remap_successors(c.successors, to_out)});
    }
    // a pure rename of the original goal is not a collapse
    if (!(absorbed.size() == 1 && *absorbed.begin() == goal_name))
        if (!absorbed.empty()) provenance[goal_name] = std::move(absorbed);
    out.initial = to_out[mid.initial];
    out.goal = goal_out;
    out.declared_chain = m.declared_chain;
    for (int s = 0; s < out.state_count() && out.declared_chain; ++s)
        if (out.choices[s].size() > 1) out.declared_chain = false;

    NormalizedMdp norm;
    norm.mdp = std::move(out);
    norm.goal = goal_out;
    norm.provenance = std::move(provenance);
    if (!mec_decomposition(norm.mdp).empty())
        throw std::logic_error("normalize: end components survived the collapse");
    return norm;
}

NormalizedMdp NormalizedMdp::adopt(Mdp m) {
    int trap = -1;
    for (int s = 0; s < m.state_count(); ++s) {
        if (!m.is_trap(s)) continue;
        if (trap >= 0)
            throw ModelError(ModelErrorKind::precondition,
                             "model has several trap states ('" + m.state_names[trap] + "', '" + m.state_names[s] +
                                 "'); normalize it first");
        trap = s;
    }
    if (trap < 0)
        throw ModelError(ModelErrorKind::precondition, "model has no trap state; normalize it first");
    if (m.goal && *m.goal != trap)
        throw ModelError(ModelErrorKind::precondition, "declared goal is not the trap state");
    if (!mec_decomposition(m).empty())
        throw ModelError(ModelErrorKind::precondition, "model has end components; normalize it first");
    NormalizedMdp norm;
    norm.goal = trap;
    m.goal = trap;
    norm.mdp = std::move(m);
    return norm;
}

NormalizedMdp ensure_normalized(const Mdp& m) {
    int traps = 0;
    for (int s = 0; s < m.state_count(); ++s)
        if (m.is_trap(s)) ++traps;
    if (traps == 1 && mec_decomposition(m).empty()) return NormalizedMdp::adopt(m);
    return normalize(m);
}

}  // namespace riskmdp
