#include "riskmdp/model.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <sstream>

namespace riskmdp {

int Mdp::state_index(const std::string& name) const {
    if (static_cast<int>(state_lookup.size()) == state_count()) {
        auto it = state_lookup.find(name);
        return it == state_lookup.end() ? -1 : it->second;
    }
    // hand-assembled models may bypass intern_state; fall back to a scan
    for (int i = 0; i < state_count(); ++i)
        if (state_names[i] == name) return i;
    return -1;
}

int Mdp::action_index(const std::string& name) const {
    for (int i = 0; i < static_cast<int>(action_names.size()); ++i)
        if (action_names[i] == name) return i;
    return -1;
}

int Mdp::intern_action(const std::string& name) {
    int idx = action_index(name);
    if (idx >= 0) return idx;
    action_names.push_back(name);
    return static_cast<int>(action_names.size()) - 1;
}

int Mdp::intern_state(const std::string& name) {
    int idx = state_index(name);
    if (idx >= 0) return idx;
    state_names.push_back(name);
    choices.emplace_back();
    idx = static_cast<int>(state_names.size()) - 1;
    state_lookup[name] = idx;
    return idx;
}

const ActionChoice* Mdp::choice_for(int state, int action) const {
    for (const auto& c : choices[state])
        if (c.action == action) return &c;
    return nullptr;
}

Rat Mdp::max_reward() const {
    Rat best(0);
    for (const auto& st : choices)
        for (const auto& c : st)
            if (c.reward > best) best = c.reward;
    return best;
}

std::vector<int> Mdp::topological_order() const {
    // self-loop edges are counted too, so looping states never reach
    // indegree zero and the sort reports the cycle
    int n = state_count();
    std::vector<int> indeg(n, 0);
    for (int s = 0; s < n; ++s)
        for (const auto& c : choices[s])
            for (const auto& t : c.successors) ++indeg[t.target];
    std::vector<int> order, stack;
    for (int s = 0; s < n; ++s)
        if (indeg[s] == 0) stack.push_back(s);
    while (!stack.empty()) {
        int s = stack.back();
        stack.pop_back();
        order.push_back(s);
        for (const auto& c : choices[s])
            for (const auto& t : c.successors) {
                if (--indeg[t.target] == 0) stack.push_back(t.target);
            }
    }
    if (static_cast<int>(order.size()) != n) return {};
    return order;
}

bool Mdp::acyclic() const { return !topological_order().empty() || state_count() == 0; }

Chain Chain::from_mdp(Mdp m) {
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.choices[s].size() > 1)
            throw ModelError(ModelErrorKind::precondition,
                             "state '" + m.state_names[s] + "' has more than one action; not a chain");
        if (!m.choices[s].empty()) {
            Rat sum(0);
            for (const auto& t : m.choices[s][0].successors) sum += t.prob;
            if (sum != 1)
                throw ModelError(ModelErrorKind::probability_sum,
                                 "chain state '" + m.state_names[s] + "' probabilities do not sum to 1");
        }
    }
    Chain c;
    c.mdp = std::move(m);
    return c;
}

std::vector<ActionProb> Scheduler::distribution_at(const Mdp& m, int state, const Rat& w) const {
    if (const auto* ml = std::get_if<MemorylessRandomized>(&rule)) {
        auto it = ml->choice.find(state);
        if (it == ml->choice.end())
            throw ModelError(ModelErrorKind::scheduler,
                             "scheduler has no entry for state '" + m.state_names[state] + "'");
        return it->second;
    }
    if (const auto* rb = std::get_if<RewardBasedRandomized>(&rule)) {
        // entry with the largest stored level <= w
        long wl = rat_is_integer(w) && w.get_num().fits_slong_p() ? w.get_num().get_si()
                                                                  : rat_floor(w).get_num().get_si();
        auto it = rb->choice.upper_bound({state, wl});
        if (it == rb->choice.begin() || std::prev(it)->first.first != state)
            throw ModelError(ModelErrorKind::scheduler,
                             "scheduler has no entry for state '" + m.state_names[state] +
                                 "' at reward " + rat_to_string(w));
        return std::prev(it)->second;
    }
    const auto& fm = std::get<FiniteMemoryDeterministic>(rule);
    long wl = rat_floor(w).get_num().get_si();
    long mode = std::min(wl, fm.cap);
    auto it = fm.choice.find({state, mode});
    if (it == fm.choice.end())
        throw ModelError(ModelErrorKind::scheduler,
                         "scheduler has no entry for state '" + m.state_names[state] + "' at mode " +
                             std::to_string(mode));
    return {ActionProb{it->second, Rat(1)}};
}

bool Scheduler::deterministic() const {
    if (std::holds_alternative<FiniteMemoryDeterministic>(rule)) return true;
    auto dirac = [](const std::vector<ActionProb>& d) { return d.size() == 1 && d[0].prob == 1; };
    if (const auto* ml = std::get_if<MemorylessRandomized>(&rule)) {
        for (const auto& [s, d] : ml->choice)
            if (!dirac(d)) return false;
        return true;
    }
    const auto& rb = std::get<RewardBasedRandomized>(rule);
    for (const auto& [k, d] : rb.choice)
        if (!dirac(d)) return false;
    return true;
}

RewardDistribution RewardDistribution::from_map(const std::map<Rat, Rat>& m, const Rat& tail) {
    RewardDistribution d;
    d.tail_mass = tail;
    for (const auto& [v, p] : m)
        if (p != 0) d.atoms.emplace_back(v, p);
    return d;
}

Rat RewardDistribution::total_mass() const {
    Rat s = tail_mass;
    for (const auto& [v, p] : atoms) s += p;
    return s;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') break;
        out.push_back(tok);
    }
    return out;
}

}  // namespace

Mdp parse_model(const std::string& text) {
    Mdp m;
    {
        // states take their indices from declaration order, so serialize
        // followed by parse reproduces the model verbatim
        std::istringstream scan(text);
        std::string line;
        while (std::getline(scan, line)) {
            auto toks = tokenize(line);
            if (toks.size() == 2 && toks[0] == "state") m.intern_state(toks[1]);
        }
    }
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool saw_header = false;
    std::string initial_name, goal_name;
    int cur_state = -1;
    ActionChoice* cur_action = nullptr;
    // (state, action) pairs seen, to reject duplicates
    std::set<std::pair<int, int>> seen_actions;

    while (std::getline(in, line)) {
        ++lineno;
        auto toks = tokenize(line);
        if (toks.empty()) continue;

        if (!saw_header) {
            if (toks[0] != "mdp" && toks[0] != "chain")
                throw ModelError(ModelErrorKind::syntax, "expected 'mdp' or 'chain' header", lineno);
            m.declared_chain = toks[0] == "chain";
            saw_header = true;
            continue;
        }
        if (toks[0] == "initial") {
            if (toks.size() != 2) throw ModelError(ModelErrorKind::syntax, "initial takes one state id", lineno);
            initial_name = toks[1];
        } else if (toks[0] == "goal") {
            if (toks.size() != 2) throw ModelError(ModelErrorKind::syntax, "goal takes one state id", lineno);
            goal_name = toks[1];
        } else if (toks[0] == "state") {
            if (toks.size() != 2) throw ModelError(ModelErrorKind::syntax, "state takes one id", lineno);
            cur_state = m.intern_state(toks[1]);
            cur_action = nullptr;
        } else if (toks[0] == "action") {
            if (cur_state < 0) throw ModelError(ModelErrorKind::syntax, "action outside a state block", lineno);
            if (toks.size() != 4 || toks[2] != "reward")
                throw ModelError(ModelErrorKind::syntax, "expected 'action <id> reward <n>'", lineno);
            auto rew = parse_rational(toks[3]);
            if (!rew) throw ModelError(ModelErrorKind::syntax, "malformed reward '" + toks[3] + "'", lineno);
            if (*rew < 0)
                throw ModelError(ModelErrorKind::negative_reward, "negative reward on line " + std::to_string(lineno),
                                 lineno);
            if (!rat_is_integer(*rew))
                throw ModelError(ModelErrorKind::non_integer_reward,
                                 "non-integer reward '" + toks[3] + "'; scale the model to integer rewards", lineno);
            int a = m.intern_action(toks[1]);
            if (!seen_actions.insert({cur_state, a}).second)
                throw ModelError(ModelErrorKind::duplicate_transition,
                                 "duplicate action '" + toks[1] + "' at state '" + m.state_names[cur_state] + "'",
                                 lineno);
            m.choices[cur_state].push_back(ActionChoice{a, *rew, {}});
            cur_action = &m.choices[cur_state].back();
        } else if (toks[0] == "->") {
            if (!cur_action) throw ModelError(ModelErrorKind::syntax, "transition outside an action block", lineno);
            if (toks.size() != 3) throw ModelError(ModelErrorKind::syntax, "expected '-> <state> <prob>'", lineno);
            auto p = parse_rational(toks[2]);
            if (!p) throw ModelError(ModelErrorKind::syntax, "malformed probability '" + toks[2] + "'", lineno);
            if (*p <= 0 || *p > 1)
                throw ModelError(ModelErrorKind::probability_sum,
                                 "transition probability " + toks[2] + " outside (0,1]", lineno);
            int t = m.intern_state(toks[1]);
            for (const auto& tr : cur_action->successors)
                if (tr.target == t)
                    throw ModelError(ModelErrorKind::duplicate_transition,
                                     "duplicate successor '" + toks[1] + "'", lineno);
            cur_action->successors.push_back(Transition{t, *p});
        } else {
            throw ModelError(ModelErrorKind::syntax, "unrecognized directive '" + toks[0] + "'", lineno);
        }
    }
    if (!saw_header) throw ModelError(ModelErrorKind::syntax, "empty document", 0);
    if (initial_name.empty()) throw ModelError(ModelErrorKind::syntax, "missing 'initial' declaration", 0);
    m.initial = m.state_index(initial_name);
    if (m.initial < 0)
        throw ModelError(ModelErrorKind::unknown_reference, "initial state '" + initial_name + "' is not declared");
    if (!goal_name.empty()) {
        int g = m.state_index(goal_name);
        if (g < 0) throw ModelError(ModelErrorKind::unknown_reference, "goal state '" + goal_name + "' is not declared");
        m.goal = g;
    }
    for (int s = 0; s < m.state_count(); ++s) {
        for (const auto& c : m.choices[s]) {
            Rat sum(0);
            for (const auto& t : c.successors) sum += t.prob;
            if (sum != 1)
                throw ModelError(ModelErrorKind::probability_sum,
                                 "successors of state '" + m.state_names[s] + "' action '" +
                                     m.action_names[c.action] + "' sum to " + rat_to_string(sum));
        }
    }
    if (m.declared_chain) {
        for (int s = 0; s < m.state_count(); ++s)
            if (m.choices[s].size() > 1)
                throw ModelError(ModelErrorKind::syntax,
                                 "chain document declares several actions at state '" + m.state_names[s] + "'");
    }
    return m;
}

std::string serialize_model(const Mdp& m) {
    std::ostringstream out;
    out << (m.declared_chain ? "chain" : "mdp") << "\n";
    out << "initial " << m.state_names[m.initial] << "\n";
    if (m.goal) out << "goal " << m.state_names[*m.goal] << "\n";
    for (int s = 0; s < m.state_count(); ++s) {
        out << "state " << m.state_names[s] << "\n";
        for (const auto& c : m.choices[s]) {
            out << "  action " << m.action_names[c.action] << " reward " << rat_to_string(c.reward) << "\n";
            for (const auto& t : c.successors)
                out << "    -> " << m.state_names[t.target] << " " << rat_to_string(t.prob) << "\n";
        }
    }
    return out.str();
}

ValidationReport validate(const Mdp& m) {
    ValidationReport rep;
    auto add = [&](ModelErrorKind k, std::string msg) { rep.issues.push_back({k, std::move(msg)}); };
    if (m.initial < 0 || m.initial >= m.state_count())
        add(ModelErrorKind::unknown_reference, "initial state index out of range");
    for (int s = 0; s < m.state_count(); ++s) {
        for (const auto& c : m.choices[s]) {
            if (c.reward < 0)
                add(ModelErrorKind::negative_reward,
                    "negative reward at state '" + m.state_names[s] + "'");
            else if (!rat_is_integer(c.reward))
                add(ModelErrorKind::non_integer_reward,
                    "non-integer reward at state '" + m.state_names[s] + "'");
            Rat sum(0);
            for (const auto& t : c.successors) {
                if (t.target < 0 || t.target >= m.state_count())
                    add(ModelErrorKind::unknown_reference, "transition to undeclared state");
                if (t.prob <= 0 || t.prob > 1)
                    add(ModelErrorKind::probability_sum,
                        "probability outside (0,1] at state '" + m.state_names[s] + "'");
                sum += t.prob;
            }
            if (sum != 1)
                add(ModelErrorKind::probability_sum,
                    "probabilities at state '" + m.state_names[s] + "' action '" + m.action_names[c.action] +
                        "' sum to " + rat_to_string(sum));
        }
    }
    if (m.goal && !m.is_trap(*m.goal))
        add(ModelErrorKind::precondition, "goal state '" + m.state_names[*m.goal] + "' is not a trap");
    return rep;
}

Chain induce_chain(const Mdp& m, const MemorylessRandomized& sched) {
    Mdp out;
    out.declared_chain = true;
    out.action_names = {"step"};
    // original states first, then one node per (state, chosen action)
    for (const auto& name : m.state_names) out.intern_state(name);
    out.initial = m.initial;
    out.goal = m.goal;

    for (int s = 0; s < m.state_count(); ++s) {
        if (m.is_trap(s)) continue;
        auto it = sched.choice.find(s);
        if (it == sched.choice.end())
            throw ModelError(ModelErrorKind::scheduler,
                             "scheduler misses non-trap state '" + m.state_names[s] + "'");
        Rat sum(0);
        ActionChoice mix{0, Rat(0), {}};
        for (const auto& ap : it->second) {
            const ActionChoice* c = m.choice_for(s, ap.action);
            if (!c)
                throw ModelError(ModelErrorKind::scheduler,
                                 "scheduler picks disabled action '" + m.action_names[ap.action] + "' at '" +
                                     m.state_names[s] + "'");
            sum += ap.prob;
            if (ap.prob == 0) continue;
            int node = out.intern_state(m.state_names[s] + "." + m.action_names[ap.action]);
            mix.successors.push_back(Transition{node, ap.prob});
            ActionChoice step{0, c->reward, {}};
            for (const auto& t : c->successors) step.successors.push_back(Transition{t.target, t.prob});
            out.choices[node].push_back(std::move(step));
        }
        if (sum != 1)
            throw ModelError(ModelErrorKind::scheduler,
                             "scheduler distribution at '" + m.state_names[s] + "' sums to " + rat_to_string(sum));
        out.choices[s].push_back(std::move(mix));
    }
    return Chain::from_mdp(std::move(out));
}

Scheduler parse_scheduler(const Mdp& m, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    bool any_reward = false;
    MemorylessRandomized ml;
    RewardBasedRandomized rb;
    while (std::getline(in, line)) {
        ++lineno;
        auto colon = line.find(':');
        std::string head = colon == std::string::npos ? line : line.substr(0, colon);
        auto toks = tokenize(head);
        if (toks.empty()) continue;
        if (toks[0] != "state" || colon == std::string::npos)
            throw ModelError(ModelErrorKind::syntax, "expected 'state <id> [reward <w>]: a=p ...'", lineno);
        if (toks.size() != 2 && (toks.size() != 4 || toks[2] != "reward"))
            throw ModelError(ModelErrorKind::syntax, "malformed scheduler line", lineno);
        int s = m.state_index(toks[1]);
        if (s < 0)
            throw ModelError(ModelErrorKind::unknown_reference, "unknown state '" + toks[1] + "'", lineno);
        long w = 0;
        bool has_w = toks.size() == 4;
        if (has_w) {
            auto wr = parse_rational(toks[3]);
            if (!wr || !rat_is_integer(*wr) || *wr < 0)
                throw ModelError(ModelErrorKind::syntax, "reward qualifier must be a non-negative integer", lineno);
            w = wr->get_num().get_si();
            any_reward = true;
        }
        std::vector<ActionProb> dist;
        Rat sum(0);
        for (const auto& part : tokenize(line.substr(colon + 1))) {
            auto eq = part.find('=');
            if (eq == std::string::npos)
                throw ModelError(ModelErrorKind::syntax, "expected '<action>=<prob>'", lineno);
            int a = m.action_index(part.substr(0, eq));
            if (a < 0 || !m.choice_for(s, a))
                throw ModelError(ModelErrorKind::scheduler,
                                 "action '" + part.substr(0, eq) + "' is not enabled at '" + toks[1] + "'", lineno);
            auto p = parse_rational(part.substr(eq + 1));
            if (!p || *p < 0) throw ModelError(ModelErrorKind::syntax, "malformed probability", lineno);
            dist.push_back({a, *p});
            sum += *p;
        }
        if (sum != 1)
            throw ModelError(ModelErrorKind::scheduler,
                             "scheduler distribution sums to " + rat_to_string(sum), lineno);
        ml.choice[s] = dist;
        rb.choice[{s, w}] = dist;
    }
    // states with a single enabled action need no line in the file
    for (int s = 0; s < m.state_count(); ++s) {
        if (m.choices[s].size() != 1) continue;
        std::vector<ActionProb> dirac{ActionProb{m.choices[s][0].action, Rat(1)}};
        if (!ml.choice.count(s)) ml.choice[s] = dirac;
        if (rb.choice.lower_bound({s, 0}) == rb.choice.upper_bound({s, std::numeric_limits<long>::max()}))
            rb.choice[{s, 0}] = dirac;
    }
    Scheduler sched;
    if (any_reward)
        sched.rule = std::move(rb);
    else
        sched.rule = std::move(ml);
    return sched;
}

std::string serialize_scheduler(const Mdp& m, const Scheduler& sched) {
    std::ostringstream out;
    auto emit = [&](int s, std::optional<long> w, const std::vector<ActionProb>& dist) {
        out << "state " << m.state_names[s];
        if (w) out << " reward " << *w;
        out << ":";
        for (const auto& ap : dist) out << " " << m.action_names[ap.action] << "=" << rat_to_string(ap.prob);
        out << "\n";
    };
    if (const auto* ml = std::get_if<MemorylessRandomized>(&sched.rule)) {
        for (const auto& [s, d] : ml->choice) emit(s, std::nullopt, d);
    } else if (const auto* rb = std::get_if<RewardBasedRandomized>(&sched.rule)) {
        for (const auto& [k, d] : rb->choice) emit(k.first, k.second, d);
    } else {
        const auto& fm = std::get<FiniteMemoryDeterministic>(sched.rule);
        for (const auto& [k, a] : fm.choice) emit(k.first, k.second, {ActionProb{a, Rat(1)}});
    }
    return out.str();
}

std::string model_hash(const Mdp& m) {
    std::string text = serialize_model(m);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string distribution_to_json(const RewardDistribution& d) {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < d.atoms.size(); ++i) {
        if (i) out << ",";
        out << "[\"" << rat_to_string(d.atoms[i].first) << "\",\"" << rat_to_string(d.atoms[i].second) << "\"]";
    }
    out << "]";
    return out.str();
}

}  // namespace riskmdp
