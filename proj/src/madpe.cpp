#include "riskmdp/madpe.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "riskmdp/errors.hpp"
#include "riskmdp/parallel.hpp"

namespace riskmdp {

namespace {

void check_lambda(const Rat& lambda) {
    if (lambda <= 0 || lambda > rat(1, 2))
        throw SolverRefusal(
            "MADPE maximization requires lambda in (0, 1/2]; got " + rat_to_string(lambda) +
            ". Beyond 1/2 optimal schedulers can be forced to minimize future rewards once enough "
            "has been accumulated, so the sweep would not certify anything. Use 'oracle grid' to explore.");
}

}  // namespace

bool UnfoldedN::is_terminal(int node) const {
    const auto& [s, w] = node_info[node];
    if (s < 0) return false;  // goal'
    return s == original_goal || w >= k;
}

Rat UnfoldedN::terminal_reward(int node) const {
    const auto& [s, w] = node_info[node];
    if (s == original_goal) return Rat(w);
    return Rat(w) + emax[s];
}

std::string UnfoldedN::x_name(int node, int action) const {
    const auto& [s, w] = node_info[node];
    const std::string& nodename = mdp.state_names[node];
    std::string sname = nodename.substr(0, nodename.rfind('@'));
    (void)s;
    return "x_" + sname + "_" + std::to_string(w) + "_" + mdp.action_names[action];
}

UnfoldedN build_unfolding_n(const NormalizedMdp& m) {
    UnfoldedN n;
    n.source_hash = model_hash(m.mdp);
    ValueTable vt = optimal_expected_reward(m.mdp, Direction::max);
    n.emax = vt.values;
    n.emax_policy = vt.policy;
    n.emax_initial = vt.values[m.mdp.initial];
    n.k = rat_ceil_long(n.emax_initial);
    Rat maxrew = m.mdp.max_reward();
    n.ell = rat_ceil_long(maxrew);
    n.original_goal = m.goal;

    long levels = std::max<long>(n.k + n.ell, 1);
    Mdp& u = n.mdp;
    u.action_names = m.mdp.action_names;
    n.tau_action = u.intern_action("tau");

    for (int s = 0; s < m.mdp.state_count(); ++s)
        for (long w = 0; w < levels; ++w) {
            int node = u.intern_state(m.mdp.state_names[s] + "@" + std::to_string(w));
            n.node_info.emplace_back(s, w);
            n.node_of[{s, w}] = node;
        }
    std::set<std::string> taken(u.state_names.begin(), u.state_names.end());
    std::string gname = "goal'";
    while (taken.count(gname)) gname += "'";
    n.goal_prime = u.intern_state(gname);
    n.node_info.emplace_back(-1, -1);
    u.initial = n.node_of.at({m.mdp.initial, 0});
    u.goal = n.goal_prime;

    for (int node = 0; node < u.state_count(); ++node) {
        const auto& [s, w] = n.node_info[node];
        if (s < 0) continue;  // goal'
        if (n.is_terminal(node)) {
            u.choices[node].push_back(
                ActionChoice{n.tau_action, n.terminal_reward(node), {Transition{n.goal_prime, Rat(1)}}});
            continue;
        }
        for (const auto& c : m.mdp.choices[s]) {
            long v = w + c.reward.get_num().get_si();
            ActionChoice nc{c.action, Rat(0), {}};
            for (const auto& t : c.successors) nc.successors.push_back({n.node_of.at({t.target, v}), t.prob});
            u.choices[node].push_back(std::move(nc));
        }
    }
    return n;
}

namespace {

/// Deterministic variable enumeration shared by the constraint builder and
/// the sweep: nodes in (state, counter) order, actions in declaration order.
template <typename Fn>
void for_each_frequency_var(const UnfoldedN& n, Fn&& fn) {
    for (int node = 0; node < n.mdp.state_count(); ++node) {
        const auto& [s, w] = n.node_info[node];
        if (s < 0) continue;
        for (const auto& c : n.mdp.choices[node]) fn(node, c.action);
    }
}

std::string freq_var_name(const UnfoldedN& n, int node, int action) { return n.x_name(node, action); }

}  // namespace

LpProblem build_frequency_constraints(const UnfoldedN& n) {
    LpProblem lp;
    std::map<std::pair<int, int>, int> var_of;  // (node, action) -> lp var
    for_each_frequency_var(n, [&](int node, int action) {
        var_of[{node, action}] = lp.add_var(freq_var_name(n, node, action));
    });

    // flow balance per (s, w): outflow - inflow = indicator of the initial node
    int row_idx = 0;
    for (int node = 0; node < n.mdp.state_count(); ++node) {
        const auto& [s, w] = n.node_info[node];
        if (s < 0) continue;
        std::map<int, Rat> coeff;
        for (const auto& c : n.mdp.choices[node]) coeff[var_of.at({node, c.action})] += 1;
        for (int pred = 0; pred < n.mdp.state_count(); ++pred) {
            if (n.node_info[pred].first < 0) continue;
            for (const auto& c : n.mdp.choices[pred])
                for (const auto& t : c.successors)
                    if (t.target == node) coeff[var_of.at({pred, c.action})] -= t.prob;
        }
        std::vector<std::pair<int, Rat>> terms;
        for (const auto& [v, c] : coeff)
            if (c != 0) terms.emplace_back(v, c);
        Rat rhs = node == n.mdp.initial ? Rat(1) : Rat(0);
        lp.add_row("c" + std::to_string(++row_idx), std::move(terms), Relation::eq, rhs);
    }
    return lp;
}

QpModel build_qp(const UnfoldedN& n, const Rat& lambda) {
    check_lambda(lambda);
    QpModel q;
    q.lambda = lambda;
    q.k = n.k;
    q.ell = n.ell;
    q.model_hash = n.source_hash;

    LpProblem base = build_frequency_constraints(n);
    q.program = lp_to_text(base);
    q.program.kind = "qp";
    q.program.header = {{"lambda", rat_to_string(lambda)},
                        {"k", std::to_string(n.k)},
                        {"ell", std::to_string(n.ell)},
                        {"model", q.model_hash}};

    int row_idx = static_cast<int>(q.program.constraints.size());
    auto add_row = [&](std::vector<std::pair<Rat, std::string>> terms, Relation rel, Rat rhs) {
        TextProgram::Constraint c;
        c.name = "c" + std::to_string(++row_idx);
        c.terms = std::move(terms);
        c.rel = rel;
        c.rhs = std::move(rhs);
        q.program.constraints.push_back(std::move(c));
    };

    // expectation variable: sum of terminal tau frequencies times their
    // rewards equals e
    std::vector<std::pair<Rat, std::string>> e_terms;
    for_each_frequency_var(n, [&](int node, int action) {
        if (!n.is_terminal(node)) return;
        Rat r = n.terminal_reward(node);
        if (r != 0) e_terms.emplace_back(r, n.x_name(node, action));
    });
    e_terms.emplace_back(Rat(-1), "e");
    add_row(std::move(e_terms), Relation::eq, Rat(0));

    // absolute-value surrogates: g_w for terminal goal levels below k,
    // h_{s,w} for the high-counter levels
    q.program.objective_linear = {{Rat(1), "e"}};
    for_each_frequency_var(n, [&](int node, int action) {
        if (!n.is_terminal(node)) return;
        const auto& [s, w] = n.node_info[node];
        std::string aux;
        if (s == n.original_goal && w < n.k) {
            aux = "g_" + std::to_string(w);
        } else {
            const std::string& nodename = n.mdp.state_names[node];
            aux = "h_" + nodename.substr(0, nodename.rfind('@')) + "_" + std::to_string(w);
        }
        Rat v = n.terminal_reward(node);
        add_row({{Rat(1), aux}, {Rat(1), "e"}}, Relation::ge, v);   // aux >= v - e
        add_row({{Rat(1), aux}, {Rat(-1), "e"}}, Relation::ge, -v); // aux >= e - v
        q.program.objective_bilinear.emplace_back(-q.lambda, freq_var_name(n, node, action), aux);
    });
    return q;
}

std::string export_qp(const QpModel& q) { return write_program(q.program); }

QpModel parse_qp(const std::string& text) {
    QpModel q;
    q.program = parse_program(text);
    for (const auto& [k, v] : q.program.header) {
        if (k == "lambda") {
            auto r = parse_rational(v);
            if (!r) throw std::invalid_argument("malformed lambda in header");
            q.lambda = *r;
        } else if (k == "k") {
            q.k = std::stol(v);
        } else if (k == "ell") {
            q.ell = std::stol(v);
        } else if (k == "model") {
            q.model_hash = v;
        }
    }
    return q;
}

Scheduler extract_scheduler(const UnfoldedN& n, const std::map<std::string, Rat>& frequencies) {
    auto freq = [&](int node, int action) {
        auto it = frequencies.find(freq_var_name(n, node, action));
        return it == frequencies.end() ? Rat(0) : it->second;
    };
    // exact flow-balance check: reject infeasible frequency vectors
    for (int node = 0; node < n.mdp.state_count(); ++node) {
        const auto& [s, w] = n.node_info[node];
        if (s < 0) continue;
        Rat out(0);
        for (const auto& c : n.mdp.choices[node]) out += freq(node, c.action);
        Rat in(0);
        for (int pred = 0; pred < n.mdp.state_count(); ++pred) {
            if (n.node_info[pred].first < 0) continue;
            for (const auto& c : n.mdp.choices[pred])
                for (const auto& t : c.successors)
                    if (t.target == node) in += freq(pred, c.action) * t.prob;
        }
        if (node == n.mdp.initial) in += 1;
        if (out != in)
            throw std::invalid_argument("frequencies violate flow balance at node '" + n.mdp.state_names[node] +
                                        "'");
    }

    RewardBasedRandomized rb;
    for (int node = 0; node < n.mdp.state_count(); ++node) {
        const auto& [s, w] = n.node_info[node];
        if (s < 0 || n.is_terminal(node)) continue;
        Rat total(0);
        for (const auto& c : n.mdp.choices[node]) total += freq(node, c.action);
        std::vector<ActionProb> dist;
        if (total > 0) {
            for (const auto& c : n.mdp.choices[node]) {
                Rat f = freq(node, c.action);
                if (f > 0) dist.push_back({c.action, Rat(f / total)});
            }
        } else {
            dist.push_back({n.emax_policy.at(s), Rat(1)});
        }
        rb.choice[{s, w}] = std::move(dist);
    }
    // above the bound the scheduler follows the expectation-optimal policy
    for (const auto& [s, a] : n.emax_policy) rb.choice[{s, n.k}] = {ActionProb{a, Rat(1)}};
    Scheduler sched;
    sched.rule = std::move(rb);
    return sched;
}

MadpeSolution solve_madpe_sweep(const NormalizedMdp& m, const Rat& lambda, const SweepConfig& cfg) {
    check_lambda(lambda);
    UnfoldedN n = build_unfolding_n(m);
    LpProblem base = build_frequency_constraints(n);

    // terminal variable list: (lp var, terminal reward)
    std::vector<std::pair<int, Rat>> terminals;
    {
        int idx = 0;
        for_each_frequency_var(n, [&](int node, int) {
            if (n.is_terminal(node)) terminals.emplace_back(idx, n.terminal_reward(node));
            ++idx;
        });
    }

    Rat emax = n.emax_initial;
    Rat delta = cfg.delta;
    if (delta <= 0) delta = emax > 0 ? Rat(emax / 64) : Rat(1);

    std::set<Rat> candidate_set;
    for (const auto& [v, r] : terminals) candidate_set.insert(r);  // kinks
    for (Rat g(0); g < emax; g += delta) candidate_set.insert(g);
    candidate_set.insert(emax);
    std::vector<Rat> candidates(candidate_set.begin(), candidate_set.end());

    struct Probe {
        bool feasible = false;
        Rat value;
        LpSolution sol;
    };
    auto evaluate = [&](const Rat& e_bar) {
        LpProblem lp = base;
        std::vector<std::pair<int, Rat>> pin;
        for (const auto& [var, r] : terminals) {
            lp.objective[var] = -lambda * rat_abs(r - e_bar);
            pin.emplace_back(var, r);
        }
        lp.add_row("pin", std::move(pin), Relation::eq, e_bar);
        Probe p;
        p.sol = solve_lp(lp);
        if (p.sol.status == LpStatus::optimal) {
            p.feasible = true;
            p.value = e_bar + p.sol.objective_value;
        }
        return p;
    };

    MadpeSolution out;
    std::vector<Probe> probes(candidates.size());
    parallel_for(static_cast<long>(candidates.size()), cfg.jobs,
                 [&](long i) { probes[i] = evaluate(candidates[i]); });

    long best = -1;
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!probes[i].feasible) {
            ++out.skipped_infeasible;
            continue;
        }
        out.sweep_log.emplace_back(candidates[i], probes[i].value);
        if (best < 0 || probes[i].value > probes[best].value) best = static_cast<long>(i);
    }
    if (best < 0) throw std::logic_error("no feasible expectation candidate; unfolding is inconsistent");

    Rat inc_e = candidates[best];
    Probe inc = probes[best];
    Rat step = delta;
    for (int round = 0; round < cfg.refinement_rounds; ++round) {
        step /= 2;
        for (const Rat& e_bar : {Rat(inc_e - step), Rat(inc_e + step)}) {
            if (e_bar < 0 || e_bar > emax) continue;
            Probe p = evaluate(e_bar);
            if (!p.feasible) {
                ++out.skipped_infeasible;
                continue;
            }
            out.sweep_log.emplace_back(e_bar, p.value);
            if (p.value > inc.value) {
                inc = p;
                inc_e = e_bar;
            }
        }
    }

    int idx = 0;
    for_each_frequency_var(n, [&](int node, int action) {
        out.frequencies[freq_var_name(n, node, action)] = inc.sol.values[idx];
        ++idx;
    });
    out.scheduler = extract_scheduler(n, out.frequencies);
    out.e_star = inc_e;
    out.gap_bound = (Rat(1) + 2 * lambda) * delta / 2;

    // the pinned LP value is the exact MADPE of the extracted scheduler:
    // terminal frequencies are the outcome probabilities and the pin row
    // fixes the expectation, so recompute and cross-check
    std::map<Rat, Rat> atom_map;
    for (const auto& [var, r] : terminals)
        if (inc.sol.values[var] != 0) atom_map[r] += inc.sol.values[var];
    RewardDistribution dist = RewardDistribution::from_map(atom_map);
    Rat recomputed = penalized(dist, PenaltySpec{PenaltyKind::madpe, lambda, std::nullopt});
    if (recomputed != inc.value)
        throw std::logic_error("sweep value does not match the scheduler's exact MADPE");
    out.value = recomputed;
    return out;
}

}  // namespace riskmdp
