#include <doctest.h>

#include <functional>

#include "fixtures.hpp"
#include "riskmdp/errors.hpp"
#include "riskmdp/madpe.hpp"
#include "riskmdp/oracle.hpp"

using namespace riskmdp;
using namespace riskmdp::testing;

namespace {

Mdp single_step() {
    return parse_model(R"(mdp
initial a
goal goal
state a
  action go reward 1
    -> goal 1
state goal
)");
}

/// Visit probabilities of the terminal nodes under a scheduler, by forward
/// DP over the acyclic unfolding.
std::map<std::string, Rat> terminal_frequencies(const UnfoldedN& n, const MemorylessRandomized& sched) {
    auto topo = n.mdp.topological_order();
    std::vector<Rat> visit(n.mdp.state_count(), Rat(0));
    visit[n.mdp.initial] = 1;
    std::map<std::string, Rat> out;
    for (int node : topo) {
        if (n.mdp.is_trap(node)) continue;
        auto it = sched.choice.find(node);
        if (it == sched.choice.end()) continue;
        for (const auto& ap : it->second) {
            const ActionChoice* c = n.mdp.choice_for(node, ap.action);
            for (const auto& t : c->successors) visit[t.target] += visit[node] * ap.prob * t.prob;
        }
        if (n.is_terminal(node)) out[n.x_name(node, n.mdp.choices[node][0].action)] = visit[node];
    }
    return out;
}

}  // namespace

TEST_CASE("unfolding shape") {
    SUBCASE("branch model") {
        NormalizedMdp m = ensure_normalized(branch_mdp());
        UnfoldedN n = build_unfolding_n(m);
        CHECK(n.k == 2);
        CHECK(n.ell == 2);
        CHECK(n.mdp.state_count() == 5 * 4 + 1);
        int goal0 = n.node_of.at({*m.mdp.goal, 0});
        CHECK(n.terminal_reward(goal0) == 0);
        CHECK(n.terminal_reward(n.node_of.at({*m.mdp.goal, 1})) == 1);
        int s1 = m.mdp.state_index("s1");
        CHECK(n.terminal_reward(n.node_of.at({s1, 2})) == 3);       // 2 + E^max(s1)
        CHECK(n.terminal_reward(n.node_of.at({s1, 3})) == 4);
        int si = m.mdp.state_index("s_init");
        CHECK(n.terminal_reward(n.node_of.at({si, 2})) == rat(13, 4));
        // rewards sit only on the tau steps
        for (int node = 0; node < n.mdp.state_count(); ++node)
            for (const auto& c : n.mdp.choices[node])
                if (!n.is_terminal(node)) CHECK(c.reward == 0);
    }
    SUBCASE("smallest k") {
        NormalizedMdp m = ensure_normalized(single_step());
        UnfoldedN n = build_unfolding_n(m);
        CHECK(n.k == 1);
        CHECK(n.ell == 1);
        CHECK(n.mdp.state_count() == 2 * 2 + 1);
    }
    SUBCASE("gamble model counter range") {
        NormalizedMdp m = ensure_normalized(gamble_mdp());
        UnfoldedN n = build_unfolding_n(m);
        CHECK(n.k == 50);
        CHECK(n.ell == 100);
        CHECK(n.mdp.state_count() == m.mdp.state_count() * 150 + 1);
    }
}

TEST_CASE("frequency constraints") {
    NormalizedMdp m = ensure_normalized(branch_mdp());
    UnfoldedN n = build_unfolding_n(m);
    LpProblem lp = build_frequency_constraints(n);

    SUBCASE("initial row carries the unit source") {
        bool found = false;
        for (const auto& row : lp.rows) {
            if (row.rhs == 1) {
                found = true;
                // the (s_init, 0) row: exactly the two decision frequencies
                CHECK(row.terms.size() == 2);
                for (const auto& [v, c] : row.terms) CHECK(c == 1);
            } else {
                CHECK(row.rhs == 0);
            }
        }
        CHECK(found);
    }
    SUBCASE("unreachable pair is forced to zero") {
        int s0 = m.mdp.state_index("s0");
        int node = n.node_of.at({s0, 1});
        int idx = 0, target = -1;
        for (int nd = 0; nd < n.mdp.state_count(); ++nd) {
            if (n.node_info[nd].first < 0) continue;
            for (const auto& c : n.mdp.choices[nd]) {
                if (nd == node) target = idx;
                ++idx;
            }
        }
        REQUIRE(target >= 0);
        lp.objective[target] = 1;
        LpSolution s = solve_lp(lp);
        REQUIRE(s.status == LpStatus::optimal);
        CHECK(s.objective_value == 0);
    }
    SUBCASE("total terminal frequency is one at any feasible point") {
        for (int sense : {1, -1}) {
            LpProblem lp2 = build_frequency_constraints(n);
            int idx = 0;
            for (int nd = 0; nd < n.mdp.state_count(); ++nd) {
                if (n.node_info[nd].first < 0) continue;
                for (const auto& c : n.mdp.choices[nd]) {
                    if (n.is_terminal(nd)) lp2.objective[idx] = Rat(sense);
                    ++idx;
                }
            }
            LpSolution s = solve_lp(lp2);
            REQUIRE(s.status == LpStatus::optimal);
            CHECK(s.objective_value == sense);
        }
    }
}

TEST_CASE("quadratic program construction and export") {
    NormalizedMdp m = ensure_normalized(branch_mdp());
    UnfoldedN n = build_unfolding_n(m);
    QpModel q = build_qp(n, rat(2, 5));
    std::string text = export_qp(q);

    CHECK(text.find("\\ riskmdp qp v1  lambda=2/5 k=2 ell=2 model=" + n.source_hash) == 0);
    CHECK(text.find("- 2/5 x_goal_0_tau * g_0") != std::string::npos);
    CHECK(text.find("x_s1_1_tau") != std::string::npos);
    CHECK(text.find("g_1") != std::string::npos);
    CHECK(text.find("h_s1_2") != std::string::npos);
    CHECK(text.find("h_s1_3") != std::string::npos);
    CHECK(text.find("bounds: all >= 0\nend\n") != std::string::npos);
    CHECK(text.find("c1: x_s_init_0_alpha + x_s_init_0_beta - 1 = 0") != std::string::npos);

    SUBCASE("round trip") {
        QpModel back = parse_qp(text);
        CHECK(back.program == q.program);
        CHECK(back.lambda == q.lambda);
        CHECK(back.k == q.k);
        CHECK(back.ell == q.ell);
        CHECK(back.model_hash == q.model_hash);
        CHECK(export_qp(back) == text);
    }
    SUBCASE("lambda range") {
        CHECK_NOTHROW(build_qp(n, rat(1, 2)));
        CHECK_THROWS_AS(build_qp(n, rat(3, 5)), SolverRefusal);
        CHECK_THROWS_AS(build_qp(n, Rat(0)), SolverRefusal);
    }
    SUBCASE("variable structure") {
        // one bilinear product per terminal pair: goal at 4 levels plus the
        // four other states at the two high levels
        CHECK(q.program.objective_bilinear.size() == 4 + 4 * 2);
        int g_count = 0, h_count = 0;
        for (const auto& [coeff, xv, aux] : q.program.objective_bilinear) {
            CHECK(coeff == rat(-2, 5));
            if (aux.rfind("g_", 0) == 0) ++g_count;
            if (aux.rfind("h_", 0) == 0) ++h_count;
        }
        CHECK(g_count == 2);   // goal levels below k
        CHECK(h_count == 10);  // five states at levels {2, 3}
    }
}

TEST_CASE("sweep handles the degenerate single-state model") {
    NormalizedMdp m = ensure_normalized(trap_only());
    MadpeSolution sol = solve_madpe_sweep(m, rat(1, 2));
    CHECK(sol.value == 0);
    CHECK(sol.e_star == 0);
    CHECK(penalized(distribution_of(m, sol.scheduler),
                    PenaltySpec{PenaltyKind::madpe, rat(1, 2), std::nullopt}) == 0);
}

TEST_CASE("expectation sweep solver") {
    SUBCASE("branch model at lambda 2/5") {
        NormalizedMdp m = ensure_normalized(branch_mdp());
        MadpeSolution sol = solve_madpe_sweep(m, rat(2, 5));
        CHECK(sol.value == rat(11, 10));
        CHECK(sol.e_star == rat(5, 4));
        // reconstruction: the reported value is the exact penalized
        // expectation of the returned scheduler
        RewardDistribution d = distribution_of(m, sol.scheduler);
        CHECK(penalized(d, PenaltySpec{PenaltyKind::madpe, rat(2, 5), std::nullopt}) == sol.value);
        CHECK(sol.gap_bound > 0);
        CHECK_FALSE(sol.sweep_log.empty());
    }
    SUBCASE("single-path model is deterministic") {
        NormalizedMdp m = ensure_normalized(single_step());
        MadpeSolution sol = solve_madpe_sweep(m, rat(1, 2));
        CHECK(sol.value == 1);
        RewardDistribution d = distribution_of(m, sol.scheduler);
        CHECK(deviation_report(d).mad == 0);
    }
    SUBCASE("lambda above a half is refused") {
        NormalizedMdp m = ensure_normalized(branch_mdp());
        CHECK_THROWS_AS(solve_madpe_sweep(m, rat(3, 5)), SolverRefusal);
    }
    SUBCASE("parallel sweep matches the sequential one") {
        NormalizedMdp m = ensure_normalized(branch_mdp());
        SweepConfig cfg;
        cfg.jobs = 4;
        MadpeSolution par = solve_madpe_sweep(m, rat(2, 5), cfg);
        CHECK(par.value == rat(11, 10));
        CHECK(par.e_star == rat(5, 4));
    }
}

TEST_CASE("scheduler extraction") {
    NormalizedMdp m = ensure_normalized(branch_mdp());
    UnfoldedN n = build_unfolding_n(m);
    int si = m.mdp.state_index("s_init");
    int s0 = m.mdp.state_index("s0"), s1 = m.mdp.state_index("s1"), s2 = m.mdp.state_index("s2");
    int goal = *m.mdp.goal;

    auto freqs_for = [&](const Rat& p_alpha) {
        std::map<std::string, Rat> f;
        f[n.x_name(n.node_of.at({si, 0}), m.mdp.action_index("alpha"))] = p_alpha;
        f[n.x_name(n.node_of.at({si, 0}), m.mdp.action_index("beta"))] = 1 - p_alpha;
        Rat to_s0 = p_alpha * rat(1, 4), to_s2 = (1 - p_alpha) * rat(1, 4);
        int tau = m.mdp.action_index("tau");
        f[n.x_name(n.node_of.at({s0, 0}), tau)] = to_s0;
        f[n.x_name(n.node_of.at({s1, 0}), tau)] = rat(3, 4);
        f[n.x_name(n.node_of.at({s2, 0}), tau)] = to_s2;
        f[n.x_name(n.node_of.at({goal, 0}), n.tau_action)] = to_s0;
        f[n.x_name(n.node_of.at({goal, 1}), n.tau_action)] = rat(3, 4);
        f[n.x_name(n.node_of.at({goal, 2}), n.tau_action)] = to_s2;
        return f;
    };

    SUBCASE("dirac frequencies") {
        Scheduler s = extract_scheduler(n, freqs_for(Rat(0)));
        auto dist = s.distribution_at(m.mdp, si, Rat(0));
        REQUIRE(dist.size() == 1);
        CHECK(dist[0].action == m.mdp.action_index("beta"));
        CHECK(dist[0].prob == 1);
    }
    SUBCASE("proportional split") {
        Scheduler s = extract_scheduler(n, freqs_for(rat(1, 2)));
        auto dist = s.distribution_at(m.mdp, si, Rat(0));
        REQUIRE(dist.size() == 2);
        CHECK(dist[0].prob == rat(1, 2));
        CHECK(dist[1].prob == rat(1, 2));
    }
    SUBCASE("frequency round trip") {
        auto freqs = freqs_for(rat(1, 2));
        Scheduler s = extract_scheduler(n, freqs);
        auto back = terminal_frequencies(n, scheduler_on_unfolding(n, s));
        for (const auto& [name, value] : back) {
            auto it = freqs.find(name);
            Rat expected = it == freqs.end() ? Rat(0) : it->second;
            CHECK(value == expected);
        }
    }
    SUBCASE("infeasible frequencies rejected") {
        auto bad = freqs_for(rat(1, 2));
        bad[n.x_name(n.node_of.at({s1, 0}), m.mdp.action_index("tau"))] = rat(1, 2);
        CHECK_THROWS_AS(extract_scheduler(n, bad), std::invalid_argument);
    }
}

TEST_CASE("raising a scheduler to the greedy tail never hurts") {
    std::mt19937_64 rng(41);
    Mdp m = branch_mdp();
    NormalizedMdp norm = ensure_normalized(m);
    ValueTable tmax = optimal_expected_reward(m, Direction::max);
    long k = rat_ceil_long(tmax.values[m.initial]);
    PenaltySpec obj{PenaltyKind::madpe, rat(1, 4), std::nullopt};
    for (int rep = 0; rep < 25; ++rep) {
        Scheduler s = random_reward_based(rng, m);
        Scheduler lifted = lift_to_ermax(m, s, k, tmax.policy);
        Rat base = penalized(distribution_of(m, s), obj);
        Rat up = penalized(distribution_of(m, lifted), obj);
        CHECK(up >= base);
    }
}

TEST_CASE("objective agrees between the model and its unfolding") {
    std::mt19937_64 rng(43);
    for (Mdp m : {branch_mdp(), gamble_mdp()}) {
        NormalizedMdp norm = ensure_normalized(m);
        UnfoldedN n = build_unfolding_n(norm);
        ValueTable tmax = optimal_expected_reward(m, Direction::max);
        PenaltySpec obj{PenaltyKind::madpe, rat(2, 5), std::nullopt};
        for (int rep = 0; rep < 10; ++rep) {
            Scheduler s = lift_to_ermax(m, random_reward_based(rng, m), n.k, tmax.policy);
            Rat in_model = penalized(distribution_of(m, s), obj);
            RewardDistribution lifted =
                distribution_of(n.mdp, wrap(scheduler_on_unfolding(n, s)));
            Rat in_unfolding = penalized(lifted, obj);
            CHECK(in_model == in_unfolding);
        }
    }
}

TEST_CASE("the choice among expectation-optimal tail policies is immaterial") {
    // two actions with identical payoff tie at the optimum; lifting a
    // scheduler with either tie-break yields the same objective value
    Mdp m = gamble_mdp();
    int gamma = m.intern_action("gamma");
    ActionChoice twin = *m.choice_for(m.initial, m.action_index("alpha"));
    twin.action = gamma;
    m.choices[m.initial].push_back(twin);

    ValueTable vt = optimal_expected_reward(m, Direction::max);
    REQUIRE(vt.policy.at(m.initial) == m.action_index("alpha"));  // lexicographic pick
    std::map<int, int> alt = vt.policy;
    alt[m.initial] = gamma;  // attains the same exact optimum
    REQUIRE(evaluate_policy(m, alt) == vt.values);

    long k = rat_ceil_long(vt.values[m.initial]);
    PenaltySpec obj{PenaltyKind::madpe, rat(1, 2), std::nullopt};
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        Scheduler s = random_reward_based(rng, m);
        Rat a = penalized(distribution_of(m, lift_to_ermax(m, s, k, vt.policy)), obj);
        Rat b = penalized(distribution_of(m, lift_to_ermax(m, s, k, alt)), obj);
        CHECK(a == b);
    }
}

TEST_CASE("sweep dominates the oracle grid") {
    NormalizedMdp m = ensure_normalized(branch_mdp());
    MadpeSolution sol = solve_madpe_sweep(m, rat(2, 5));
    GridSpec spec;
    spec.resolution = 50;
    spec.objective = PenaltySpec{PenaltyKind::madpe, rat(2, 5), std::nullopt};
    GridResult grid = grid_search(m.mdp, spec);
    CHECK(sol.value >= grid.best_value);
    CHECK(sol.value <= grid.best_value + sol.gap_bound);
    CHECK(sol.value <= optimal_expected_reward(m.mdp, Direction::max).values[m.mdp.initial]);
}
