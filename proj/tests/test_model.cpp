#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "riskmdp/measures.hpp"
#include "riskmdp/model.hpp"

using namespace riskmdp;
using namespace riskmdp::testing;

TEST_CASE("parse branch model") {
    Mdp m = branch_mdp();
    CHECK(m.state_count() == 5);
    CHECK(m.choices[m.state_index("s_init")].size() == 2);
    CHECK(m.initial == m.state_index("s_init"));
    CHECK(*m.goal == m.state_index("goal"));
    CHECK(m.choice_for(m.state_index("s_init"), m.action_index("alpha"))->successors[0].prob == rat(1, 4));
}

TEST_CASE("parse single goal state") {
    Mdp m = trap_only();
    CHECK(m.state_count() == 1);
    CHECK(m.is_trap(0));
}

TEST_CASE("probability sum violation") {
    std::string doc = R"(mdp
initial a
state a
  action alpha reward 0
    -> b 9/10
state b
)";
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("sum to 9/10"), ModelError);
    try {
        parse_model(doc);
    } catch (const ModelError& e) {
        CHECK(e.kind == ModelErrorKind::probability_sum);
    }
}

TEST_CASE("parse error categories") {
    CHECK_THROWS_AS(parse_model("mdp\ninitial a\nstate a\n  action x reward -1\n    -> a 1\n"), ModelError);
    try {
        parse_model("mdp\ninitial a\nstate a\n  action x reward -1\n    -> a 1\n");
    } catch (const ModelError& e) {
        CHECK(e.kind == ModelErrorKind::negative_reward);
    }
    try {
        parse_model("mdp\ninitial missing\nstate a\n");
    } catch (const ModelError& e) {
        CHECK(e.kind == ModelErrorKind::unknown_reference);
    }
    try {
        parse_model("mdp\ninitial a\nstate a\n  action x reward 0\n    -> a 1/2\n    -> a 1/2\n");
    } catch (const ModelError& e) {
        CHECK(e.kind == ModelErrorKind::duplicate_transition);
    }
    try {
        parse_model("bogus\n");
    } catch (const ModelError& e) {
        CHECK(e.kind == ModelErrorKind::syntax);
    }
}

TEST_CASE("decimal probabilities parse exactly") {
    Mdp m = parse_model(R"(mdp
initial a
state a
  action x reward 0
    -> b 0.25
    -> c 0.75
state b
state c
)");
    CHECK(m.choices[0][0].successors[0].prob == rat(1, 4));
}

TEST_CASE("serialize round trip") {
    for (const Mdp& m : {branch_mdp(), gamble_mdp(), loop_mdp("1/4")}) {
        std::string text = serialize_model(m);
        CHECK(serialize_model(parse_model(text)) == text);
    }
    std::mt19937_64 rng(7);
    for (int i = 0; i < 20; ++i) {
        Mdp m = random_acyclic_mdp(rng, 2 + static_cast<int>(rng() % 8), 3, 4);
        std::string text = serialize_model(m);
        CHECK(serialize_model(parse_model(text)) == text);
    }
}

TEST_CASE("validate") {
    CHECK(validate(branch_mdp()).ok());

    Mdp bad = branch_mdp();
    bad.choices[1][0].reward = rat(-1);
    auto rep = validate(bad);
    REQUIRE(rep.issues.size() == 1);
    CHECK(rep.issues[0].kind == ModelErrorKind::negative_reward);

    Mdp goal_not_trap = branch_mdp();
    goal_not_trap.choices[*goal_not_trap.goal].push_back(
        ActionChoice{0, Rat(0), {Transition{0, Rat(1)}}});
    rep = validate(goal_not_trap);
    REQUIRE(rep.issues.size() == 1);
    CHECK(rep.issues[0].message.find("not a trap") != std::string::npos);
}

TEST_CASE("induce chain") {
    Mdp m = branch_mdp();
    SUBCASE("deterministic choice") {
        Chain c = induce_chain(m, dirac_choice(m, "s_init", "beta"));
        int node = c.mdp.state_index("s_init.beta");
        REQUIRE(node >= 0);
        Rat to_s1(0), to_s2(0);
        for (const auto& t : c.successors(node)) {
            if (t.target == c.mdp.state_index("s1")) to_s1 = t.prob;
            if (t.target == c.mdp.state_index("s2")) to_s2 = t.prob;
        }
        CHECK(to_s1 == rat(3, 4));
        CHECK(to_s2 == rat(1, 4));
    }
    SUBCASE("mixture splits mass over both actions") {
        Chain c = induce_chain(m, mix_choice(m, "s_init", "alpha", rat(1, 2)));
        RewardDistribution d = exact_distribution(c);
        REQUIRE(d.atoms.size() == 3);
        CHECK(d.atoms[0] == std::pair<Rat, Rat>{Rat(0), rat(1, 8)});
        CHECK(d.atoms[1] == std::pair<Rat, Rat>{Rat(1), rat(3, 4)});
        CHECK(d.atoms[2] == std::pair<Rat, Rat>{Rat(2), rat(1, 8)});
    }
    SUBCASE("trap-only model with empty scheduler") {
        Chain c = induce_chain(trap_only(), MemorylessRandomized{});
        CHECK(c.state_count() == 1);
        CHECK(c.is_trap(0));
    }
    SUBCASE("missing state rejected") {
        MemorylessRandomized partial;
        CHECK_THROWS_AS(induce_chain(m, partial), ModelError);
    }
    SUBCASE("disabled action rejected") {
        MemorylessRandomized s = dirac_choice(m, "s_init", "beta");
        s.choice[m.state_index("s1")] = {ActionProb{m.action_index("alpha"), Rat(1)}};
        CHECK_THROWS_AS(induce_chain(m, s), ModelError);
    }
}

TEST_CASE("induced chains conserve probability") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        Mdp m = random_acyclic_mdp(rng, 3 + static_cast<int>(rng() % 8), 3, 3);
        MemorylessRandomized uniform;
        for (int s = 0; s < m.state_count(); ++s) {
            if (m.is_trap(s)) continue;
            std::vector<ActionProb> dist;
            Rat p(1, static_cast<long>(m.choices[s].size()));
            p.canonicalize();
            for (const auto& c : m.choices[s]) dist.push_back({c.action, p});
            uniform.choice[s] = std::move(dist);
        }
        Chain c = induce_chain(m, uniform);
        for (int s = 0; s < c.state_count(); ++s) {
            if (c.is_trap(s)) continue;
            Rat sum(0);
            for (const auto& t : c.successors(s)) sum += t.prob;
            CHECK(sum == 1);
        }
    }
}

TEST_CASE("scheduler file round trip and fallback") {
    Mdp m = branch_mdp();
    Scheduler s = parse_scheduler(m, "state s_init: alpha=1/3 beta=2/3\n");
    auto dist = s.distribution_at(m, m.state_index("s_init"), Rat(0));
    CHECK(dist[0].prob + dist[1].prob == 1);
    CHECK(serialize_scheduler(m, parse_scheduler(m, serialize_scheduler(m, s))) == serialize_scheduler(m, s));

    Scheduler rb = parse_scheduler(m, "state s_init reward 0: alpha=1\nstate s_init reward 2: beta=1\n");
    CHECK(rb.distribution_at(m, m.state_index("s_init"), Rat(1))[0].action == m.action_index("alpha"));
    CHECK(rb.distribution_at(m, m.state_index("s_init"), Rat(5))[0].action == m.action_index("beta"));

    CHECK_THROWS_AS(parse_scheduler(m, "state s_init: alpha=1/3\n"), ModelError);
    CHECK_THROWS_AS(parse_scheduler(m, "state s1: alpha=1\n"), ModelError);
}

TEST_CASE("distribution invariants") {
    std::map<Rat, Rat> atoms{{Rat(3), rat(1, 2)}, {Rat(1), rat(1, 2)}, {Rat(7), Rat(0)}};
    RewardDistribution d = RewardDistribution::from_map(atoms);
    REQUIRE(d.atoms.size() == 2);
    CHECK(d.atoms[0].first == 1);
    CHECK(d.atoms[1].first == 3);
    CHECK(d.total_mass() == 1);
    CHECK(distribution_to_json(d) == R"([["1","1/2"],["3","1/2"]])");
}

TEST_CASE("model hash is stable and input sensitive") {
    CHECK(model_hash(branch_mdp()) == model_hash(branch_mdp()));
    CHECK(model_hash(branch_mdp()) != model_hash(gamble_mdp()));
}
