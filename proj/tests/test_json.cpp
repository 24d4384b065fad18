#include <doctest.h>

#include "rumdp/json_io.hpp"
#include "rumdp/planners.hpp"
#include "rumdp/random_instances.hpp"
#include "test_support.hpp"

using namespace rumdp;

TEST_CASE("umdp json round trip preserves the model") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {6, 2, 3, 3});
        const Umdp loaded = umdp_from_json_string(umdp_to_json_string(umdp));
        CHECK(loaded.num_states == umdp.num_states);
        CHECK(loaded.num_actions == umdp.num_actions);
        CHECK(loaded.initial == umdp.initial);
        CHECK(loaded.goals == umdp.goals);
        REQUIRE(loaded.samples.size() == umdp.samples.size());
        for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
            for (StateId s = 0; s < umdp.num_states; ++s) {
                for (ActionId a = 0; a < umdp.num_actions; ++a) {
                    const TransitionRow& expected = umdp.samples[q].row(s, a);
                    const TransitionRow& actual = loaded.samples[q].row(s, a);
                    REQUIRE(actual.size() == expected.size());
                    for (std::size_t i = 0; i < expected.size(); ++i) {
                        CHECK(actual[i].next == expected[i].next);
                        CHECK(actual[i].prob == expected[i].prob);  // bit-exact numbers
                        CHECK(actual[i].cost == expected[i].cost);
                    }
                }
            }
        }
        // serialization is stable
        CHECK(umdp_to_json_string(loaded) == umdp_to_json_string(umdp));
    }
}

TEST_CASE("probabilities load from decimal strings") {
    const std::string text = R"({
        "states": 2, "actions": 1, "initial": 0, "goals": [1],
        "samples": [{"transitions": [[0,0,1,"1.0","2.5"],[1,0,1,1.0,0.0]]}]
    })";
    const Umdp umdp = umdp_from_json_string(text);
    CHECK(umdp.samples[0].row(0, 0).front().prob == 1.0);
    CHECK(umdp.samples[0].row(0, 0).front().cost == 2.5);
}

TEST_CASE("loading an invalid model names the violation") {
    const std::string text = R"({
        "states": 2, "actions": 1, "initial": 0, "goals": [1],
        "samples": [{"transitions": [[0,0,1,0.9,1.0],[1,0,1,1.0,0.0]]}]
    })";
    CHECK_THROWS_WITH_AS(umdp_from_json_string(text),
                         doctest::Contains("distribution mass"), ModelError);
}

TEST_CASE("stationary policies round trip") {
    StationaryPolicy policy(3);
    policy.set_row(0, {{0, 0.25}, {1, 0.75}});
    policy.set_action(1, 1);
    policy.set_action(2, 0);
    const LoadedPolicy loaded = policy_from_json_string(policy_to_json_string(policy));
    REQUIRE(loaded.kind == LoadedPolicy::Kind::stationary);
    CHECK(loaded.policy.row(0) == policy.row(0));
    CHECK(loaded.policy.action_at(1) == 1);
}

TEST_CASE("option plans round trip through json") {
    const Umdp umdp = random_ssp_umdp(3, {5, 2, 2, 2});
    const OptionPlan plan = minimax_regret_vi(umdp, 2);
    const LoadedPolicy loaded =
        policy_from_json_string(plan_to_json_string(plan, umdp.num_states));
    REQUIRE(loaded.kind == LoadedPolicy::Kind::option_plan);
    CHECK(loaded.plan.horizon == plan.horizon);
    REQUIRE(loaded.plan.reg.size() == plan.reg.size());
    for (std::size_t s = 0; s < plan.reg.size(); ++s) CHECK(loaded.plan.reg[s] == plan.reg[s]);
    for (StateId s = 0; s < umdp.num_states; ++s)
        CHECK(loaded.plan.options[s].table == plan.options[s].table);
}
