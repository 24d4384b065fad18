#include <doctest.h>

#include <algorithm>
#include <random>

#include "rumdp/options.hpp"
#include "rumdp/random_instances.hpp"
#include "rumdp/solve.hpp"
#include "rumdp/verify.hpp"
#include "test_support.hpp"

using namespace rumdp;
using rumdp::testing::three_state_chain;
using rumdp::testing::two_action_chain;

namespace {

OptionPolicy option_from_policy(const Umdp& umdp, const StationaryPolicy& policy, StateId anchor,
                                int horizon) {
    const ReachableSets sets = reachable_sets(umdp, anchor, horizon);
    const std::vector<char> goal = umdp.goal_mask();
    OptionPolicy option;
    option.anchor = anchor;
    option.horizon = horizon;
    for (int t = 0; t < horizon; ++t)
        for (StateId s : sets.unions[t])
            if (!goal[s])
                option.table[OptionPolicy::key(t, s, umdp.num_states)] = policy.action_at(s);
    return option;
}

}  // namespace

TEST_CASE("reachable sets start at the anchor and follow supports") {
    const Umdp chain = three_state_chain();
    const ReachableSets sets = reachable_sets(chain, 0, 2);
    REQUIRE(sets.per_sample.size() == 1);
    CHECK(sets.per_sample[0][0] == std::vector<StateId>{0});
    CHECK(sets.per_sample[0][1] == std::vector<StateId>{1});
    CHECK(sets.unions[1] == std::vector<StateId>{1});
}

TEST_CASE("reachable sets differ across samples exactly where transitions differ") {
    Umdp umdp = two_action_chain();
    umdp.num_states = 3;
    umdp.samples.clear();
    MdpSample a(3, 2), b(3, 2);
    a.set_row(0, 0, {{1, 1.0, 1.0}});
    a.set_row(0, 1, {{2, 1.0, 1.0}});
    a.set_row(1, 0, {{2, 1.0, 1.0}});
    a.set_row(1, 1, {{2, 1.0, 1.0}});
    a.set_row(2, 0, {{2, 1.0, 0.0}});
    a.set_row(2, 1, {{2, 1.0, 0.0}});
    b = a;
    b.set_row(0, 0, {{0, 0.5, 1.0}, {1, 0.5, 1.0}});  // staying becomes possible
    umdp.goals = {2};
    umdp.samples = {a, b};
    const ReachableSets sets = reachable_sets(umdp, 0, 2);
    CHECK(sets.per_sample[0][1] == std::vector<StateId>{1, 2});
    CHECK(sets.per_sample[1][1] == std::vector<StateId>{0, 1, 2});
    CHECK(sets.unions[1] == std::vector<StateId>{0, 1, 2});
}

TEST_CASE("goal states only expand to themselves") {
    const Umdp chain = three_state_chain();
    const ReachableSets sets = reachable_sets(chain, 1, 3);
    CHECK(sets.per_sample[0][1] == std::vector<StateId>{2});
    CHECK(sets.per_sample[0][2] == std::vector<StateId>{2});
}

TEST_CASE("one-step backup collapses to the action's gap terms") {
    const Umdp chain = two_action_chain();
    const ValueTable vstar = optimal_values(chain, chain.samples[0]).values;
    ValueTable reg(chain.num_states, 0.0);
    reg[0] = 0.7;  // arbitrary estimate, goal stays zero

    OptionPolicy option;
    option.anchor = 0;
    option.horizon = 1;
    option.table[OptionPolicy::key(0, 0, chain.num_states)] = 1;
    const OptionBackup backup = backward_induction(chain, 0, option, reg, vstar);
    CHECK(backup.expected_cost == doctest::Approx(2.0));   // one-step cost of a1
    CHECK(backup.continuation == doctest::Approx(0.0));    // goal: zero regret and value
}

TEST_CASE("two-step chain backup sums the step costs") {
    const Umdp chain = three_state_chain();
    const ValueTable vstar = optimal_values(chain, chain.samples[0]).values;
    const ValueTable reg(chain.num_states, 0.0);
    const OptionPolicy option =
        option_from_policy(chain, StationaryPolicy::deterministic({0, 0, 0}), 0, 2);
    const OptionBackup backup = backward_induction(chain, 0, option, reg, vstar);
    CHECK(backup.expected_cost == doctest::Approx(2.0));
    CHECK(backup.continuation == doctest::Approx(0.0));
}

TEST_CASE("following the sample's optimal policy contributes zero regret") {
    // the option backup telescopes action gaps, so an optimal option is free
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {7, 3, 3, 1});
        const OptimalSolution sol = optimal_values(umdp, umdp.samples[0]);
        const ValueTable zeros(umdp.num_states, 0.0);
        for (const int n : {1, 2, 3}) {
            const OptionPolicy option = option_from_policy(umdp, sol.policy, umdp.initial, n);
            const OptionBackup backup =
                backward_induction(umdp, 0, option, zeros, sol.values);
            const double objective =
                backup.expected_cost + backup.continuation - sol.values[umdp.initial];
            // the telescoped gaps inherit the value iteration residual
            CHECK(std::abs(objective) <= 1e-7);
        }
    }
}

TEST_CASE("option backups match the regret recursion for random options") {
    // with converged regret estimates of a fixed policy, the n-step backup of
    // that policy's option must reproduce the regret at the anchor
    for (std::uint64_t seed = 10; seed < 18; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {7, 2, 2, 1});
        const StationaryPolicy policy = random_deterministic_policy(seed + 5, umdp);
        const MdpSample& sample = umdp.samples[0];
        const ValueTable vstar = optimal_values(umdp, sample).values;
        const ValueTable reg = regret_bellman_eval(umdp, sample, policy, vstar);
        for (const int n : {1, 2, 3}) {
            const OptionPolicy option = option_from_policy(umdp, policy, umdp.initial, n);
            const OptionBackup backup = backward_induction(umdp, 0, option, reg, vstar);
            const double recomposed =
                backup.expected_cost + backup.continuation - vstar[umdp.initial];
            CHECK(recomposed == doctest::Approx(reg[umdp.initial]).epsilon(1e-7));
        }
    }
}

TEST_CASE("backward induction requires the option to cover reachable states") {
    const Umdp chain = three_state_chain();
    const ValueTable zeros(chain.num_states, 0.0);
    OptionPolicy option;
    option.anchor = 0;
    option.horizon = 2;
    option.table[OptionPolicy::key(0, 0, chain.num_states)] = 0;  // step 1 missing
    CHECK_THROWS_AS(backward_induction(chain, 0, option, zeros, zeros), CoverageError);
}

TEST_CASE("option transitions are the exact n-step distribution") {
    const Umdp chain = three_state_chain();
    const ValueTable vstar = optimal_values(chain, chain.samples[0]).values;
    const OptionPolicy option =
        option_from_policy(chain, StationaryPolicy::deterministic({0, 0, 0}), 0, 2);
    const OptionModel model = option_cost_and_transition(chain, 0, option, vstar);
    REQUIRE(model.transition.size() == 1);
    CHECK(model.transition[0].first == 2);
    CHECK(model.transition[0].second == doctest::Approx(1.0));
    CHECK(model.cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("one-step option model reduces to the action row and gap") {
    const Umdp chain = two_action_chain();
    const ValueTable vstar = optimal_values(chain, chain.samples[0]).values;
    OptionPolicy option;
    option.anchor = 0;
    option.horizon = 1;
    option.table[OptionPolicy::key(0, 0, chain.num_states)] = 1;
    const OptionModel model = option_cost_and_transition(chain, 0, option, vstar);
    CHECK(model.cost == doctest::Approx(q_gap(chain.samples[0], vstar, 0, 1)));
    REQUIRE(model.transition.size() == 1);
    CHECK(model.transition[0].first == 1);
}

TEST_CASE("option transition rows always sum to one") {
    for (std::uint64_t seed = 30; seed < 36; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {8, 3, 3, 2});
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);
        const StationaryPolicy policy = random_deterministic_policy(seed, umdp);
        for (const int n : {1, 2, 3}) {
            const OptionPolicy option = option_from_policy(umdp, policy, umdp.initial, n);
            for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
                const OptionModel model = option_cost_and_transition(umdp, q, option, vstar[q]);
                double mass = 0.0;
                for (const auto& [next, p] : model.transition) mass += p;
                CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("two-sample one-step matrix game picks the saddle action") {
    // contributions per (action, sample): a0 -> (1, 3), a1 -> (2, 2); the
    // worst case of a1 is smaller so it wins with objective 2 + kappa
    Umdp umdp;
    umdp.num_states = 4;  // s0, two waypoints, goal
    umdp.num_actions = 2;
    umdp.initial = 0;
    umdp.goals = {3};
    MdpSample s1(4, 2), s2(4, 2);
    for (MdpSample* s : {&s1, &s2}) {
        s->set_row(1, 0, {{3, 1.0, 0.0}});
        s->set_row(1, 1, {{3, 1.0, 0.0}});
        s->set_row(2, 0, {{3, 1.0, 0.0}});
        s->set_row(2, 1, {{3, 1.0, 0.0}});
        s->set_row(3, 0, {{3, 1.0, 0.0}});
        s->set_row(3, 1, {{3, 1.0, 0.0}});
    }
    s1.set_row(0, 0, {{1, 1.0, 1.0}});  // gap 0
    s1.set_row(0, 1, {{2, 1.0, 1.0}});  // gap 0
    s2.set_row(0, 0, {{1, 1.0, 3.0}});  // gap 2
    s2.set_row(0, 1, {{2, 1.0, 1.0}});  // gap 0
    umdp.samples = {s1, s2};

    ValueTable estimates(umdp.num_states, 0.0);
    estimates[1] = 1.0;  // continuation regret at the waypoints
    estimates[2] = 2.0;
    const std::vector<ValueTable> vstar = optimal_values_all(umdp);
    const double kappa = 1e-4;
    const InnerSolution sol =
        optimize_option_deterministic(umdp, 0, 1, estimates, vstar, kappa);
    CHECK(sol.policy.action(0, 0, umdp.num_states) == 1);
    CHECK(sol.objective == doctest::Approx(2.0 + kappa));
}

TEST_CASE("single-sample inner solves recover the optimal policy at cost kappa") {
    for (std::uint64_t seed = 40; seed < 46; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {7, 3, 2, 1});
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);
        const ValueTable zeros(umdp.num_states, 0.0);
        const double kappa = 1e-4;
        for (const int n : {1, 2}) {
            const InnerSolution sol =
                optimize_option_deterministic(umdp, umdp.initial, n, zeros, vstar, kappa);
            CHECK(std::abs(sol.objective - kappa) <= 1e-7);
        }
    }
}

TEST_CASE("search equals exhaustive enumeration on random inner problems") {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (std::uint64_t seed = 50; checked < 12 && seed < 200; ++seed) {
        RandomSspParams params;
        params.num_states = 5 + static_cast<int>(rng() % 3);
        params.num_actions = 2 + static_cast<int>(rng() % 2);
        params.branching = 2;
        params.num_samples = 2 + static_cast<int>(rng() % 2);
        const Umdp umdp = random_ssp_umdp(seed, params);
        if (count_option_policies(umdp, umdp.initial, 2, 1000) > 1000) continue;
        ++checked;

        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        ValueTable estimates(umdp.num_states, 0.0);
        for (StateId s = 0; s + 1 < umdp.num_states; ++s) estimates[s] = uniform(rng);
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);

        const InnerSolution search =
            optimize_option_deterministic(umdp, umdp.initial, 2, estimates, vstar, 1e-4);
        const EnumerationResult oracle = enumerate_option_policies(
            umdp, umdp.initial, 2, estimates, vstar, BackupKind::regret, 1e-4, 1000);
        CHECK(search.objective == oracle.objective);  // same leaf evaluation, exact match
        CHECK(search.nodes_expanded <= oracle.candidates * 8);
    }
    CHECK(checked == 12);
}

TEST_CASE("ties resolve to the lexicographically smallest table") {
    // two identical actions: the search must report the lower index
    Umdp umdp = two_action_chain();
    umdp.samples[0].set_row(0, 1, {{1, 1.0, 1.0}});  // same as action 0 now
    const std::vector<ValueTable> vstar = optimal_values_all(umdp);
    const ValueTable zeros(umdp.num_states, 0.0);
    const InnerSolution sol = optimize_option_deterministic(umdp, 0, 1, zeros, vstar, 1e-4);
    CHECK(sol.policy.action(0, 0, umdp.num_states) == 0);
}

TEST_CASE("node budget overruns carry the incumbent") {
    const Umdp umdp = random_ssp_umdp(60, {8, 3, 3, 3});
    const std::vector<ValueTable> vstar = optimal_values_all(umdp);
    const ValueTable zeros(umdp.num_states, 0.0);
    try {
        optimize_option_deterministic(umdp, umdp.initial, 3, zeros, vstar, 1e-4, 2);
        FAIL("expected SearchBudgetError");
    } catch (const SearchBudgetError& err) {
        CHECK(err.incumbent >= 0.0);
        CHECK(err.incumbent < 1e30);
    }
}

TEST_CASE("goal anchors produce an empty option at zero objective") {
    const Umdp chain = two_action_chain();
    const std::vector<ValueTable> vstar = optimal_values_all(chain);
    const ValueTable zeros(chain.num_states, 0.0);
    const InnerSolution sol = optimize_option_deterministic(chain, 1, 1, zeros, vstar, 1e-4);
    CHECK(sol.policy.table.empty());
    CHECK(sol.objective == 0.0);
}

TEST_CASE("search lower bounds never exceed completion objectives") {
    // decoupled per-sample completions bound every shared completion from below
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 70; seed < 76; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {6, 2, 2, 3});
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);
        ValueTable estimates(umdp.num_states, 0.0);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        for (StateId s = 0; s + 1 < umdp.num_states; ++s) estimates[s] = uniform(rng);

        // root bound = max over samples of the per-sample optimum; every full
        // assignment evaluates at least as high
        OptionOptimizer optimizer(umdp, 2, vstar, BackupKind::regret, 0.0, 1 << 20);
        const InnerSolution best = optimizer.solve(umdp.initial, estimates);
        for (int i = 0; i < 20; ++i) {
            const StationaryPolicy policy = random_deterministic_policy(rng(), umdp);
            OptionPolicy option;
            option.anchor = umdp.initial;
            option.horizon = 2;
            const std::vector<char> goal = umdp.goal_mask();
            const ReachableSets& sets = optimizer.sets(umdp.initial);
            for (int t = 0; t < 2; ++t)
                for (StateId s : sets.unions[t])
                    if (!goal[s])
                        option.table[OptionPolicy::key(t, s, umdp.num_states)] =
                            policy.action_at(s);
            CHECK(optimizer.evaluate(umdp.initial, option, estimates) >=
                  best.objective - 1e-12);
        }
    }
}
