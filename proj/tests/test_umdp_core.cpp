#include <doctest.h>

#include <Eigen/Dense>

#include <random>

#include "rumdp/random_instances.hpp"
#include "rumdp/solve.hpp"
#include "test_support.hpp"

using namespace rumdp;
using rumdp::testing::three_state_chain;
using rumdp::testing::two_action_chain;

namespace {

// independent policy-evaluation oracle: dense solve of (I - P) v = c
ValueTable linear_solve_evaluation(const Umdp& umdp, const MdpSample& sample,
                                   const StationaryPolicy& policy) {
    const std::vector<char> goal = umdp.goal_mask();
    std::vector<StateId> free_states;
    std::vector<int> dense(umdp.num_states, -1);
    for (StateId s = 0; s < umdp.num_states; ++s)
        if (!goal[s]) {
            dense[s] = static_cast<int>(free_states.size());
            free_states.push_back(s);
        }
    const int n = static_cast<int>(free_states.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd costs = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const StateId s = free_states[i];
        for (const auto& [a, p] : policy.row(s)) {
            if (p <= 0.0) continue;
            costs(i) += p * sample.expected_cost(s, a);
            for (const TransitionEntry& e : sample.row(s, a))
                if (dense[e.next] >= 0) system(i, dense[e.next]) -= p * e.prob;
        }
    }
    const Eigen::VectorXd v = system.partialPivLu().solve(costs);
    ValueTable result(umdp.num_states, 0.0);
    for (int i = 0; i < n; ++i) result[free_states[i]] = v(i);
    return result;
}

}  // namespace

TEST_CASE("validation accepts a minimal chain and reports broken rows") {
    Umdp umdp = two_action_chain();
    CHECK(validate_umdp(umdp).empty());

    MdpSample& sample = umdp.samples[0];
    sample.set_row(0, 0, {{1, 0.9, 1.0}});
    const auto issues = validate_umdp(umdp);
    REQUIRE(!issues.empty());
    bool found = false;
    for (const auto& issue : issues) found |= issue.find("distribution mass") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validation flags samples whose goal is unreachable") {
    Umdp umdp = two_action_chain();
    umdp.samples.push_back(umdp.samples[0]);
    umdp.samples.push_back(umdp.samples[0]);
    // sample 2: both actions self-loop at s0
    umdp.samples[2].set_row(0, 0, {{0, 1.0, 1.0}});
    umdp.samples[2].set_row(0, 1, {{0, 1.0, 1.0}});
    const auto issues = validate_umdp(umdp);
    bool found = false;
    for (const auto& issue : issues)
        found |= issue.find("no proper policy in sample 2") != std::string::npos;
    CHECK(found);
}

TEST_CASE("validation rejects non-absorbing goals and negative costs") {
    Umdp umdp = two_action_chain();
    umdp.samples[0].set_row(1, 0, {{0, 1.0, 0.0}});
    auto issues = validate_umdp(umdp);
    bool found = false;
    for (const auto& issue : issues) found |= issue.find("not absorbing") != std::string::npos;
    CHECK(found);

    umdp = two_action_chain();
    umdp.samples[0].set_row(0, 0, {{1, 1.0, -0.5}});
    issues = validate_umdp(umdp);
    found = false;
    for (const auto& issue : issues) found |= issue.find("negative cost") != std::string::npos;
    CHECK(found);
}

TEST_CASE("expected cost is the probability-weighted cost") {
    MdpSample sample(3, 1);
    sample.set_row(0, 0, {{1, 0.5, 2.0}, {2, 0.5, 4.0}});
    CHECK(sample.expected_cost(0, 0) == doctest::Approx(3.0));

    const Umdp chain = two_action_chain();
    CHECK(chain.samples[0].expected_cost(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("expected cost matches direct summation on random rows") {
    const Umdp umdp = random_ssp_umdp(7, {5, 2, 3, 1});
    const MdpSample& sample = umdp.samples[0];
    for (StateId s = 0; s < umdp.num_states; ++s) {
        for (ActionId a : sample.actions_at(s)) {
            double expected = 0.0;
            for (const TransitionEntry& e : sample.row(s, a)) expected += e.prob * e.cost;
            CHECK(sample.expected_cost(s, a) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("optimal values pick the cheaper action and sum path costs") {
    const Umdp chain = two_action_chain();
    const OptimalSolution sol = optimal_values(chain, chain.samples[0]);
    CHECK(sol.values[0] == doctest::Approx(1.0));
    CHECK(sol.policy.action_at(0) == 0);
    CHECK(sol.values[1] == 0.0);

    const Umdp longer = three_state_chain();
    CHECK(optimal_values(longer, longer.samples[0]).values[0] == doctest::Approx(2.0));
}

TEST_CASE("optimal greedy policy matches its linear-solve evaluation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {6, 3, 3, 1});
        const OptimalSolution sol = optimal_values(umdp, umdp.samples[0]);
        const ValueTable oracle = linear_solve_evaluation(umdp, umdp.samples[0], sol.policy);
        for (StateId s = 0; s < umdp.num_states; ++s)
            CHECK(sol.values[s] == doctest::Approx(oracle[s]).epsilon(1e-6));
    }
}

TEST_CASE("policy evaluation on the chain") {
    const Umdp chain = two_action_chain();
    const MdpSample& sample = chain.samples[0];
    CHECK(evaluate_policy(chain, sample, StationaryPolicy::deterministic({0, 0}))[0] ==
          doctest::Approx(1.0));
    CHECK(evaluate_policy(chain, sample, StationaryPolicy::deterministic({1, 0}))[0] ==
          doctest::Approx(2.0));
    StationaryPolicy mixed(2);
    mixed.set_row(0, {{0, 0.5}, {1, 0.5}});
    mixed.set_action(1, 0);
    CHECK(evaluate_policy(chain, sample, mixed)[0] == doctest::Approx(1.5));
}

TEST_CASE("policy evaluation of the optimal policy equals the optimal values") {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {8, 3, 3, 1});
        const OptimalSolution sol = optimal_values(umdp, umdp.samples[0]);
        const ValueTable evaluated = evaluate_policy(umdp, umdp.samples[0], sol.policy);
        for (StateId s = 0; s < umdp.num_states; ++s)
            CHECK(evaluated[s] == doctest::Approx(sol.values[s]).epsilon(1e-8));
    }
}

TEST_CASE("improper policies are detected") {
    const Umdp chain = two_action_chain();
    CHECK(check_proper(chain, chain.samples[0], StationaryPolicy::deterministic({0, 0})));

    Umdp trap = two_action_chain();
    trap.samples[0].set_row(0, 1, {{0, 1.0, 1.0}});  // a1 now self-loops
    CHECK(!check_proper(trap, trap.samples[0], StationaryPolicy::deterministic({1, 0})));
    CHECK_THROWS_AS(
        evaluate_policy(trap, trap.samples[0], StationaryPolicy::deterministic({1, 0})),
        ConvergenceError);

    // small leak toward the goal keeps a policy proper
    Umdp leak;
    leak.num_states = 4;
    leak.num_actions = 1;
    leak.initial = 0;
    leak.goals = {3};
    MdpSample sample(4, 1);
    sample.set_row(0, 0, {{0, 0.9, 1.0}, {3, 0.1, 1.0}});
    sample.set_row(1, 0, {{1, 0.9, 1.0}, {3, 0.1, 1.0}});
    sample.set_row(2, 0, {{2, 0.9, 1.0}, {3, 0.1, 1.0}});
    sample.set_row(3, 0, {{3, 1.0, 0.0}});
    leak.samples.push_back(std::move(sample));
    CHECK(check_proper(leak, leak.samples[0], StationaryPolicy::deterministic({0, 0, 0, 0})));
}

TEST_CASE("action gaps are zero for greedy actions and positive otherwise") {
    const Umdp chain = two_action_chain();
    const OptimalSolution sol = optimal_values(chain, chain.samples[0]);
    CHECK(q_gap(chain.samples[0], sol.values, 0, 0) == doctest::Approx(0.0));
    CHECK(q_gap(chain.samples[0], sol.values, 0, 1) == doctest::Approx(1.0));
}

TEST_CASE("minimum action gap vanishes at every state") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {9, 4, 3, 1});
        const MdpSample& sample = umdp.samples[0];
        const OptimalSolution sol = optimal_values(umdp, sample);
        for (StateId s = 0; s < umdp.num_states - 1; ++s) {
            double smallest = 1e100;
            for (ActionId a : sample.actions_at(s)) {
                const double gap = q_gap(sample, sol.values, s, a);
                CHECK(gap >= -1e-8);
                smallest = std::min(smallest, gap);
            }
            CHECK(smallest == doctest::Approx(0.0).epsilon(1e-8));
        }
    }
}

TEST_CASE("direct regret on the chain") {
    const Umdp chain = two_action_chain();
    CHECK(regret_direct(chain, chain.samples[0], StationaryPolicy::deterministic({0, 0})) ==
          doctest::Approx(0.0));
    CHECK(regret_direct(chain, chain.samples[0], StationaryPolicy::deterministic({1, 0})) ==
          doctest::Approx(1.0));
}

TEST_CASE("regret recursion equals direct regret state-wise") {
    // the regret recursion must reproduce V(pi) - V(pi*) everywhere
    for (std::uint64_t seed = 50; seed < 90; ++seed) {
        std::mt19937_64 rng(seed);
        RandomSspParams params;
        params.num_states = 3 + static_cast<int>(rng() % 10);
        params.num_actions = 1 + static_cast<int>(rng() % 4);
        const Umdp umdp = random_ssp_umdp(seed, params);
        const MdpSample& sample = umdp.samples[0];
        const StationaryPolicy policy = random_stochastic_policy(seed + 1, umdp);
        const ValueTable vstar = optimal_values(umdp, sample).values;
        const ValueTable direct = evaluate_policy(umdp, sample, policy);
        const ValueTable recursion = regret_bellman_eval(umdp, sample, policy, vstar);
        for (StateId s = 0; s < umdp.num_states; ++s) {
            CHECK(std::abs(recursion[s] - (direct[s] - vstar[s])) <= 1e-6);
            CHECK(recursion[s] >= -1e-8);
        }
        for (StateId g : umdp.goals) CHECK(recursion[g] == 0.0);
    }
}

TEST_CASE("regret recursion on the chain") {
    const Umdp chain = two_action_chain();
    const MdpSample& sample = chain.samples[0];
    const ValueTable vstar = optimal_values(chain, sample).values;
    const ValueTable zero =
        regret_bellman_eval(chain, sample, StationaryPolicy::deterministic({0, 0}), vstar);
    CHECK(zero[0] == doctest::Approx(0.0));
    const ValueTable one =
        regret_bellman_eval(chain, sample, StationaryPolicy::deterministic({1, 0}), vstar);
    CHECK(one[0] == doctest::Approx(1.0));
}

TEST_CASE("myopic regret on one-step problems matches true regret") {
    const Umdp chain = two_action_chain();
    const MdpSample& sample = chain.samples[0];
    CHECK(cemr_eval(chain, sample, StationaryPolicy::deterministic({0, 0}))[0] ==
          doctest::Approx(0.0));
    CHECK(cemr_eval(chain, sample, StationaryPolicy::deterministic({1, 0}))[0] ==
          doctest::Approx(1.0));
}

TEST_CASE("myopic regret can differ from true regret") {
    // cheap first step into an expensive region: locally greedy, globally bad
    Umdp umdp;
    umdp.num_states = 4;
    umdp.num_actions = 2;
    umdp.initial = 0;
    umdp.goals = {3};
    MdpSample sample(4, 2);
    sample.set_row(0, 0, {{1, 1.0, 1.0}});   // cheap step into the bad region
    sample.set_row(0, 1, {{2, 1.0, 2.0}});   // pricier step toward the good region
    sample.set_row(1, 0, {{3, 1.0, 10.0}});
    sample.set_row(1, 1, {{3, 1.0, 10.0}});
    sample.set_row(2, 0, {{3, 1.0, 1.0}});
    sample.set_row(2, 1, {{3, 1.0, 1.0}});
    sample.set_row(3, 0, {{3, 1.0, 0.0}});
    sample.set_row(3, 1, {{3, 1.0, 0.0}});
    umdp.samples.push_back(std::move(sample));

    const StationaryPolicy deceived = StationaryPolicy::deterministic({0, 0, 0, 0});
    const ValueTable vstar = optimal_values(umdp, umdp.samples[0]).values;
    const ValueTable regret =
        regret_bellman_eval(umdp, umdp.samples[0], deceived, vstar);
    const ValueTable myopic = cemr_eval(umdp, umdp.samples[0], deceived);
    CHECK(regret[0] == doctest::Approx(8.0));
    CHECK(myopic[0] == doctest::Approx(0.0));
    CHECK(std::abs(regret[0] - myopic[0]) > 1.0);
}

TEST_CASE("goal states carry zero value under every evaluator") {
    const Umdp umdp = random_ssp_umdp(99, {7, 2, 3, 2});
    const StationaryPolicy policy = random_stochastic_policy(100, umdp);
    for (const MdpSample& sample : umdp.samples) {
        const ValueTable vstar = optimal_values(umdp, sample).values;
        for (StateId g : umdp.goals) {
            CHECK(vstar[g] == 0.0);
            CHECK(evaluate_policy(umdp, sample, policy)[g] == 0.0);
            CHECK(regret_bellman_eval(umdp, sample, policy, vstar)[g] == 0.0);
            CHECK(cemr_eval(umdp, sample, policy)[g] == 0.0);
        }
    }
}

TEST_CASE("goal absorption accrues no cost in simulation") {
    const Umdp chain = two_action_chain();
    const MdpSample& sample = chain.samples[0];
    std::mt19937_64 rng(3);
    double accrued = 0.0;
    StateId s = 1;  // start at the goal
    for (int step = 0; step < 100; ++step) {
        const TransitionEntry& e = sample.row(s, 0).front();
        accrued += e.cost;
        s = e.next;
    }
    CHECK(accrued == 0.0);
    CHECK(s == 1);
}

TEST_CASE("hitting times solve the expected-steps equations") {
    const Umdp chain = three_state_chain();
    const ValueTable hits =
        expected_hitting_times(chain, chain.samples[0], StationaryPolicy::deterministic({0, 0, 0}));
    CHECK(hits[0] == doctest::Approx(2.0));
    CHECK(hits[1] == doctest::Approx(1.0));
    CHECK(hits[2] == 0.0);
}
