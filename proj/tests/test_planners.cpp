#include <doctest.h>

#include <cmath>
#include <random>

#include "rumdp/evaluation.hpp"
#include "rumdp/planners.hpp"
#include "rumdp/random_instances.hpp"
#include "rumdp/solve.hpp"
#include "rumdp/verify.hpp"
#include "test_support.hpp"

using namespace rumdp;
using rumdp::testing::two_action_chain;

namespace {

// s0 with per-action one-step costs per sample; both actions reach the goal
Umdp matrix_game(double c00, double c01, double c10, double c11) {
    Umdp umdp;
    umdp.num_states = 2;
    umdp.num_actions = 2;
    umdp.initial = 0;
    umdp.goals = {1};
    MdpSample s1(2, 2), s2(2, 2);
    s1.set_row(0, 0, {{1, 1.0, c00}});
    s1.set_row(0, 1, {{1, 1.0, c01}});
    s2.set_row(0, 0, {{1, 1.0, c10}});
    s2.set_row(0, 1, {{1, 1.0, c11}});
    for (MdpSample* s : {&s1, &s2}) {
        s->set_row(1, 0, {{1, 1.0, 0.0}});
        s->set_row(1, 1, {{1, 1.0, 0.0}});
    }
    umdp.samples = {s1, s2};
    return umdp;
}

StationaryPolicy stationary_from_plan(const Umdp& umdp, const OptionPlan& plan) {
    StationaryPolicy policy(umdp.num_states);
    const std::vector<char> goal = umdp.goal_mask();
    for (StateId s = 0; s < umdp.num_states; ++s)
        policy.set_action(s, goal[s] ? umdp.samples[0].actions_at(s).front()
                                     : plan.options[s].action(0, s, umdp.num_states));
    return policy;
}

}  // namespace

TEST_CASE("single-sample planning accrues only the perturbation") {
    const Umdp umdp = random_ssp_umdp(1, {7, 3, 3, 1});
    PlannerConfig cfg;
    const OptionPlan plan = minimax_regret_vi(umdp, 1, cfg);
    CHECK(plan.converged);

    // the lone sample's optimal policy is minimax; the value is pure kappa
    // accumulation over the expected number of option applications
    const StationaryPolicy stationary = stationary_from_plan(umdp, plan);
    double hitting = 0.0;
    for (double h : expected_hitting_times(umdp, umdp.samples[0], stationary))
        hitting = std::max(hitting, h);
    CHECK(plan.reg[umdp.initial] >= 0.0);
    CHECK(plan.reg[umdp.initial] <= cfg.kappa * hitting + 1e-6);
}

TEST_CASE("two-sample matrix game has a pure saddle") {
    // one-step regrets: a0 -> (0, 1), a1 -> (1, 0); both worst cases are 1,
    // ties resolve to the lower action index
    const Umdp game = matrix_game(1.0, 2.0, 3.0, 2.0);
    PlannerConfig cfg;
    cfg.kappa = 1e-4;
    const OptionPlan plan = minimax_regret_vi(game, 1, cfg);
    CHECK(plan.reg[0] == doctest::Approx(1.0 + cfg.kappa));
    CHECK(plan.options[0].action(0, 0, game.num_states) == 0);
}

TEST_CASE("planning matches brute force on small independent menus") {
    const double kappa = 1e-6;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const FactoredUmdp factored = random_factored_umdp(seed, 3, 2, 2);
        PlannerConfig cfg;
        cfg.kappa = kappa;
        cfg.epsilon = 1e-10;
        const OptionPlan plan = exact_independent_minimax_regret(factored, cfg);
        const BruteForceResult oracle =
            brute_force_minimax_regret(factored.to_product_umdp());
        CHECK(std::abs(plan.reg[factored.initial] - oracle.value) <= kappa * 20 + 1e-6);
    }
}

TEST_CASE("single-entry menus reduce to the single-sample case") {
    FactoredUmdp factored = random_factored_umdp(7, 4, 2, 1);
    CHECK(factored.product_size() == 1);
    PlannerConfig cfg;
    cfg.kappa = 1e-6;
    const OptionPlan plan = exact_independent_minimax_regret(factored, cfg);
    CHECK(plan.reg[factored.initial] <= 1e-4);
}

TEST_CASE("oversized menu products are rejected") {
    const FactoredUmdp factored = random_factored_umdp(11, 4, 2, 3);
    CHECK_THROWS_AS(factored.to_product_umdp(16), ModelError);
}

TEST_CASE("robust value iteration on a single sample is plain value iteration") {
    const Umdp umdp = random_ssp_umdp(21, {8, 3, 3, 1});
    const RobustSolution robust = robust_vi(umdp);
    const OptimalSolution plain = optimal_values(umdp, umdp.samples[0]);
    for (StateId s = 0; s < umdp.num_states; ++s)
        CHECK(robust.values[s] == doctest::Approx(plain.values[s]).epsilon(1e-6));
}

TEST_CASE("robust value iteration picks the action with the best worst case") {
    const Umdp game = matrix_game(1.0, 2.0, 3.0, 2.0);
    const RobustSolution robust = robust_vi(game);
    CHECK(robust.policy.action_at(0) == 1);  // worst costs: a0 -> 3, a1 -> 2
    CHECK(robust.values[0] == doctest::Approx(2.0));
}

TEST_CASE("robust values satisfy the minimax residual and dominate every sample") {
    for (std::uint64_t seed = 30; seed < 34; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {8, 3, 3, 3});
        const RobustSolution robust = robust_vi(umdp);
        for (StateId s = 0; s + 1 < umdp.num_states; ++s) {
            double best = 1e100;
            for (ActionId a : umdp.samples[0].actions_at(s)) {
                double worst = -1e100;
                for (const MdpSample& sample : umdp.samples) {
                    double backup = sample.expected_cost(s, a);
                    for (const TransitionEntry& e : sample.row(s, a))
                        backup += e.prob * robust.values[e.next];
                    worst = std::max(worst, backup);
                }
                best = std::min(best, worst);
            }
            CHECK(std::abs(best - robust.values[s]) <= 1e-5);
        }
        for (const MdpSample& sample : umdp.samples)
            CHECK(robust.values[umdp.initial] >=
                  optimal_values(umdp, sample).values[umdp.initial] - 1e-8);
    }
}

TEST_CASE("one-step myopic planning matches regret planning when both gaps agree") {
    // with every successor a goal, the local cost gap equals the action gap
    const Umdp game = matrix_game(1.0, 2.0, 3.0, 2.0);
    const OptionPlan reg = minimax_regret_vi(game, 1);
    const OptionPlan myopic = cemr_minimax_vi(game, 1);
    CHECK(reg.options[0].action(0, 0, game.num_states) ==
          myopic.options[0].action(0, 0, game.num_states));
    CHECK(reg.reg[0] == doctest::Approx(myopic.reg[0]));
}

TEST_CASE("myopic planning can be deceived by cheap first steps") {
    // action 0 steps cheaply into an expensive region, action 1 is pricier
    // but leads somewhere good; local gaps cannot see the difference
    Umdp umdp;
    umdp.num_states = 4;
    umdp.num_actions = 2;
    umdp.initial = 0;
    umdp.goals = {3};
    MdpSample s1(4, 2);
    s1.set_row(0, 0, {{1, 1.0, 1.0}});
    s1.set_row(0, 1, {{2, 1.0, 2.0}});
    s1.set_row(1, 0, {{3, 1.0, 10.0}});
    s1.set_row(1, 1, {{3, 1.0, 12.0}});
    s1.set_row(2, 0, {{3, 1.0, 1.0}});
    s1.set_row(2, 1, {{3, 1.0, 2.0}});
    s1.set_row(3, 0, {{3, 1.0, 0.0}});
    s1.set_row(3, 1, {{3, 1.0, 0.0}});
    MdpSample s2 = s1;
    s2.set_row(1, 0, {{3, 1.0, 14.0}});
    umdp.samples = {s1, s2};

    const OptionPlan reg = minimax_regret_vi(umdp, 1);
    const OptionPlan myopic = cemr_minimax_vi(umdp, 1);
    CHECK(reg.options[0].action(0, 0, umdp.num_states) == 1);
    CHECK(myopic.options[0].action(0, 0, umdp.num_states) == 0);

    const double reg_worst = max_regret(umdp, umdp.samples, reg).value;
    const double myopic_worst = max_regret(umdp, umdp.samples, myopic).value;
    CHECK(myopic_worst > reg_worst + 1.0);
}

TEST_CASE("single-sample myopic planning is nonnegative") {
    const Umdp umdp = random_ssp_umdp(41, {6, 2, 2, 1});
    const OptionPlan plan = cemr_minimax_vi(umdp, 1);
    CHECK(plan.converged);
    CHECK(plan.reg[umdp.initial] >= 0.0);
}

TEST_CASE("averaging identical samples returns their optimal policy") {
    Umdp umdp = random_ssp_umdp(50, {7, 3, 3, 1});
    umdp.samples.push_back(umdp.samples[0]);
    const StationaryPolicy policy = averaged_mdp_policy(umdp);
    const StationaryPolicy expected = optimal_values(umdp, umdp.samples[0]).policy;
    for (StateId s = 0; s + 1 < umdp.num_states; ++s)
        CHECK(policy.action_at(s) == expected.action_at(s));
}

TEST_CASE("averaging blends disjoint supports") {
    Umdp umdp;
    umdp.num_states = 4;
    umdp.num_actions = 1;
    umdp.initial = 0;
    umdp.goals = {3};
    MdpSample s1(4, 1), s2(4, 1);
    s1.set_row(0, 0, {{1, 1.0, 1.0}});
    s2.set_row(0, 0, {{2, 1.0, 3.0}});
    for (MdpSample* s : {&s1, &s2}) {
        s->set_row(1, 0, {{3, 1.0, 1.0}});
        s->set_row(2, 0, {{3, 1.0, 1.0}});
        s->set_row(3, 0, {{3, 1.0, 0.0}});
    }
    umdp.samples = {s1, s2};
    const MdpSample avg = averaged_sample(umdp);
    const TransitionRow& row = avg.row(0, 0);
    REQUIRE(row.size() == 2);
    CHECK(row[0].next == 1);
    CHECK(row[0].prob == doctest::Approx(0.5));
    CHECK(row[1].prob == doctest::Approx(0.5));
    // probability-weighted costs keep the mean expected cost
    CHECK(avg.expected_cost(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("averaged rows sum to one on generated instances") {
    const Umdp umdp = random_ssp_umdp(52, {8, 3, 3, 4});
    const MdpSample avg = averaged_sample(umdp);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        for (ActionId a : avg.actions_at(s)) {
            double mass = 0.0;
            for (const TransitionEntry& e : avg.row(s, a)) mass += e.prob;
            CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("best-sample selection scans all candidates") {
    const Umdp umdp = random_ssp_umdp(60, {7, 3, 3, 4});
    const BestSampleResult best = best_sample_policy(umdp);
    // the returned score cannot beat any candidate's evaluated score
    for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
        const StationaryPolicy candidate = optimal_values(umdp, umdp.samples[q]).policy;
        const double score = max_regret(umdp, umdp.samples, candidate).value;
        CHECK(best.max_regret <= score + 1e-9);
    }
    CHECK(best.max_regret >= 0.0);
}

TEST_CASE("single-sample best-sample has zero max regret") {
    const Umdp umdp = random_ssp_umdp(61, {6, 2, 2, 1});
    const BestSampleResult best = best_sample_policy(umdp);
    CHECK(best.max_regret <= 1e-7);
    CHECK(best.sample_index == 0);
}

TEST_CASE("weakening the adversary never raises the achievable value") {
    for (std::uint64_t seed = 70; seed < 74; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {6, 2, 2, 3});
        PlannerConfig cfg;
        const OptionPlan plan1 = minimax_regret_vi(umdp, 1, cfg);
        const OptionPlan plan2 = minimax_regret_vi(umdp, 2, cfg);

        const StationaryPolicy stationary = stationary_from_plan(umdp, plan1);
        double hitting = 0.0;
        for (const MdpSample& sample : umdp.samples)
            for (double h : expected_hitting_times(umdp, sample, stationary))
                hitting = std::max(hitting, h);
        CHECK(plan2.reg[umdp.initial] <=
              plan1.reg[umdp.initial] + 2.0 * cfg.kappa * 2.0 * hitting + 1e-9);
    }
}

TEST_CASE("values are monotone across sweeps from the zero start") {
    // costs are nonnegative, so the in-place sweeps only push values up
    for (std::uint64_t seed = 75; seed < 78; ++seed) {
        const Umdp umdp = random_ssp_umdp(seed, {6, 2, 2, 3});
        PlannerConfig cfg;
        cfg.record_sweeps = true;
        const OptionPlan plan = minimax_regret_vi(umdp, 1, cfg);
        REQUIRE(!plan.sweep_values.empty());
        ValueTable previous(umdp.num_states, 0.0);
        for (const ValueTable& table : plan.sweep_values) {
            for (StateId s = 0; s < umdp.num_states; ++s) {
                CHECK(table[s] >= previous[s] - 1e-12);
                CHECK(table[s] >= 0.0);
            }
            previous = table;
        }
    }
}

TEST_CASE("non-convergence within the sweep budget raises an error") {
    const Umdp umdp = random_ssp_umdp(80, {8, 3, 3, 2});
    PlannerConfig cfg;
    cfg.max_sweeps = 1;
    CHECK_THROWS_AS(minimax_regret_vi(umdp, 1, cfg), ConvergenceError);
}

TEST_CASE("planner deadlines raise timeouts") {
    const Umdp umdp = random_ssp_umdp(81, {10, 3, 3, 4});
    PlannerConfig cfg;
    cfg.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
    CHECK_THROWS_AS(minimax_regret_vi(umdp, 2, cfg), TimeoutError);
}

TEST_CASE("parallel per-sample solves match the sequential ones") {
    const Umdp umdp = random_ssp_umdp(90, {9, 3, 3, 6});
    const std::vector<ValueTable> sequential = optimal_values_all(umdp, {}, 1);
    const std::vector<ValueTable> parallel = optimal_values_all(umdp, {}, 4);
    REQUIRE(sequential.size() == parallel.size());
    for (std::size_t q = 0; q < sequential.size(); ++q)
        for (StateId s = 0; s < umdp.num_states; ++s)
            CHECK(sequential[q][s] == parallel[q][s]);
}
