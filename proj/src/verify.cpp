#include "rumdp/verify.hpp"

#include "rumdp/random_instances.hpp"
#include "rumdp/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace rumdp {

BruteForceResult brute_force_minimax_regret(const Umdp& umdp, const SolveParams& params) {
    const std::vector<char> goal = umdp.goal_mask();
    std::vector<StateId> free_states;
    for (StateId s = 0; s < umdp.num_states; ++s)
        if (!goal[s]) free_states.push_back(s);

    std::vector<ValueTable> vstar;
    for (const MdpSample& sample : umdp.samples)
        vstar.push_back(optimal_values(umdp, sample, params).values);

    std::vector<ActionId> goal_actions(umdp.num_states, 0);
    for (StateId g : umdp.goals) goal_actions[g] = umdp.samples[0].actions_at(g).front();

    BruteForceResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> odometer(free_states.size(), 0);
    for (;;) {
        ++best.candidates;
        std::vector<ActionId> choice(umdp.num_states, 0);
        for (StateId g : umdp.goals) choice[g] = goal_actions[g];
        for (std::size_t i = 0; i < free_states.size(); ++i)
            choice[free_states[i]] =
                umdp.samples[0].actions_at(free_states[i])[odometer[i]];
        const StationaryPolicy policy = StationaryPolicy::deterministic(choice);

        double worst = 0.0;
        bool proper = true;
        for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
            if (!check_proper(umdp, umdp.samples[q], policy)) {
                proper = false;
                break;
            }
            const ValueTable values = evaluate_policy(umdp, umdp.samples[q], policy, params);
            worst = std::max(worst, values[umdp.initial] - vstar[q][umdp.initial]);
        }
        if (proper && worst < best.value) {
            best.value = worst;
            best.policy = policy;
        }

        // advance the policy odometer, last state fastest
        std::size_t k = free_states.size();
        while (k-- > 0) {
            if (++odometer[k] < umdp.samples[0].actions_at(free_states[k]).size()) break;
            odometer[k] = 0;
        }
        bool done = true;
        for (std::size_t v : odometer) done &= v == 0;
        if (done && best.candidates > 0) break;
    }
    return best;
}

namespace {

struct SlotSet {
    std::vector<std::pair<int, StateId>> slots;
    std::vector<std::vector<ActionId>> actions;
};

SlotSet option_slots(const Umdp& umdp, StateId anchor, int horizon) {
    const ReachableSets sets = reachable_sets(umdp, anchor, horizon);
    const std::vector<char> goal = umdp.goal_mask();
    SlotSet out;
    for (int t = 0; t < horizon; ++t)
        for (StateId s : sets.unions[t]) {
            if (goal[s]) continue;
            out.slots.push_back({t, s});
            out.actions.push_back(umdp.samples[0].actions_at(s));
        }
    return out;
}

}  // namespace

long count_option_policies(const Umdp& umdp, StateId anchor, int horizon, long cap) {
    const SlotSet set = option_slots(umdp, anchor, horizon);
    long total = 1;
    for (const auto& actions : set.actions) {
        if (total > cap / std::max<long>(1, static_cast<long>(actions.size()))) return cap + 1;
        total *= static_cast<long>(actions.size());
    }
    return total;
}

EnumerationResult enumerate_option_policies(const Umdp& umdp, StateId anchor, int horizon,
                                            const ValueTable& estimates,
                                            const std::vector<ValueTable>& optimal_per_sample,
                                            BackupKind kind, double kappa, long max_candidates) {
    const SlotSet set = option_slots(umdp, anchor, horizon);
    const long total = count_option_policies(umdp, anchor, horizon, max_candidates);
    if (total > max_candidates)
        throw ModelError("enumerate_option_policies: more than " +
                         std::to_string(max_candidates) + " candidates");

    OptionOptimizer optimizer(umdp, horizon, optimal_per_sample, kind, kappa,
                              std::numeric_limits<long>::max());
    EnumerationResult best;
    best.objective = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> odometer(set.slots.size(), 0);
    for (long index = 0; index < total; ++index) {
        OptionPolicy option;
        option.anchor = anchor;
        option.horizon = horizon;
        for (std::size_t k = 0; k < set.slots.size(); ++k)
            option.table[OptionPolicy::key(set.slots[k].first, set.slots[k].second,
                                           umdp.num_states)] = set.actions[k][odometer[k]];
        const double objective = optimizer.evaluate(anchor, option, estimates);
        ++best.candidates;
        if (objective < best.objective) {
            best.objective = objective;
            best.policy = std::move(option);
        }
        std::size_t k = odometer.size();
        while (k-- > 0) {
            if (++odometer[k] < set.actions[k].size()) break;
            odometer[k] = 0;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// property suite
// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    return z ^ (z >> 27);
}

PropertyResult check_regret_recursion(std::uint64_t seed, int count) {
    double worst_gap = 0.0;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix(seed, 100 + i));
        RandomSspParams params;
        params.num_states = 3 + static_cast<int>(rng() % 10);  // up to 12
        params.num_actions = 1 + static_cast<int>(rng() % 4);
        params.branching = 2 + static_cast<int>(rng() % 2);
        const Umdp umdp = random_ssp_umdp(mix(seed, 200 + i), params);
        const StationaryPolicy policy = random_stochastic_policy(mix(seed, 300 + i), umdp);
        const MdpSample& sample = umdp.samples[0];
        const ValueTable vstar = optimal_values(umdp, sample).values;
        const ValueTable direct = evaluate_policy(umdp, sample, policy);
        const ValueTable recursion = regret_bellman_eval(umdp, sample, policy, vstar);
        for (StateId s = 0; s < umdp.num_states; ++s)
            worst_gap = std::max(worst_gap,
                                 std::abs(recursion[s] - (direct[s] - vstar[s])));
    }
    std::ostringstream detail;
    detail << "max state-wise gap " << worst_gap << " over " << count << " models";
    return {"regret-recursion-equivalence", worst_gap <= 1e-6, detail.str()};
}

PropertyResult check_independent_exactness(std::uint64_t seed, int count) {
    double worst_diff = 0.0;
    const double kappa = 1e-6;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix(seed, 400 + i));
        const int states = 3 + static_cast<int>(rng() % 2);
        const FactoredUmdp factored =
            random_factored_umdp(mix(seed, 500 + i), states, 2, 2);
        PlannerConfig cfg;
        cfg.kappa = kappa;
        cfg.epsilon = 1e-10;
        const OptionPlan plan = exact_independent_minimax_regret(factored, cfg);
        const BruteForceResult oracle = brute_force_minimax_regret(factored.to_product_umdp());
        worst_diff = std::max(worst_diff,
                              std::abs(plan.reg[factored.initial] - oracle.value));
    }
    std::ostringstream detail;
    detail << "max |planner - brute force| " << worst_diff << " over " << count
           << " factored models";
    return {"independent-exactness", worst_diff <= kappa * 20 + 1e-6, detail.str()};
}

PropertyResult check_adversary_sandwich(std::uint64_t seed, int count) {
    double worst_low = 0.0, worst_high = 0.0;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix(seed, 600 + i));
        RandomSspParams params;
        params.num_states = 4 + static_cast<int>(rng() % 5);
        params.num_actions = 2 + static_cast<int>(rng() % 2);
        params.num_samples = 2 + static_cast<int>(rng() % 3);
        params.cost_spread = 0.1;
        params.prob_spread = 0.1;
        const Umdp umdp = random_ssp_umdp(mix(seed, 700 + i), params);
        const StationaryPolicy policy = robust_vi(umdp).policy;
        const double fixed = max_regret(umdp, umdp.samples, policy).value;
        const double adversarial = adversary_value(umdp, policy, 1);
        const BoundConstants bc = bound_constants(umdp, policy);
        worst_low = std::min(worst_low, adversarial - fixed);
        worst_high = std::max(worst_high, adversarial - fixed - adversary_gap_bound(bc));
    }
    std::ostringstream detail;
    detail << "lower slack " << worst_low << ", bound slack " << worst_high << " over " << count
           << " models";
    return {"adversary-sandwich", worst_low >= -1e-9 && worst_high <= 1e-9, detail.str()};
}

PropertyResult check_option_bellman_consistency(std::uint64_t seed, int count) {
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        std::mt19937_64 rng(mix(seed, 800 + i));
        RandomSspParams params;
        params.num_states = 4 + static_cast<int>(rng() % 4);
        params.num_actions = 2;
        params.num_samples = 2 + static_cast<int>(rng() % 3);
        const Umdp umdp = random_ssp_umdp(mix(seed, 900 + i), params);
        const int n = 1 + static_cast<int>(rng() % 2);
        PlannerConfig cfg;
        cfg.epsilon = 1e-8;
        const OptionPlan plan = minimax_regret_vi(umdp, n, cfg);
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);
        const std::vector<char> goal = umdp.goal_mask();
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            double recomputed = -std::numeric_limits<double>::infinity();
            for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
                const OptionModel m = option_cost_and_transition(umdp, q, plan.options[s],
                                                                 vstar[q]);
                double v = m.cost + plan.kappa;
                for (const auto& [next, p] : m.transition) v += p * plan.reg[next];
                recomputed = std::max(recomputed, v);
            }
            worst = std::max(worst, std::abs(plan.reg[s] - std::max(0.0, recomputed)));
        }
    }
    std::ostringstream detail;
    detail << "max |value - option backup| " << worst << " over " << count << " plans";
    return {"option-bellman-consistency", worst <= 1e-8, detail.str()};
}

PropertyResult check_horizon_monotonicity(std::uint64_t seed, int count) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) {
        RandomSspParams params;
        params.num_states = 6;
        params.num_actions = 2;
        params.num_samples = 3;
        const Umdp umdp = random_ssp_umdp(mix(seed, 1100 + i), params);
        PlannerConfig cfg;
        const OptionPlan plan1 = minimax_regret_vi(umdp, 1, cfg);
        const OptionPlan plan2 = minimax_regret_vi(umdp, 2, cfg);

        // the n=1 plan is a stationary policy; its worst-sample hitting time
        // bounds the expected number of option applications
        StationaryPolicy stationary(umdp.num_states);
        const std::vector<char> goal = umdp.goal_mask();
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) {
                stationary.set_action(s, umdp.samples[0].actions_at(s).front());
                continue;
            }
            stationary.set_action(s, plan1.options[s].action(0, s, umdp.num_states));
        }
        double hitting = 0.0;
        for (const MdpSample& sample : umdp.samples)
            for (double h : expected_hitting_times(umdp, sample, stationary))
                hitting = std::max(hitting, h);
        const double slack = 2.0 * cfg.kappa * 2.0 * hitting;
        worst = std::max(worst, plan2.reg[umdp.initial] - plan1.reg[umdp.initial] - slack);
    }
    std::ostringstream detail;
    detail << "max value(n=2) - value(n=1) - slack = " << worst << " over " << count
           << " models";
    return {"horizon-monotonicity", worst <= 1e-9, detail.str()};
}

PropertyResult check_search_exactness(std::uint64_t seed, int count) {
    int mismatches = 0;
    long checked = 0;
    for (int i = 0; checked < count && i < count * 20; ++i) {
        std::mt19937_64 rng(mix(seed, 1300 + i));
        RandomSspParams params;
        params.num_states = 5 + static_cast<int>(rng() % 3);
        params.num_actions = 2 + static_cast<int>(rng() % 2);
        params.branching = 2;
        params.num_samples = 2 + static_cast<int>(rng() % 2);
        const Umdp umdp = random_ssp_umdp(mix(seed, 1400 + i), params);
        if (count_option_policies(umdp, umdp.initial, 2, 1000) > 1000) continue;
        ++checked;

        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        ValueTable estimates(umdp.num_states, 0.0);
        const std::vector<char> goal = umdp.goal_mask();
        for (StateId s = 0; s < umdp.num_states; ++s)
            if (!goal[s]) estimates[s] = uniform(rng);
        const std::vector<ValueTable> vstar = optimal_values_all(umdp);

        const InnerSolution search = optimize_option_deterministic(
            umdp, umdp.initial, 2, estimates, vstar, 1e-4);
        const EnumerationResult oracle = enumerate_option_policies(
            umdp, umdp.initial, 2, estimates, vstar, BackupKind::regret, 1e-4, 1000);
        if (search.objective != oracle.objective) ++mismatches;
    }
    std::ostringstream detail;
    detail << mismatches << " mismatches over " << checked << " inner problems";
    return {"search-exactness", mismatches == 0 && checked == count, detail.str()};
}

PropertyResult check_validator_detects_faults(std::uint64_t seed) {
    Umdp umdp = random_ssp_umdp(mix(seed, 1500), {});
    // break one probability row
    MdpSample& sample = umdp.samples[0];
    TransitionRow row = sample.row(0, 0);
    row.front().prob *= 0.5;
    sample.set_row(0, 0, row);
    const auto issues = validate_umdp(umdp);
    bool found = false;
    for (const std::string& issue : issues) found |= issue.find("distribution mass") != std::string::npos;
    return {"validator-detects-faults", found,
            found ? "broken probability mass reported" : "fault not reported"};
}

}  // namespace

std::vector<PropertyResult> run_property_suite(std::uint64_t seed, bool quick) {
    std::vector<PropertyResult> results;
    results.push_back(check_regret_recursion(seed, quick ? 40 : 200));
    results.push_back(check_independent_exactness(seed, quick ? 5 : 20));
    results.push_back(check_adversary_sandwich(seed, quick ? 8 : 30));
    results.push_back(check_option_bellman_consistency(seed, quick ? 5 : 20));
    results.push_back(check_horizon_monotonicity(seed, quick ? 3 : 10));
    results.push_back(check_search_exactness(seed, quick ? 10 : 50));
    results.push_back(check_validator_detects_faults(seed));
    return results;
}

}  // namespace rumdp
