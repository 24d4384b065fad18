#include "rumdp/random_instances.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace rumdp {

namespace {

TransitionRow random_row(std::mt19937_64& rng, StateId s, int num_states, int branching) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const StateId goal = num_states - 1;

    // at least one successor strictly closer to the goal keeps every policy
    // proper, the rest may point anywhere
    std::set<StateId> succ;
    std::uniform_int_distribution<StateId> forward(s + 1, goal);
    succ.insert(forward(rng));
    std::uniform_int_distribution<StateId> anywhere(0, goal);
    while (static_cast<int>(succ.size()) < branching) succ.insert(anywhere(rng));

    TransitionRow row;
    double total = 0.0;
    for (StateId next : succ) {
        const double w = 0.1 + uniform(rng);
        row.push_back({next, w, 0.1 + 1.9 * uniform(rng)});
        total += w;
    }
    for (TransitionEntry& e : row) e.prob /= total;
    return row;
}

}  // namespace

Umdp random_ssp_umdp(std::uint64_t seed, const RandomSspParams& params) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    Umdp umdp;
    umdp.num_states = params.num_states;
    umdp.num_actions = params.num_actions;
    umdp.initial = 0;
    umdp.goals = {params.num_states - 1};

    MdpSample base(params.num_states, params.num_actions);
    for (StateId s = 0; s + 1 < params.num_states; ++s)
        for (ActionId a = 0; a < params.num_actions; ++a)
            base.set_row(s, a, random_row(rng, s, params.num_states, params.branching));
    for (ActionId a = 0; a < params.num_actions; ++a)
        base.set_row(params.num_states - 1, a, {{params.num_states - 1, 1.0, 0.0}});

    umdp.samples.push_back(base);
    for (int q = 1; q < params.num_samples; ++q) {
        MdpSample sample(params.num_states, params.num_actions);
        for (StateId s = 0; s + 1 < params.num_states; ++s) {
            for (ActionId a = 0; a < params.num_actions; ++a) {
                TransitionRow row = base.row(s, a);
                double total = 0.0;
                for (TransitionEntry& e : row) {
                    e.prob *= 1.0 + params.prob_spread * (2.0 * uniform(rng) - 1.0);
                    e.cost = std::max(0.01,
                                      e.cost * (1.0 + params.cost_spread *
                                                          (2.0 * uniform(rng) - 1.0)));
                    total += e.prob;
                }
                for (TransitionEntry& e : row) e.prob /= total;
                sample.set_row(s, a, std::move(row));
            }
        }
        for (ActionId a = 0; a < params.num_actions; ++a)
            sample.set_row(params.num_states - 1, a, {{params.num_states - 1, 1.0, 0.0}});
        umdp.samples.push_back(std::move(sample));
    }
    return umdp;
}

StationaryPolicy random_stochastic_policy(std::uint64_t seed, const Umdp& umdp) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    StationaryPolicy policy(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        std::vector<std::pair<ActionId, double>> row;
        double total = 0.0;
        for (ActionId a : umdp.samples[0].actions_at(s)) {
            const double w = 0.05 + uniform(rng);
            row.push_back({a, w});
            total += w;
        }
        for (auto& [a, p] : row) p /= total;
        policy.set_row(s, std::move(row));
    }
    return policy;
}

StationaryPolicy random_deterministic_policy(std::uint64_t seed, const Umdp& umdp) {
    std::mt19937_64 rng(seed);
    StationaryPolicy policy(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        const auto actions = umdp.samples[0].actions_at(s);
        std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
        policy.set_action(s, actions[pick(rng)]);
    }
    return policy;
}

FactoredUmdp random_factored_umdp(std::uint64_t seed, int num_states, int num_actions,
                                  int menu_entries) {
    std::mt19937_64 rng(seed);
    FactoredUmdp factored;
    factored.num_states = num_states;
    factored.num_actions = num_actions;
    factored.initial = 0;
    factored.goals = {num_states - 1};
    factored.menus.assign(num_states, std::vector<std::vector<TransitionRow>>(num_actions));
    for (StateId s = 0; s < num_states; ++s) {
        for (ActionId a = 0; a < num_actions; ++a) {
            if (s == num_states - 1) {
                factored.menus[s][a] = {{{s, 1.0, 0.0}}};
                continue;
            }
            for (int m = 0; m < menu_entries; ++m)
                factored.menus[s][a].push_back(random_row(rng, s, num_states, 2));
        }
    }
    return factored;
}

}  // namespace rumdp
