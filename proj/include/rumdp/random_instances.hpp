#pragma once

#include <cstdint>

#include "rumdp/planners.hpp"
#include "rumdp/types.hpp"

namespace rumdp {

/// Random goal-directed SSP UMDPs for property checks. Every action has at
/// least one successor closer to the goal, so any policy is proper.
struct RandomSspParams {
    int num_states = 8;  // last state is the goal
    int num_actions = 3;
    int branching = 3;
    int num_samples = 1;
    double cost_spread = 0.2;  // relative cross-sample cost perturbation
    double prob_spread = 0.2;  // relative cross-sample probability perturbation
};

Umdp random_ssp_umdp(std::uint64_t seed, const RandomSspParams& params = {});

/// Random stochastic policy over the actions available in the UMDP.
StationaryPolicy random_stochastic_policy(std::uint64_t seed, const Umdp& umdp);

/// Random deterministic policy over the available actions.
StationaryPolicy random_deterministic_policy(std::uint64_t seed, const Umdp& umdp);

/// Random per-(state, action) menus of transition/cost alternatives with the
/// same goal-directed structure.
FactoredUmdp random_factored_umdp(std::uint64_t seed, int num_states, int num_actions,
                                  int menu_entries);

}  // namespace rumdp
