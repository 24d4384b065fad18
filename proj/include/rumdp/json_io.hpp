#pragma once

#include <string>

#include "rumdp/planners.hpp"
#include "rumdp/types.hpp"

namespace rumdp {

/// UMDP interchange document:
///   {states, actions, initial, goals, samples:[{transitions:[[s,a,s',p,c],...]}]}
/// Probabilities and costs may be numbers or decimal strings. Loading
/// validates the model and throws ModelError listing the violations.
Umdp umdp_from_json_string(const std::string& text);
std::string umdp_to_json_string(const Umdp& umdp);
Umdp load_umdp_json(const std::string& path);
void save_umdp_json(const Umdp& umdp, const std::string& path);

/// Policies serialize as {type:"stationary"|"option_plan", ...}; option plans
/// carry one {anchor, n, table:[[s,t,a],...], objective} entry per state.
struct LoadedPolicy {
    enum class Kind { stationary, option_plan } kind = Kind::stationary;
    StationaryPolicy policy;
    OptionPlan plan;
};

std::string policy_to_json_string(const StationaryPolicy& policy);
std::string plan_to_json_string(const OptionPlan& plan, int num_states);
LoadedPolicy policy_from_json_string(const std::string& text);
LoadedPolicy load_policy_json(const std::string& path);
void save_policy_json(const StationaryPolicy& policy, const std::string& path);
void save_plan_json(const OptionPlan& plan, int num_states, const std::string& path);

}  // namespace rumdp
