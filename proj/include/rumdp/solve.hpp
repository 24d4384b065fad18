#pragma once

#include <string>
#include <vector>

#include "rumdp/types.hpp"

namespace rumdp {

struct SolveParams {
    double tol = 1e-8;
    long max_iter = 100000;
    // divergence is declared when the residual fails to shrink over this many
    // iterations (improper policies make SSP values grow without bound)
    long stall_window = 1000;
};

struct OptimalSolution {
    ValueTable values;
    StationaryPolicy policy;  // deterministic greedy, lowest action index on ties
    long iterations = 0;
};

/// Structural validation of a UMDP. Returns a list of human-readable
/// violations (empty means valid). Also reports, per sample, whether the goal
/// set is reachable from every state under some action sequence.
std::vector<std::string> validate_umdp(const Umdp& umdp);

/// Optimal values and greedy policy of a single sample via value iteration.
/// Throws ConvergenceError naming the worst-residual state when the residual
/// stalls (improper model or dead end).
OptimalSolution optimal_values(const Umdp& umdp, const MdpSample& sample,
                               const SolveParams& params = {});

/// Fixed point of the policy evaluation Bellman equation; zero at goals.
ValueTable evaluate_policy(const Umdp& umdp, const MdpSample& sample,
                           const StationaryPolicy& policy, const SolveParams& params = {});

/// True iff the goal set is reached with probability 1 from every state under
/// the policy (every state reaches a goal in the support graph of the policy).
bool check_proper(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy);

/// Suboptimality attributed to applying `a` in `s` against the converged
/// optimal values of the sample.
double q_gap(const MdpSample& sample, const ValueTable& optimal, StateId s, ActionId a);

/// Regret at the initial state computed directly from the definition:
/// value of the policy minus the optimal value.
double regret_direct(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy,
                     const SolveParams& params = {});

/// Regret of a proper policy at every state via the regret Bellman recursion
/// over Q-gaps; zero at goals.
ValueTable regret_bellman_eval(const Umdp& umdp, const MdpSample& sample,
                               const StationaryPolicy& policy, const ValueTable& optimal,
                               const SolveParams& params = {});

/// Cumulative expected myopic regret of a policy: accumulates the local gap
/// between the action's expected cost and the best expected cost at the state.
ValueTable cemr_eval(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy,
                     const SolveParams& params = {});

/// Expected steps to reach the goal set from every state under the policy,
/// via a dense linear solve of the hitting-time equations.
ValueTable expected_hitting_times(const Umdp& umdp, const MdpSample& sample,
                                  const StationaryPolicy& policy);

}  // namespace rumdp
