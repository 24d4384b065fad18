#pragma once

#include <vector>

#include "rumdp/planners.hpp"
#include "rumdp/solve.hpp"
#include "rumdp/types.hpp"

namespace rumdp {

/// What to do when plan execution reaches a (state, step) the option table
/// does not cover, which can happen on held-out samples whose transition
/// support differs from the training set: raise a CoverageError, or end the
/// option early and re-anchor at the uncovered state.
enum class OffTablePolicy { error, reanchor };

/// Exact expected cost at the initial state of executing an option plan in
/// one sample: within an option the anchor's table is followed; after n steps
/// or at a goal the plan's option for the current state takes over.
double evaluate_option_plan(const Umdp& umdp, const OptionPlan& plan, const MdpSample& sample,
                            const SolveParams& params = {},
                            OffTablePolicy off_table = OffTablePolicy::error);

struct MaxRegretResult {
    double value = 0.0;  // infinite if the policy is improper in some sample
    std::size_t worst_sample = 0;
    std::vector<double> per_sample;
};

MaxRegretResult max_regret(const Umdp& umdp, const std::vector<MdpSample>& samples,
                           const StationaryPolicy& policy, const SolveParams& params = {});

MaxRegretResult max_regret(const Umdp& umdp, const std::vector<MdpSample>& samples,
                           const OptionPlan& plan, const SolveParams& params = {},
                           OffTablePolicy off_table = OffTablePolicy::error);

/// Value of the game where the policy is fixed and the adversary picks the
/// worst sample every n steps. No perturbation is added.
double adversary_value(const Umdp& umdp, const StationaryPolicy& policy, int n,
                       const SolveParams& params = {});

double adversary_value(const Umdp& umdp, const OptionPlan& plan,
                       const SolveParams& params = {});

/// Tight cross-sample disparity constants for a policy, with the sample pair
/// achieving each maximum.
struct BoundConstants {
    double delta_cost = 0.0;        // expected one-step cost disparity
    double delta_transition = 0.0;  // half the L1 transition disparity
    double delta_optimal = 0.0;     // optimal value disparity
    double cost_max = 0.0;          // largest expected one-step cost
    double horizon = 0.0;           // upper bound on expected steps to goal
    std::pair<int, int> cost_witness{-1, -1};
    std::pair<int, int> transition_witness{-1, -1};
    std::pair<int, int> optimal_witness{-1, -1};
};

/// h_estimate = 0 means estimate the horizon as twice the worst per-sample
/// expected hitting time of the policy over all states.
BoundConstants bound_constants(const Umdp& umdp, const StationaryPolicy& policy,
                               double h_estimate = 0.0, const SolveParams& params = {});

/// Upper bound on how much the per-step adversary can exceed the worst fixed
/// sample's regret for the policy.
double adversary_gap_bound(const BoundConstants& bc);

/// One-sided Welch two-sample p-value for mean(xs) < mean(ys).
double welch_t_test(const std::vector<double>& xs, const std::vector<double>& ys);

/// Student-t CDF via the continued-fraction regularized incomplete beta.
double student_t_cdf(double t, double dof);

}  // namespace rumdp
