#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include "rumdp/options.hpp"
#include "rumdp/solve.hpp"
#include "rumdp/types.hpp"

namespace rumdp {

struct PlannerConfig {
    double epsilon = 1e-6;  // sweep convergence threshold on the value table
    double kappa = 1e-4;    // perturbation added to each option backup
    int max_sweeps = 10000;
    long node_budget = 10000000;
    int threads = 1;
    bool record_sweeps = false;  // keep a copy of the value table per sweep
    SolveParams vi;              // per-sample value iteration parameters
    std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Output of the minimax value iteration planners: one option per non-goal
/// state plus the converged value table (regret scale, or CEMR scale for the
/// CEMR planner).
struct OptionPlan {
    int horizon = 1;
    BackupKind kind = BackupKind::regret;
    double kappa = 0.0;
    std::vector<OptionPolicy> options;  // indexed by anchor state, empty at goals
    ValueTable reg;
    int sweeps = 0;
    bool converged = false;
    bool policy_stable = false;            // no option choice changed in the final sweep
    std::vector<ValueTable> sweep_values;  // only with PlannerConfig::record_sweeps
};

/// Optimal values of every sample, fanned out over `threads` workers.
std::vector<ValueTable> optimal_values_all(const Umdp& umdp, const SolveParams& params = {},
                                           int threads = 1);

/// Minimax value iteration over n-step options: per-sample optimal values are
/// precomputed, values start at zero and states are swept in ascending order
/// with in-place updates until the largest change drops below epsilon. The
/// returned table is then re-evaluated to a tight fixed point under the
/// chosen options so it is Bellman-consistent with the returned plan.
OptionPlan minimax_regret_vi(const Umdp& umdp, int n, const PlannerConfig& cfg = {});

/// Same sweep with the CEMR local gap in place of the Q-gap; the plan's value
/// table stores CEMR values.
OptionPlan cemr_minimax_vi(const Umdp& umdp, int n, const PlannerConfig& cfg = {});

/// Uncertainty given independently per (state, action): a finite menu of
/// (cost, distribution) alternatives for each pair.
struct FactoredUmdp {
    int num_states = 0;
    int num_actions = 0;
    StateId initial = 0;
    std::vector<StateId> goals;
    // menus[s][a]: alternative transition rows; empty = action unavailable
    std::vector<std::vector<std::vector<TransitionRow>>> menus;

    std::size_t product_size() const;
    /// All combinations of menu choices as concrete samples. Throws
    /// ModelError when there are more than `max_samples` combinations.
    Umdp to_product_umdp(std::size_t max_samples = 1 << 16) const;
};

/// Exact minimax regret for independent uncertainties. The menus are
/// expanded into their product sample set and the deterministic stationary
/// policies are searched exactly (branch and bound with per-sample optimal
/// completion bounds); the result is packaged as a one-step option plan
/// whose value table holds the policy's per-state worst-case regret.
OptionPlan exact_independent_minimax_regret(const FactoredUmdp& factored,
                                            const PlannerConfig& cfg = {});

struct RobustSolution {
    StationaryPolicy policy;
    ValueTable values;
    int sweeps = 0;
};

/// Minimax value iteration on expected cost: the adversary picks the worst
/// sample at every step.
RobustSolution robust_vi(const Umdp& umdp, const PlannerConfig& cfg = {});

/// Optimal policy of the arithmetic-mean MDP (uniform weights over samples,
/// probability-weighted mean costs, rows renormalized).
StationaryPolicy averaged_mdp_policy(const Umdp& umdp, const PlannerConfig& cfg = {});

/// The averaged MDP itself, exposed for inspection and tests.
MdpSample averaged_sample(const Umdp& umdp);

struct BestSampleResult {
    StationaryPolicy policy;
    double max_regret = 0.0;
    std::size_t sample_index = 0;
};

/// Evaluates each sample's optimal policy across all samples and returns the
/// candidate with the lowest maximum regret (ties to the lower sample index).
/// Candidates improper in some sample are skipped.
BestSampleResult best_sample_policy(const Umdp& umdp, const PlannerConfig& cfg = {});

}  // namespace rumdp
