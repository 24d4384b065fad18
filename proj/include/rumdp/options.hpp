#pragma once

#include <memory>
#include <vector>

#include "rumdp/types.hpp"

namespace rumdp {

/// Per-sample sets of states reachable in exactly t steps from an anchor,
/// expanding over nonzero-probability transitions of any action. Goal states
/// stay in the sets but only expand to themselves.
struct ReachableSets {
    StateId anchor = 0;
    int horizon = 1;
    // per_sample[q][t] sorted ascending, t in [0, horizon)
    std::vector<std::vector<std::vector<StateId>>> per_sample;
    // union over samples per step, sorted ascending
    std::vector<std::vector<StateId>> unions;
};

ReachableSets reachable_sets(const Umdp& umdp, StateId anchor, int horizon);

/// Which stage gap an n-step backup accumulates: the Q-gap recursion that
/// reproduces true regret, or the myopic CEMR local gap.
enum class BackupKind { regret, cemr };

/// Result of evaluating a fixed option policy in one sample: the expected
/// n-step cost and the expected continuation term at the anchor.
struct OptionBackup {
    double expected_cost = 0.0;  // expected cost of the option's n steps
    double continuation = 0.0;   // expected terminal regret + optimal value
};

/// Exact n-step backward induction for a fixed option policy in one sample.
/// Entering a goal terminates the option: remaining steps cost nothing and
/// the continuation uses the zero goal values. Throws ModelError if the
/// option table misses a reachable non-goal state.
OptionBackup backward_induction(const Umdp& umdp, std::size_t sample_index,
                                const OptionPolicy& option, const ValueTable& regret_estimates,
                                const ValueTable& optimal);

/// The option viewed as a single action of the option-level MDP: its cost is
/// the regret attributed to running it for n steps, its transition row the
/// exact n-step state distribution (goals absorbing).
struct OptionModel {
    double cost = 0.0;
    std::vector<std::pair<StateId, double>> transition;  // sparse, sorted by state
};

OptionModel option_cost_and_transition(const Umdp& umdp, std::size_t sample_index,
                                       const OptionPolicy& option, const ValueTable& optimal);

struct InnerSolution {
    OptionPolicy policy;
    double objective = 0.0;  // minimax value including the kappa perturbation
    long nodes_expanded = 0;
};

/// Objective of a fully specified option policy: kappa plus the worst-case
/// over samples of its n-step backup against the current value estimates.
double option_policy_objective(const Umdp& umdp, const OptionPolicy& option,
                               const ValueTable& estimates,
                               const std::vector<ValueTable>& optimal_per_sample, BackupKind kind,
                               double kappa);

/// Repeated exact inner solves against evolving value estimates. Reachable
/// sets and transition indexing per anchor are built once and reused; the
/// object holds no other state, so distinct anchors may be solved from
/// separate instances in parallel against a frozen estimate snapshot.
class OptionOptimizer {
public:
    OptionOptimizer(const Umdp& umdp, int horizon,
                    const std::vector<ValueTable>& optimal_per_sample, BackupKind kind,
                    double kappa, long node_budget);
    ~OptionOptimizer();

    /// Deterministic option policy minimizing the worst-case regret
    /// contribution, exact by depth-first branch and bound over the (step,
    /// state) assignment slots. Ties resolve to the lexicographically
    /// smallest action table. An anchor in the goal set yields an empty
    /// policy with objective 0. Throws SearchBudgetError past the node
    /// budget, carrying the best incumbent objective.
    InnerSolution solve(StateId anchor, const ValueTable& estimates,
                        const OptionPolicy* hint = nullptr);

    /// Backup value of one fixed option against the estimates (kappa
    /// included), using the cached per-anchor model.
    double evaluate(StateId anchor, const OptionPolicy& option, const ValueTable& estimates);

    const ReachableSets& sets(StateId anchor);

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

/// One-shot wrapper around OptionOptimizer::solve.
InnerSolution optimize_option_deterministic(const Umdp& umdp, StateId anchor, int horizon,
                                            const ValueTable& estimates,
                                            const std::vector<ValueTable>& optimal_per_sample,
                                            double kappa, long node_budget = 10000000,
                                            BackupKind kind = BackupKind::regret,
                                            const OptionPolicy* hint = nullptr);

}  // namespace rumdp
