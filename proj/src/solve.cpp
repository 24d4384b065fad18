#include "rumdp/solve.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace rumdp {

namespace {

// backward reachability: states from which some state in `targets` can be
// reached following the given successor lists
std::vector<char> backward_reachable(int num_states, const std::vector<StateId>& targets,
                                     const std::vector<std::vector<StateId>>& predecessors) {
    std::vector<char> seen(num_states, 0);
    std::deque<StateId> queue;
    for (StateId g : targets) {
        if (!seen[g]) {
            seen[g] = 1;
            queue.push_back(g);
        }
    }
    while (!queue.empty()) {
        StateId s = queue.front();
        queue.pop_front();
        for (StateId p : predecessors[s]) {
            if (!seen[p]) {
                seen[p] = 1;
                queue.push_back(p);
            }
        }
    }
    return seen;
}

std::vector<std::vector<StateId>> predecessors_all_actions(const MdpSample& sample) {
    std::vector<std::vector<StateId>> preds(sample.num_states());
    for (StateId s = 0; s < sample.num_states(); ++s)
        for (ActionId a = 0; a < sample.num_actions(); ++a)
            for (const TransitionEntry& e : sample.row(s, a))
                if (e.prob > 0.0) preds[e.next].push_back(s);
    return preds;
}

// shared fixed-point iteration for the policy-weighted backups used by policy
// evaluation, the regret recursion and CEMR. `stage_cost(s, a)` supplies the
// per-action stage term.
template <typename StageCost>
ValueTable policy_fixed_point(const Umdp& umdp, const MdpSample& sample,
                              const StationaryPolicy& policy, StageCost stage_cost,
                              const SolveParams& params, const char* what) {
    const std::vector<char> goal = umdp.goal_mask();
    ValueTable values(umdp.num_states, 0.0);
    double window_best = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    StateId worst = 0;
    for (long iter = 0; iter < params.max_iter; ++iter) {
        residual = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            double v = 0.0;
            for (const auto& [a, p] : policy.row(s)) {
                if (p == 0.0) continue;
                if (!sample.has_action(s, a))
                    throw ModelError(std::string(what) + ": policy uses unavailable action " +
                                     std::to_string(a) + " at state " + std::to_string(s));
                double backup = stage_cost(s, a);
                for (const TransitionEntry& e : sample.row(s, a)) backup += e.prob * values[e.next];
                v += p * backup;
            }
            double diff = std::abs(v - values[s]);
            if (diff > residual) {
                residual = diff;
                worst = s;
            }
            values[s] = v;
        }
        if (residual < params.tol) return values;
        if ((iter + 1) % params.stall_window == 0) {
            if (residual >= window_best)
                throw ConvergenceError(std::string(what) + ": no contraction over " +
                                           std::to_string(params.stall_window) +
                                           " iterations, worst residual " +
                                           std::to_string(residual) + " at state " +
                                           std::to_string(worst) + " (improper policy?)",
                                       worst, residual);
            window_best = residual;
        }
    }
    throw ConvergenceError(std::string(what) + ": not converged after " +
                               std::to_string(params.max_iter) + " iterations, residual " +
                               std::to_string(residual) + " at state " + std::to_string(worst),
                           worst, residual);
}

}  // namespace

std::vector<std::string> validate_umdp(const Umdp& umdp) {
    std::vector<std::string> issues;
    auto complain = [&issues](std::string msg) { issues.push_back(std::move(msg)); };

    if (umdp.num_states <= 0) complain("no states");
    if (umdp.num_actions <= 0) complain("no actions");
    if (umdp.goals.empty()) complain("goal set is empty");
    if (umdp.initial < 0 || umdp.initial >= umdp.num_states)
        complain("initial state " + std::to_string(umdp.initial) + " out of range");
    for (StateId g : umdp.goals)
        if (g < 0 || g >= umdp.num_states)
            complain("goal state " + std::to_string(g) + " out of range");
    if (umdp.samples.empty()) complain("sample set is empty");
    if (!issues.empty()) return issues;

    const std::vector<char> goal = umdp.goal_mask();
    for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
        const MdpSample& sample = umdp.samples[q];
        const std::string tag = "sample " + std::to_string(q);
        if (sample.num_states() != umdp.num_states || sample.num_actions() != umdp.num_actions) {
            complain(tag + ": state/action space mismatch");
            continue;
        }
        for (StateId s = 0; s < umdp.num_states; ++s) {
            bool any_action = false;
            for (ActionId a = 0; a < umdp.num_actions; ++a) {
                const TransitionRow& row = sample.row(s, a);
                if (row.empty()) continue;
                any_action = true;
                double mass = 0.0;
                for (const TransitionEntry& e : row) {
                    if (e.next < 0 || e.next >= umdp.num_states)
                        complain(tag + ": successor " + std::to_string(e.next) +
                                 " out of range at (" + std::to_string(s) + "," +
                                 std::to_string(a) + ")");
                    if (e.prob < 0.0 || e.prob > 1.0)
                        complain(tag + ": probability " + std::to_string(e.prob) +
                                 " outside [0,1] at (" + std::to_string(s) + "," +
                                 std::to_string(a) + ")");
                    if (!std::isfinite(e.cost))
                        complain(tag + ": non-finite cost at (" + std::to_string(s) + "," +
                                 std::to_string(a) + ")");
                    else if (e.cost < 0.0)
                        complain(tag + ": negative cost " + std::to_string(e.cost) + " at (" +
                                 std::to_string(s) + "," + std::to_string(a) + ")");
                    mass += e.prob;
                }
                if (std::abs(mass - 1.0) > 1e-9)
                    complain(tag + ": distribution mass " + std::to_string(mass) + " at (" +
                             std::to_string(s) + "," + std::to_string(a) + ")");
                if (goal[s]) {
                    bool absorbing = row.size() == 1 && row.front().next == s &&
                                     std::abs(row.front().prob - 1.0) <= 1e-9 &&
                                     row.front().cost == 0.0;
                    if (!absorbing)
                        complain(tag + ": goal state " + std::to_string(s) +
                                 " is not absorbing with zero cost under action " +
                                 std::to_string(a));
                }
            }
            if (!any_action) complain(tag + ": state " + std::to_string(s) + " has no actions");
        }
        // availability must agree across samples so policies transfer
        if (q > 0) {
            const MdpSample& first = umdp.samples[0];
            for (StateId s = 0; s < umdp.num_states; ++s)
                for (ActionId a = 0; a < umdp.num_actions; ++a)
                    if (first.has_action(s, a) != sample.has_action(s, a))
                        complain(tag + ": action availability differs from sample 0 at (" +
                                 std::to_string(s) + "," + std::to_string(a) + ")");
        }
        // diagnostic: goals reachable from every state under some action sequence
        const auto reach = backward_reachable(umdp.num_states, umdp.goals,
                                              predecessors_all_actions(sample));
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (!reach[s]) {
                complain("no proper policy in sample " + std::to_string(q) +
                         ": goal unreachable from state " + std::to_string(s));
                break;
            }
        }
    }
    return issues;
}

OptimalSolution optimal_values(const Umdp& umdp, const MdpSample& sample,
                               const SolveParams& params) {
    const std::vector<char> goal = umdp.goal_mask();
    OptimalSolution sol;
    sol.values.assign(umdp.num_states, 0.0);
    sol.policy = StationaryPolicy(umdp.num_states);

    // expected costs are reused every sweep
    std::vector<std::vector<std::pair<ActionId, double>>> costs(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s)
        for (ActionId a = 0; a < umdp.num_actions; ++a)
            if (sample.has_action(s, a)) costs[s].push_back({a, sample.expected_cost(s, a)});

    double window_best = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    StateId worst = 0;
    for (long iter = 0; iter < params.max_iter; ++iter) {
        residual = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            if (costs[s].empty())
                throw ModelError("optimal_values: state " + std::to_string(s) + " has no actions");
            double best = std::numeric_limits<double>::infinity();
            for (const auto& [a, c] : costs[s]) {
                double backup = c;
                for (const TransitionEntry& e : sample.row(s, a))
                    backup += e.prob * sol.values[e.next];
                if (backup < best) best = backup;
            }
            double diff = std::abs(best - sol.values[s]);
            if (diff > residual) {
                residual = diff;
                worst = s;
            }
            sol.values[s] = best;
        }
        ++sol.iterations;
        if (residual < params.tol) break;
        if ((iter + 1) % params.stall_window == 0) {
            if (residual >= window_best)
                throw ConvergenceError(
                    "optimal_values: no contraction over " + std::to_string(params.stall_window) +
                        " iterations, worst residual " + std::to_string(residual) + " at state " +
                        std::to_string(worst) + " (improper model or dead end?)",
                    worst, residual);
            window_best = residual;
        }
        if (iter + 1 == params.max_iter)
            throw ConvergenceError("optimal_values: not converged after " +
                                       std::to_string(params.max_iter) + " iterations at state " +
                                       std::to_string(worst),
                                   worst, residual);
    }

    // greedy extraction, lowest action index wins ties for reproducibility
    for (StateId s = 0; s < umdp.num_states; ++s) {
        if (goal[s]) {
            sol.policy.set_action(s, sample.actions_at(s).front());
            continue;
        }
        ActionId best_a = -1;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [a, c] : costs[s]) {
            double backup = c;
            for (const TransitionEntry& e : sample.row(s, a)) backup += e.prob * sol.values[e.next];
            if (backup < best - 1e-12) {
                best = backup;
                best_a = a;
            }
        }
        sol.policy.set_action(s, best_a);
    }
    return sol;
}

ValueTable evaluate_policy(const Umdp& umdp, const MdpSample& sample,
                           const StationaryPolicy& policy, const SolveParams& params) {
    return policy_fixed_point(
        umdp, sample, policy, [&](StateId s, ActionId a) { return sample.expected_cost(s, a); },
        params, "evaluate_policy");
}

bool check_proper(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy) {
    std::vector<std::vector<StateId>> preds(umdp.num_states);
    const std::vector<char> goal = umdp.goal_mask();
    for (StateId s = 0; s < umdp.num_states; ++s) {
        if (goal[s]) continue;
        for (const auto& [a, p] : policy.row(s)) {
            if (p <= 0.0) continue;
            if (!sample.has_action(s, a)) return false;
            for (const TransitionEntry& e : sample.row(s, a))
                if (e.prob > 0.0) preds[e.next].push_back(s);
        }
    }
    const auto reach = backward_reachable(umdp.num_states, umdp.goals, preds);
    for (StateId s = 0; s < umdp.num_states; ++s)
        if (!reach[s]) return false;
    return true;
}

double q_gap(const MdpSample& sample, const ValueTable& optimal, StateId s, ActionId a) {
    double backup = sample.expected_cost(s, a);
    for (const TransitionEntry& e : sample.row(s, a)) backup += e.prob * optimal[e.next];
    return backup - optimal[s];
}

double regret_direct(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy,
                     const SolveParams& params) {
    const ValueTable v_policy = evaluate_policy(umdp, sample, policy, params);
    const OptimalSolution best = optimal_values(umdp, sample, params);
    return v_policy[umdp.initial] - best.values[umdp.initial];
}

ValueTable regret_bellman_eval(const Umdp& umdp, const MdpSample& sample,
                               const StationaryPolicy& policy, const ValueTable& optimal,
                               const SolveParams& params) {
    return policy_fixed_point(
        umdp, sample, policy,
        [&](StateId s, ActionId a) { return q_gap(sample, optimal, s, a); }, params,
        "regret_bellman_eval");
}

ValueTable cemr_eval(const Umdp& umdp, const MdpSample& sample, const StationaryPolicy& policy,
                     const SolveParams& params) {
    std::vector<double> best_cost(umdp.num_states, 0.0);
    for (StateId s = 0; s < umdp.num_states; ++s) best_cost[s] = sample.best_expected_cost(s);
    return policy_fixed_point(
        umdp, sample, policy,
        [&](StateId s, ActionId a) { return sample.expected_cost(s, a) - best_cost[s]; }, params,
        "cemr_eval");
}

ValueTable expected_hitting_times(const Umdp& umdp, const MdpSample& sample,
                                  const StationaryPolicy& policy) {
    const std::vector<char> goal = umdp.goal_mask();
    std::vector<StateId> free_states;
    std::vector<int> dense(umdp.num_states, -1);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        if (!goal[s]) {
            dense[s] = static_cast<int>(free_states.size());
            free_states.push_back(s);
        }
    }
    const int n = static_cast<int>(free_states.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
        StateId s = free_states[i];
        for (const auto& [a, p] : policy.row(s)) {
            if (p <= 0.0) continue;
            for (const TransitionEntry& e : sample.row(s, a))
                if (dense[e.next] >= 0) system(i, dense[e.next]) -= p * e.prob;
        }
    }
    Eigen::VectorXd h = system.partialPivLu().solve(ones);
    ValueTable result(umdp.num_states, 0.0);
    for (int i = 0; i < n; ++i) result[free_states[i]] = h(i);
    return result;
}

}  // namespace rumdp
