#include "rumdp/planners.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace rumdp {

namespace {

void check_deadline(const PlannerConfig& cfg, const char* what) {
    if (cfg.deadline && std::chrono::steady_clock::now() > *cfg.deadline)
        throw TimeoutError(std::string(what) + ": deadline exceeded");
}

OptionPlan minimax_options_vi(const Umdp& umdp, int n, const PlannerConfig& cfg,
                              BackupKind kind) {
    if (n < 1) throw ModelError("minimax VI: horizon must be >= 1");
    const std::vector<char> goal = umdp.goal_mask();
    const std::vector<ValueTable> vstar =
        kind == BackupKind::regret
            ? optimal_values_all(umdp, cfg.vi, cfg.threads)
            : std::vector<ValueTable>(umdp.samples.size(), ValueTable(umdp.num_states, 0.0));

    OptionOptimizer optimizer(umdp, n, vstar, kind, cfg.kappa, cfg.node_budget);

    OptionPlan plan;
    plan.horizon = n;
    plan.kind = kind;
    plan.kappa = cfg.kappa;
    plan.reg.assign(umdp.num_states, 0.0);
    plan.options.resize(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        plan.options[s].anchor = s;
        plan.options[s].horizon = n;
    }

    double delta = 0.0;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        check_deadline(cfg, "minimax VI");
        delta = 0.0;
        bool changed = false;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            const OptionPolicy* hint = plan.options[s].table.empty() ? nullptr : &plan.options[s];
            InnerSolution sol = optimizer.solve(s, plan.reg, hint);
            const double value = std::max(sol.objective, 0.0);
            delta = std::max(delta, std::abs(value - plan.reg[s]));
            if (sol.policy.table != plan.options[s].table) changed = true;
            plan.reg[s] = value;
            plan.options[s] = std::move(sol.policy);
        }
        ++plan.sweeps;
        if (cfg.record_sweeps) plan.sweep_values.push_back(plan.reg);
        if (delta < cfg.epsilon) {
            plan.converged = true;
            plan.policy_stable = !changed;
            break;
        }
    }
    if (!plan.converged)
        throw ConvergenceError("minimax VI: not converged after " +
                                   std::to_string(plan.sweeps) + " sweeps, delta " +
                                   std::to_string(delta),
                               umdp.initial, delta);

    // evaluate the chosen options to a tight fixed point so the reported
    // values satisfy the option-level Bellman equation for this exact plan
    const double polish_tol = std::min(cfg.epsilon, 1e-12);
    for (long iter = 0; iter < cfg.vi.max_iter; ++iter) {
        check_deadline(cfg, "minimax VI");
        double residual = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            const double v =
                std::max(0.0, optimizer.evaluate(s, plan.options[s], plan.reg));
            residual = std::max(residual, std::abs(v - plan.reg[s]));
            plan.reg[s] = v;
        }
        if (residual < polish_tol) break;
    }
    return plan;
}

}  // namespace

std::vector<ValueTable> optimal_values_all(const Umdp& umdp, const SolveParams& params,
                                           int threads) {
    std::vector<ValueTable> tables(umdp.samples.size());
    if (threads <= 1 || umdp.samples.size() <= 1) {
        for (std::size_t q = 0; q < umdp.samples.size(); ++q)
            tables[q] = optimal_values(umdp, umdp.samples[q], params).values;
        return tables;
    }
    std::vector<std::thread> workers;
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const int count = std::min<int>(threads, static_cast<int>(umdp.samples.size()));
    for (int w = 0; w < count; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t q = cursor.fetch_add(1);
                if (q >= umdp.samples.size()) return;
                try {
                    tables[q] = optimal_values(umdp, umdp.samples[q], params).values;
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
    return tables;
}

OptionPlan minimax_regret_vi(const Umdp& umdp, int n, const PlannerConfig& cfg) {
    return minimax_options_vi(umdp, n, cfg, BackupKind::regret);
}

OptionPlan cemr_minimax_vi(const Umdp& umdp, int n, const PlannerConfig& cfg) {
    return minimax_options_vi(umdp, n, cfg, BackupKind::cemr);
}

std::size_t FactoredUmdp::product_size() const {
    std::size_t total = 1;
    for (const auto& per_state : menus)
        for (const auto& menu : per_state) {
            if (menu.empty()) continue;
            if (total > (std::size_t(1) << 48) / menu.size())
                return std::numeric_limits<std::size_t>::max();
            total *= menu.size();
        }
    return total;
}

Umdp FactoredUmdp::to_product_umdp(std::size_t max_samples) const {
    const std::size_t total = product_size();
    if (total > max_samples)
        throw ModelError("factored UMDP expands to " + std::to_string(total) +
                         " samples, above the cap of " + std::to_string(max_samples));

    // pairs with a real choice, in (state, action) order; the last pair
    // cycles fastest
    std::vector<std::pair<StateId, ActionId>> choice_pairs;
    for (StateId s = 0; s < num_states; ++s)
        for (ActionId a = 0; a < num_actions; ++a)
            if (menus[s][a].size() > 1) choice_pairs.push_back({s, a});

    Umdp umdp;
    umdp.num_states = num_states;
    umdp.num_actions = num_actions;
    umdp.initial = initial;
    umdp.goals = goals;

    std::vector<std::size_t> odometer(choice_pairs.size(), 0);
    for (std::size_t index = 0; index < total; ++index) {
        MdpSample sample(num_states, num_actions);
        std::size_t pair = 0;
        for (StateId s = 0; s < num_states; ++s) {
            for (ActionId a = 0; a < num_actions; ++a) {
                const auto& menu = menus[s][a];
                if (menu.empty()) continue;
                std::size_t pick = 0;
                if (menu.size() > 1) pick = odometer[pair++];
                sample.set_row(s, a, menu[pick]);
            }
        }
        umdp.samples.push_back(std::move(sample));
        for (std::size_t k = odometer.size(); k-- > 0;) {
            if (++odometer[k] < menus[choice_pairs[k].first][choice_pairs[k].second].size())
                break;
            odometer[k] = 0;
        }
    }
    return umdp;
}

namespace {

// optimal value at the initial state when the assigned states are pinned to
// their actions and the rest minimize freely; a lower bound on any
// completion's value
double constrained_optimal_value(const Umdp& umdp, const MdpSample& sample,
                                 const std::vector<ActionId>& assigned,
                                 const SolveParams& params) {
    const std::vector<char> goal = umdp.goal_mask();
    ValueTable values(umdp.num_states, 0.0);
    double window_best = std::numeric_limits<double>::infinity();
    for (long iter = 0; iter < params.max_iter; ++iter) {
        double residual = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            double best = std::numeric_limits<double>::infinity();
            for (ActionId a = 0; a < umdp.num_actions; ++a) {
                if (!sample.has_action(s, a)) continue;
                if (assigned[s] >= 0 && assigned[s] != a) continue;
                double backup = sample.expected_cost(s, a);
                for (const TransitionEntry& e : sample.row(s, a))
                    backup += e.prob * values[e.next];
                best = std::min(best, backup);
            }
            residual = std::max(residual, std::abs(best - values[s]));
            values[s] = best;
        }
        if (residual < params.tol) return values[umdp.initial];
        if ((iter + 1) % params.stall_window == 0) {
            if (residual >= window_best)
                throw ConvergenceError("constrained evaluation diverged", umdp.initial,
                                       residual);
            window_best = residual;
        }
    }
    throw ConvergenceError("constrained evaluation not converged", umdp.initial, 0.0);
}

}  // namespace

OptionPlan exact_independent_minimax_regret(const FactoredUmdp& factored,
                                            const PlannerConfig& cfg) {
    // The n=1 game of the options planner strictly over-approximates the
    // product-set regret because its per-step worst case may combine
    // different samples' optimal-value landscapes across states. Exactness
    // here instead comes from searching the deterministic stationary
    // policies directly: depth-first over states in ascending order with an
    // admissible bound from per-sample optimal completions.
    const Umdp umdp = factored.to_product_umdp();
    const std::vector<char> goal = umdp.goal_mask();
    const std::vector<ValueTable> vstar = optimal_values_all(umdp, cfg.vi, cfg.threads);

    std::vector<StateId> slots;
    for (StateId s = 0; s < umdp.num_states; ++s)
        if (!goal[s]) slots.push_back(s);

    std::vector<ActionId> assigned(umdp.num_states, -1);
    auto bound = [&](void) {
        double worst = 0.0;
        for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
            double value;
            try {
                value = constrained_optimal_value(umdp, umdp.samples[q], assigned, cfg.vi);
            } catch (const ConvergenceError&) {
                return std::numeric_limits<double>::infinity();
            }
            worst = std::max(worst, value - vstar[q][umdp.initial]);
        }
        return worst;
    };

    double best = std::numeric_limits<double>::infinity();
    bool recorded = false;
    std::vector<ActionId> best_choice;
    long nodes = 0;

    auto dfs = [&](auto&& self, std::size_t k) -> void {
        if (++nodes > cfg.node_budget)
            throw SearchBudgetError("independent minimax regret search exceeded its node budget",
                                    best);
        check_deadline(cfg, "independent minimax regret");
        const double lb = bound();
        if (recorded ? lb >= best : lb > best) return;
        if (k == slots.size()) {
            if (lb < best || !recorded) {
                best = lb;
                best_choice = assigned;
                recorded = true;
            }
            return;
        }
        for (ActionId a : umdp.samples[0].actions_at(slots[k])) {
            assigned[slots[k]] = a;
            self(self, k + 1);
        }
        assigned[slots[k]] = -1;
    };
    dfs(dfs, 0);

    // package the stationary policy as a one-step option plan with the
    // policy's per-state worst-case regret as its value table
    OptionPlan plan;
    plan.horizon = 1;
    plan.kind = BackupKind::regret;
    plan.kappa = 0.0;
    plan.converged = true;
    plan.sweeps = 0;
    plan.policy_stable = true;
    plan.reg.assign(umdp.num_states, 0.0);
    plan.options.resize(umdp.num_states);
    std::vector<ActionId> full_choice(umdp.num_states, 0);
    for (StateId s = 0; s < umdp.num_states; ++s)
        full_choice[s] = goal[s] ? umdp.samples[0].actions_at(s).front() : best_choice[s];
    const StationaryPolicy policy = StationaryPolicy::deterministic(full_choice);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        plan.options[s].anchor = s;
        plan.options[s].horizon = 1;
        if (!goal[s])
            plan.options[s].table[OptionPolicy::key(0, s, umdp.num_states)] = best_choice[s];
    }
    for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
        const ValueTable values = evaluate_policy(umdp, umdp.samples[q], policy, cfg.vi);
        for (StateId s = 0; s < umdp.num_states; ++s)
            plan.reg[s] = std::max(plan.reg[s], values[s] - vstar[q][s]);
    }
    return plan;
}

RobustSolution robust_vi(const Umdp& umdp, const PlannerConfig& cfg) {
    const std::vector<char> goal = umdp.goal_mask();
    RobustSolution sol;
    sol.values.assign(umdp.num_states, 0.0);
    sol.policy = StationaryPolicy(umdp.num_states);

    std::vector<std::vector<ActionId>> actions(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) actions[s] = umdp.samples[0].actions_at(s);

    auto worst_backup = [&](StateId s, ActionId a) {
        double worst = -std::numeric_limits<double>::infinity();
        for (const MdpSample& sample : umdp.samples) {
            double backup = sample.expected_cost(s, a);
            for (const TransitionEntry& e : sample.row(s, a))
                backup += e.prob * sol.values[e.next];
            worst = std::max(worst, backup);
        }
        return worst;
    };

    double window_best = std::numeric_limits<double>::infinity();
    double delta = 0.0;
    bool converged = false;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        check_deadline(cfg, "robust VI");
        delta = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            double best = std::numeric_limits<double>::infinity();
            for (ActionId a : actions[s]) best = std::min(best, worst_backup(s, a));
            delta = std::max(delta, std::abs(best - sol.values[s]));
            sol.values[s] = best;
        }
        ++sol.sweeps;
        if (delta < cfg.epsilon) {
            converged = true;
            break;
        }
        if ((sweep + 1) % 1000 == 0) {
            if (delta >= window_best)
                throw ConvergenceError(
                    "robust VI: no contraction (no policy proper under every adversary?)",
                    umdp.initial, delta);
            window_best = delta;
        }
    }
    if (!converged)
        throw ConvergenceError("robust VI: not converged after " + std::to_string(sol.sweeps) +
                                   " sweeps, delta " + std::to_string(delta),
                               umdp.initial, delta);

    for (StateId s = 0; s < umdp.num_states; ++s) {
        if (goal[s]) {
            sol.policy.set_action(s, actions[s].front());
            continue;
        }
        ActionId best_a = -1;
        double best = std::numeric_limits<double>::infinity();
        for (ActionId a : actions[s]) {
            const double backup = worst_backup(s, a);
            if (backup < best - 1e-12) {
                best = backup;
                best_a = a;
            }
        }
        sol.policy.set_action(s, best_a);
    }
    return sol;
}

MdpSample averaged_sample(const Umdp& umdp) {
    const double weight = 1.0 / static_cast<double>(umdp.samples.size());
    MdpSample avg(umdp.num_states, umdp.num_actions);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        for (ActionId a = 0; a < umdp.num_actions; ++a) {
            if (!umdp.samples[0].has_action(s, a)) continue;
            // mean probabilities; costs weighted by the probability mass that
            // carries them, which preserves the mean expected cost
            std::map<StateId, std::pair<double, double>> acc;  // next -> (prob, prob*cost)
            for (const MdpSample& sample : umdp.samples) {
                for (const TransitionEntry& e : sample.row(s, a)) {
                    acc[e.next].first += weight * e.prob;
                    acc[e.next].second += weight * e.prob * e.cost;
                }
            }
            double mass = 0.0;
            for (const auto& [next, pc] : acc) mass += pc.first;
            TransitionRow row;
            for (const auto& [next, pc] : acc) {
                if (pc.first <= 0.0) continue;
                row.push_back({next, pc.first / mass, pc.second / pc.first});
            }
            avg.set_row(s, a, std::move(row));
        }
    }
    return avg;
}

StationaryPolicy averaged_mdp_policy(const Umdp& umdp, const PlannerConfig& cfg) {
    Umdp averaged;
    averaged.num_states = umdp.num_states;
    averaged.num_actions = umdp.num_actions;
    averaged.initial = umdp.initial;
    averaged.goals = umdp.goals;
    averaged.samples.push_back(averaged_sample(umdp));
    return optimal_values(averaged, averaged.samples[0], cfg.vi).policy;
}

BestSampleResult best_sample_policy(const Umdp& umdp, const PlannerConfig& cfg) {
    std::vector<StationaryPolicy> candidates;
    std::vector<ValueTable> vstar(umdp.samples.size());
    for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
        OptimalSolution sol = optimal_values(umdp, umdp.samples[q], cfg.vi);
        candidates.push_back(std::move(sol.policy));
        vstar[q] = std::move(sol.values);
    }

    BestSampleResult best;
    best.max_regret = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t q = 0; q < candidates.size(); ++q) {
        double worst = 0.0;
        bool proper_everywhere = true;
        for (std::size_t j = 0; j < umdp.samples.size(); ++j) {
            if (!check_proper(umdp, umdp.samples[j], candidates[q])) {
                proper_everywhere = false;
                break;
            }
            const ValueTable values = evaluate_policy(umdp, umdp.samples[j], candidates[q], cfg.vi);
            worst = std::max(worst, values[umdp.initial] - vstar[j][umdp.initial]);
        }
        if (!proper_everywhere) continue;
        if (worst < best.max_regret) {
            best.max_regret = worst;
            best.policy = candidates[q];
            best.sample_index = q;
            found = true;
        }
    }
    if (!found)
        throw ModelError("best_sample_policy: every candidate policy is improper in some sample");
    return best;
}

}  // namespace rumdp
