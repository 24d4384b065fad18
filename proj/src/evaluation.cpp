#include "rumdp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace rumdp {

namespace {

// execution state of a plan: (anchor whose option is running, current state,
// step within the option)
struct AugmentedId {
    StateId anchor;
    StateId state;
    int step;
};

double plan_value_in_sample(const Umdp& umdp, const OptionPlan& plan, const MdpSample& sample,
                            const SolveParams& params, OffTablePolicy off_table) {
    const std::vector<char> goal = umdp.goal_mask();
    if (goal[umdp.initial]) return 0.0;
    const int n = plan.horizon;

    auto key = [&](StateId anchor, StateId state, int step) {
        return (static_cast<std::int64_t>(anchor) * umdp.num_states + state) * n + step;
    };

    // resolve the action at an execution state, re-anchoring on table misses
    // when allowed
    auto resolve = [&](AugmentedId& id) -> ActionId {
        const OptionPolicy& option = plan.options[id.anchor];
        if (!option.covers(id.step, id.state, umdp.num_states)) {
            if (off_table == OffTablePolicy::error)
                throw CoverageError("plan does not cover state " + std::to_string(id.state) +
                                        " at step " + std::to_string(id.step) + " under anchor " +
                                        std::to_string(id.anchor),
                                    id.anchor, id.state, id.step);
            id.anchor = id.state;
            id.step = 0;
        }
        return plan.options[id.anchor].action(id.step, id.state, umdp.num_states);
    };

    // enumerate execution states reachable from the initial anchor and
    // freeze the chain's edges; goal successors are dropped (value zero)
    std::unordered_map<std::int64_t, int> index;
    std::vector<AugmentedId> nodes;
    std::vector<double> step_cost;
    std::vector<std::vector<std::pair<int, double>>> edges;
    AugmentedId start{umdp.initial, umdp.initial, 0};
    resolve(start);
    index[key(start.anchor, start.state, start.step)] = 0;
    nodes.push_back(start);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        AugmentedId id = nodes[i];
        const ActionId a = resolve(id);
        step_cost.push_back(sample.expected_cost(id.state, a));
        edges.emplace_back();
        for (const TransitionEntry& e : sample.row(id.state, a)) {
            if (e.prob <= 0.0 || goal[e.next]) continue;
            AugmentedId next = id.step + 1 < n ? AugmentedId{id.anchor, e.next, id.step + 1}
                                               : AugmentedId{e.next, e.next, 0};
            resolve(next);
            const std::int64_t k = key(next.anchor, next.state, next.step);
            auto [it, fresh] = index.emplace(k, static_cast<int>(nodes.size()));
            if (fresh) nodes.push_back(next);
            edges[i].push_back({it->second, e.prob});
        }
    }

    // value iteration over the augmented chain
    std::vector<double> values(nodes.size(), 0.0);
    double window_best = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    for (long iter = 0; iter < params.max_iter; ++iter) {
        residual = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            double v = step_cost[i];
            for (const auto& [j, p] : edges[i]) v += p * values[j];
            residual = std::max(residual, std::abs(v - values[i]));
            values[i] = v;
        }
        if (residual < params.tol) return values[0];
        if ((iter + 1) % params.stall_window == 0) {
            if (residual >= window_best)
                throw ConvergenceError("plan evaluation: no contraction (improper plan?)",
                                       nodes[0].state, residual);
            window_best = residual;
        }
    }
    throw ConvergenceError("plan evaluation: not converged", nodes[0].state, residual);
}

Umdp with_single_sample(const Umdp& umdp, const MdpSample& sample) {
    Umdp single;
    single.num_states = umdp.num_states;
    single.num_actions = umdp.num_actions;
    single.initial = umdp.initial;
    single.goals = umdp.goals;
    single.samples.push_back(sample);
    return single;
}

template <typename EvalValue>
MaxRegretResult max_regret_impl(const Umdp& umdp, const std::vector<MdpSample>& samples,
                                const SolveParams& params, EvalValue eval_value) {
    if (samples.empty()) throw ModelError("max_regret: empty sample list");
    MaxRegretResult result;
    result.value = -std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < samples.size(); ++q) {
        double regret;
        try {
            const Umdp single = with_single_sample(umdp, samples[q]);
            const double optimal =
                optimal_values(single, samples[q], params).values[umdp.initial];
            regret = eval_value(single, samples[q]) - optimal;
        } catch (const ConvergenceError&) {
            regret = std::numeric_limits<double>::infinity();
        } catch (const CoverageError&) {
            regret = std::numeric_limits<double>::infinity();
        }
        result.per_sample.push_back(regret);
        if (regret > result.value) {
            result.value = regret;
            result.worst_sample = q;
        }
    }
    return result;
}

}  // namespace

double evaluate_option_plan(const Umdp& umdp, const OptionPlan& plan, const MdpSample& sample,
                            const SolveParams& params, OffTablePolicy off_table) {
    return plan_value_in_sample(umdp, plan, sample, params, off_table);
}

MaxRegretResult max_regret(const Umdp& umdp, const std::vector<MdpSample>& samples,
                           const StationaryPolicy& policy, const SolveParams& params) {
    return max_regret_impl(umdp, samples, params,
                           [&](const Umdp& single, const MdpSample& sample) {
                               if (!check_proper(single, sample, policy))
                                   throw ConvergenceError("improper policy", single.initial, 0.0);
                               return evaluate_policy(single, sample, policy,
                                                      params)[single.initial];
                           });
}

MaxRegretResult max_regret(const Umdp& umdp, const std::vector<MdpSample>& samples,
                           const OptionPlan& plan, const SolveParams& params,
                           OffTablePolicy off_table) {
    return max_regret_impl(umdp, samples, params,
                           [&](const Umdp& single, const MdpSample& sample) {
                               return plan_value_in_sample(single, plan, sample, params,
                                                           off_table);
                           });
}

namespace {

OptionPlan plan_from_policy(const Umdp& umdp, const StationaryPolicy& policy, int n) {
    if (!policy.is_deterministic())
        throw ModelError("adversary_value: stationary policy must be deterministic");
    const std::vector<char> goal = umdp.goal_mask();
    OptionPlan plan;
    plan.horizon = n;
    plan.kappa = 0.0;
    plan.reg.assign(umdp.num_states, 0.0);
    plan.options.resize(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        plan.options[s].anchor = s;
        plan.options[s].horizon = n;
        if (goal[s]) continue;
        const ReachableSets sets = reachable_sets(umdp, s, n);
        for (int t = 0; t < n; ++t)
            for (StateId state : sets.unions[t])
                if (!goal[state])
                    plan.options[s].table[OptionPolicy::key(t, state, umdp.num_states)] =
                        policy.action_at(state);
    }
    return plan;
}

double adversary_fixed_point(const Umdp& umdp, const OptionPlan& plan, double kappa,
                             const SolveParams& params) {
    const std::vector<char> goal = umdp.goal_mask();
    const std::vector<ValueTable> vstar = optimal_values_all(umdp, params);

    // per anchor and sample: the option's regret cost and n-step transition row
    std::vector<std::vector<OptionModel>> models(umdp.num_states);
    for (StateId s = 0; s < umdp.num_states; ++s) {
        if (goal[s]) continue;
        for (std::size_t q = 0; q < umdp.samples.size(); ++q)
            models[s].push_back(option_cost_and_transition(umdp, q, plan.options[s], vstar[q]));
    }

    ValueTable values(umdp.num_states, 0.0);
    double window_best = std::numeric_limits<double>::infinity();
    double residual = 0.0;
    for (long iter = 0; iter < params.max_iter; ++iter) {
        residual = 0.0;
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            double worst = -std::numeric_limits<double>::infinity();
            for (const OptionModel& m : models[s]) {
                double v = m.cost + kappa;
                for (const auto& [next, p] : m.transition) v += p * values[next];
                worst = std::max(worst, v);
            }
            residual = std::max(residual, std::abs(worst - values[s]));
            values[s] = worst;
        }
        if (residual < params.tol) return values[umdp.initial];
        if ((iter + 1) % params.stall_window == 0) {
            if (residual >= window_best)
                throw ConvergenceError("adversary value: no contraction (improper under some "
                                       "adversary behaviour?)",
                                       umdp.initial, residual);
            window_best = residual;
        }
    }
    throw ConvergenceError("adversary value: not converged", umdp.initial, residual);
}

}  // namespace

double adversary_value(const Umdp& umdp, const StationaryPolicy& policy, int n,
                       const SolveParams& params) {
    return adversary_fixed_point(umdp, plan_from_policy(umdp, policy, n), 0.0, params);
}

double adversary_value(const Umdp& umdp, const OptionPlan& plan, const SolveParams& params) {
    return adversary_fixed_point(umdp, plan, 0.0, params);
}

BoundConstants bound_constants(const Umdp& umdp, const StationaryPolicy& policy,
                               double h_estimate, const SolveParams& params) {
    BoundConstants bc;
    const std::vector<char> goal = umdp.goal_mask();
    const std::size_t count = umdp.samples.size();
    const std::vector<ValueTable> vstar = optimal_values_all(umdp, params);

    for (std::size_t i = 0; i < count; ++i) {
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;
            for (ActionId a = 0; a < umdp.num_actions; ++a) {
                if (!umdp.samples[i].has_action(s, a)) continue;
                bc.cost_max = std::max(bc.cost_max, umdp.samples[i].expected_cost(s, a));
            }
        }
        for (std::size_t j = i + 1; j < count; ++j) {
            for (StateId s = 0; s < umdp.num_states; ++s) {
                const double dv = std::abs(vstar[i][s] - vstar[j][s]);
                if (dv > bc.delta_optimal) {
                    bc.delta_optimal = dv;
                    bc.optimal_witness = {static_cast<int>(i), static_cast<int>(j)};
                }
                if (goal[s]) continue;
                for (ActionId a = 0; a < umdp.num_actions; ++a) {
                    if (!umdp.samples[i].has_action(s, a)) continue;
                    const double dc = std::abs(umdp.samples[i].expected_cost(s, a) -
                                               umdp.samples[j].expected_cost(s, a));
                    if (dc > bc.delta_cost) {
                        bc.delta_cost = dc;
                        bc.cost_witness = {static_cast<int>(i), static_cast<int>(j)};
                    }
                    // L1 distance over the union of successors
                    std::unordered_map<StateId, double> diff;
                    for (const TransitionEntry& e : umdp.samples[i].row(s, a))
                        diff[e.next] += e.prob;
                    for (const TransitionEntry& e : umdp.samples[j].row(s, a))
                        diff[e.next] -= e.prob;
                    double l1 = 0.0;
                    for (const auto& [next, d] : diff) l1 += std::abs(d);
                    if (l1 / 2.0 > bc.delta_transition) {
                        bc.delta_transition = l1 / 2.0;
                        bc.transition_witness = {static_cast<int>(i), static_cast<int>(j)};
                    }
                }
            }
        }
    }

    if (h_estimate > 0.0) {
        bc.horizon = h_estimate;
    } else {
        double worst = 0.0;
        for (const MdpSample& sample : umdp.samples) {
            const ValueTable hits = expected_hitting_times(umdp, sample, policy);
            for (double h : hits) worst = std::max(worst, h);
        }
        bc.horizon = 2.0 * worst;
    }
    return bc;
}

double adversary_gap_bound(const BoundConstants& bc) {
    return (bc.delta_cost + 2.0 * bc.delta_optimal +
            2.0 * bc.delta_transition * bc.cost_max * bc.horizon) *
           bc.horizon;
}

namespace {

// regularized incomplete beta via the Lentz continued fraction
double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const int max_iter = 500;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                  a * std::log(x) + b * std::log(1.0 - x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;  // symmetry for faster convergence
}

}  // namespace

double student_t_cdf(double t, double dof) {
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

double welch_t_test(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2 || ys.size() < 2)
        throw ModelError("welch_t_test: each sample needs at least two values");
    auto mean_var = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
        return std::pair<double, double>(mean, var);
    };
    const auto [mx, vx] = mean_var(xs);
    const auto [my, vy] = mean_var(ys);
    if (vx <= 0.0 && vy <= 0.0)
        throw ModelError("welch_t_test: both samples have zero variance");
    const double nx = static_cast<double>(xs.size());
    const double ny = static_cast<double>(ys.size());
    const double se2 = vx / nx + vy / ny;
    const double t = (mx - my) / std::sqrt(se2);
    const double dof =
        se2 * se2 / (vx * vx / (nx * nx * (nx - 1.0)) + vy * vy / (ny * ny * (ny - 1.0)));
    // evidence for mean(xs) < mean(ys) is a t statistic in the left tail
    return student_t_cdf(t, dof);
}

}  // namespace rumdp
