#include "rumdp/options.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace rumdp {

namespace {

std::vector<StateId> expand_level(const MdpSample& sample, const std::vector<StateId>& level,
                                  const std::vector<char>& goal) {
    std::vector<StateId> next;
    for (StateId s : level) {
        if (goal[s]) {
            next.push_back(s);
            continue;
        }
        for (ActionId a = 0; a < sample.num_actions(); ++a)
            for (const TransitionEntry& e : sample.row(s, a))
                if (e.prob > 0.0) next.push_back(e.next);
    }
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    return next;
}

}  // namespace

ReachableSets reachable_sets(const Umdp& umdp, StateId anchor, int horizon) {
    if (horizon < 1) throw ModelError("reachable_sets: horizon must be >= 1");
    if (anchor < 0 || anchor >= umdp.num_states)
        throw ModelError("reachable_sets: anchor out of range");
    const std::vector<char> goal = umdp.goal_mask();
    ReachableSets sets;
    sets.anchor = anchor;
    sets.horizon = horizon;
    sets.per_sample.resize(umdp.samples.size());
    for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
        auto& levels = sets.per_sample[q];
        levels.push_back({anchor});
        for (int t = 1; t < horizon; ++t)
            levels.push_back(expand_level(umdp.samples[q], levels.back(), goal));
    }
    sets.unions.resize(horizon);
    for (int t = 0; t < horizon; ++t) {
        std::vector<StateId> u;
        for (const auto& levels : sets.per_sample)
            u.insert(u.end(), levels[t].begin(), levels[t].end());
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        sets.unions[t] = std::move(u);
    }
    return sets;
}

OptionBackup backward_induction(const Umdp& umdp, std::size_t sample_index,
                                const OptionPolicy& option, const ValueTable& regret_estimates,
                                const ValueTable& optimal) {
    const MdpSample& sample = umdp.samples.at(sample_index);
    const std::vector<char> goal = umdp.goal_mask();
    const int n = option.horizon;

    if (goal[option.anchor])
        return OptionBackup{0.0, regret_estimates[option.anchor] + optimal[option.anchor]};

    std::vector<std::vector<StateId>> levels;
    levels.push_back({option.anchor});
    for (int t = 1; t < n; ++t) levels.push_back(expand_level(sample, levels.back(), goal));

    // value[s] = expected cost over the remaining steps, cont[s] = expected
    // terminal regret + optimal value; both propagate through the same
    // transition kernel
    std::unordered_map<StateId, double> value, cont;
    for (int t = n - 1; t >= 0; --t) {
        std::unordered_map<StateId, double> new_value, new_cont;
        for (StateId s : levels[t]) {
            if (goal[s]) {
                new_value[s] = 0.0;
                new_cont[s] = regret_estimates[s] + optimal[s];
                continue;
            }
            const ActionId a = option.action(t, s, umdp.num_states);
            if (!sample.has_action(s, a))
                throw ModelError("backward_induction: option uses unavailable action " +
                                 std::to_string(a) + " at state " + std::to_string(s));
            double v = sample.expected_cost(s, a);
            double c = 0.0;
            for (const TransitionEntry& e : sample.row(s, a)) {
                if (t == n - 1) {
                    c += e.prob * (regret_estimates[e.next] + optimal[e.next]);
                } else {
                    v += e.prob * value.at(e.next);
                    c += e.prob * cont.at(e.next);
                }
            }
            new_value[s] = v;
            new_cont[s] = c;
        }
        value = std::move(new_value);
        cont = std::move(new_cont);
    }
    return OptionBackup{value.at(option.anchor), cont.at(option.anchor)};
}

OptionModel option_cost_and_transition(const Umdp& umdp, std::size_t sample_index,
                                       const OptionPolicy& option, const ValueTable& optimal) {
    const MdpSample& sample = umdp.samples.at(sample_index);
    const std::vector<char> goal = umdp.goal_mask();
    OptionModel model;

    if (goal[option.anchor]) {
        model.transition = {{option.anchor, 1.0}};
        model.cost = 0.0;
        return model;
    }

    // exact n-step state distribution, goals hold their mass
    std::map<StateId, double> dist{{option.anchor, 1.0}};
    for (int t = 0; t < option.horizon; ++t) {
        std::map<StateId, double> next;
        for (const auto& [s, mass] : dist) {
            if (goal[s]) {
                next[s] += mass;
                continue;
            }
            const ActionId a = option.action(t, s, umdp.num_states);
            for (const TransitionEntry& e : sample.row(s, a)) next[e.next] += mass * e.prob;
        }
        dist = std::move(next);
    }
    model.transition.assign(dist.begin(), dist.end());

    const ValueTable zeros(umdp.num_states, 0.0);
    const OptionBackup backup = backward_induction(umdp, sample_index, option, zeros, optimal);
    double terminal_value = 0.0;
    for (const auto& [s, p] : model.transition) terminal_value += p * optimal[s];
    model.cost = backup.expected_cost + terminal_value - optimal[option.anchor];
    return model;
}

// ---------------------------------------------------------------------------
// inner branch-and-bound
// ---------------------------------------------------------------------------

struct OptionOptimizer::Impl {
    struct Act {
        ActionId action;
        double cbar;
        std::vector<std::pair<int, double>> succ;  // (position in next level, probability)
    };
    struct LevelNode {
        StateId state;
        bool goal;
        int slot;  // -1 for goals
        double best_cbar;
        std::vector<Act> acts;
        std::vector<int> act_pos;  // action id -> index into acts, -1 if unavailable
    };
    struct SampleModel {
        std::vector<std::vector<LevelNode>> levels;  // [t][i], t in [0, horizon)
        std::vector<StateId> boundary;               // states at step == horizon
    };
    struct AnchorModel {
        ReachableSets sets;
        std::vector<std::pair<int, StateId>> slots;  // (t, state) ascending
        std::vector<std::vector<ActionId>> slot_actions;
        std::vector<SampleModel> samples;
        std::vector<std::vector<std::vector<double>>> buf;  // [q][t][i], t in [0, horizon]
    };

    const Umdp& umdp;
    int horizon;
    const std::vector<ValueTable>& vstar;
    BackupKind kind;
    double kappa;
    long node_budget;
    std::vector<char> goal;
    std::unordered_map<StateId, std::unique_ptr<AnchorModel>> cache;

    Impl(const Umdp& umdp, int horizon, const std::vector<ValueTable>& vstar, BackupKind kind,
         double kappa, long node_budget)
        : umdp(umdp), horizon(horizon), vstar(vstar), kind(kind), kappa(kappa),
          node_budget(node_budget), goal(umdp.goal_mask()) {}

    AnchorModel& model_for(StateId anchor) {
        auto it = cache.find(anchor);
        if (it != cache.end()) return *it->second;
        auto model = std::make_unique<AnchorModel>();
        build(anchor, *model);
        AnchorModel& ref = *model;
        cache.emplace(anchor, std::move(model));
        return ref;
    }

    void build(StateId anchor, AnchorModel& m) {
        m.sets = reachable_sets(umdp, anchor, horizon);
        // slot per non-goal state of the union at each step
        std::vector<std::unordered_map<StateId, int>> slot_of(horizon);
        for (int t = 0; t < horizon; ++t) {
            for (StateId s : m.sets.unions[t]) {
                if (goal[s]) continue;
                slot_of[t][s] = static_cast<int>(m.slots.size());
                m.slots.push_back({t, s});
                m.slot_actions.push_back(umdp.samples[0].actions_at(s));
            }
        }
        m.samples.resize(umdp.samples.size());
        m.buf.resize(umdp.samples.size());
        for (std::size_t q = 0; q < umdp.samples.size(); ++q) {
            const MdpSample& sample = umdp.samples[q];
            SampleModel& sm = m.samples[q];
            sm.boundary = expand_level(sample, m.sets.per_sample[q].back(), goal);
            sm.levels.resize(horizon);
            m.buf[q].resize(horizon + 1);
            for (int t = horizon - 1; t >= 0; --t) {
                const std::vector<StateId>& next_states =
                    t + 1 < horizon ? m.sets.per_sample[q][t + 1] : sm.boundary;
                std::unordered_map<StateId, int> next_pos;
                for (std::size_t i = 0; i < next_states.size(); ++i)
                    next_pos[next_states[i]] = static_cast<int>(i);
                for (StateId s : m.sets.per_sample[q][t]) {
                    LevelNode node;
                    node.state = s;
                    node.goal = goal[s] != 0;
                    node.slot = node.goal ? -1 : slot_of[t].at(s);
                    node.act_pos.assign(umdp.num_actions, -1);
                    node.best_cbar = std::numeric_limits<double>::infinity();
                    if (!node.goal) {
                        for (ActionId a = 0; a < umdp.num_actions; ++a) {
                            if (!sample.has_action(s, a)) continue;
                            Act act;
                            act.action = a;
                            act.cbar = sample.expected_cost(s, a);
                            for (const TransitionEntry& e : sample.row(s, a))
                                act.succ.push_back({next_pos.at(e.next), e.prob});
                            node.act_pos[a] = static_cast<int>(node.acts.size());
                            node.best_cbar = std::min(node.best_cbar, act.cbar);
                            node.acts.push_back(std::move(act));
                        }
                    }
                    sm.levels[t].push_back(std::move(node));
                }
                m.buf[q][t].assign(sm.levels[t].size(), 0.0);
            }
            m.buf[q][horizon].assign(sm.boundary.size(), 0.0);
        }
    }

    double boundary_value(std::size_t q, StateId s, const ValueTable& estimates) const {
        return kind == BackupKind::regret ? estimates[s] + vstar[q][s] : estimates[s];
    }

    double stage_cost(const LevelNode& node, const Act& act) const {
        return kind == BackupKind::regret ? act.cbar : act.cbar - node.best_cbar;
    }

    void fill_boundary(AnchorModel& m, const ValueTable& estimates) {
        for (std::size_t q = 0; q < m.samples.size(); ++q)
            for (std::size_t i = 0; i < m.samples[q].boundary.size(); ++i)
                m.buf[q][horizon][i] = boundary_value(q, m.samples[q].boundary[i], estimates);
    }

    // per-sample backward induction where unassigned slots take the minimizing
    // action; exact value once all slots are assigned. Optionally records the
    // per-slot minimizers for this sample (lowest action index on ties).
    double decoupled_value(AnchorModel& m, std::size_t q, const std::vector<int>& assign,
                           const ValueTable& estimates, std::vector<int>* argmin = nullptr) {
        const SampleModel& sm = m.samples[q];
        for (int t = horizon - 1; t >= 0; --t) {
            const std::vector<double>& next = m.buf[q][t + 1];
            std::vector<double>& cur = m.buf[q][t];
            for (std::size_t i = 0; i < sm.levels[t].size(); ++i) {
                const LevelNode& node = sm.levels[t][i];
                if (node.goal) {
                    cur[i] = boundary_value(q, node.state, estimates);
                    continue;
                }
                const int chosen = assign[node.slot];
                if (chosen >= 0) {
                    const int pos = node.act_pos[chosen];
                    if (pos < 0)
                        throw ModelError("option action " + std::to_string(chosen) +
                                         " unavailable at state " + std::to_string(node.state));
                    const Act& act = node.acts[pos];
                    double v = stage_cost(node, act);
                    for (const auto& [j, p] : act.succ) v += p * next[j];
                    cur[i] = v;
                } else {
                    double best = std::numeric_limits<double>::infinity();
                    ActionId best_a = -1;
                    for (const Act& act : node.acts) {
                        double v = stage_cost(node, act);
                        for (const auto& [j, p] : act.succ) v += p * next[j];
                        if (v < best) {
                            best = v;
                            best_a = act.action;
                        }
                    }
                    cur[i] = best;
                    if (argmin) (*argmin)[node.slot] = best_a;
                }
            }
        }
        double root = m.buf[q][0][0];
        if (kind == BackupKind::regret) root -= vstar[q][m.sets.anchor];
        return root;
    }

    double bound(AnchorModel& m, const std::vector<int>& assign, const ValueTable& estimates) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < m.samples.size(); ++q)
            worst = std::max(worst, decoupled_value(m, q, assign, estimates));
        return worst;
    }

    InnerSolution solve(StateId anchor, const ValueTable& estimates, const OptionPolicy* hint) {
        InnerSolution sol;
        sol.policy.anchor = anchor;
        sol.policy.horizon = horizon;
        if (goal[anchor]) {
            sol.objective = 0.0;
            return sol;
        }
        AnchorModel& m = model_for(anchor);
        fill_boundary(m, estimates);

        const std::size_t num_slots = m.slots.size();
        std::vector<int> assign(num_slots, -1);

        // incumbent values from cheap candidates; tables are deliberately not
        // recorded so that the search still returns the lexicographically
        // smallest optimal assignment
        double best = std::numeric_limits<double>::infinity();
        bool recorded = false;
        std::vector<int> best_assign;

        auto consider_candidate = [&](const std::vector<int>& candidate) {
            double value = bound(m, candidate, estimates);
            if (value < best) best = value;
        };
        std::vector<int> candidate(num_slots, -1);
        std::vector<int> argmin(num_slots, -1);
        for (std::size_t q = 0; q < m.samples.size(); ++q) {
            std::fill(argmin.begin(), argmin.end(), -1);
            decoupled_value(m, q, assign, estimates, &argmin);
            for (std::size_t k = 0; k < num_slots; ++k)
                candidate[k] = argmin[k] >= 0 ? argmin[k] : m.slot_actions[k].front();
            consider_candidate(candidate);
        }
        if (hint && !hint->table.empty()) {
            bool usable = true;
            for (std::size_t k = 0; k < num_slots; ++k) {
                const auto& [t, s] = m.slots[k];
                if (!hint->covers(t, s, umdp.num_states)) {
                    usable = false;
                    break;
                }
                candidate[k] = hint->action(t, s, umdp.num_states);
            }
            if (usable) consider_candidate(candidate);
        }

        long nodes = 0;
        auto dfs = [&](auto&& self, std::size_t k) -> void {
            if (++nodes > node_budget)
                throw SearchBudgetError("inner option search exceeded node budget of " +
                                            std::to_string(node_budget) + " at anchor " +
                                            std::to_string(anchor) +
                                            " (horizon too large for instance?)",
                                        best + kappa);
            const double lb = bound(m, assign, estimates);
            if (recorded ? lb >= best : lb > best) return;
            if (k == num_slots) {
                if (lb < best || !recorded) {
                    best = lb;
                    best_assign = assign;
                    recorded = true;
                }
                return;
            }
            for (ActionId a : m.slot_actions[k]) {
                assign[k] = a;
                self(self, k + 1);
            }
            assign[k] = -1;
        };
        dfs(dfs, 0);

        for (std::size_t k = 0; k < num_slots; ++k) {
            const auto& [t, s] = m.slots[k];
            sol.policy.table[OptionPolicy::key(t, s, umdp.num_states)] = best_assign[k];
        }
        sol.objective = best + kappa;
        sol.nodes_expanded = nodes;
        return sol;
    }
};

OptionOptimizer::OptionOptimizer(const Umdp& umdp, int horizon,
                                 const std::vector<ValueTable>& optimal_per_sample,
                                 BackupKind kind, double kappa, long node_budget)
    : impl_(std::make_unique<Impl>(umdp, horizon, optimal_per_sample, kind, kappa, node_budget)) {
}

OptionOptimizer::~OptionOptimizer() = default;

InnerSolution OptionOptimizer::solve(StateId anchor, const ValueTable& estimates,
                                     const OptionPolicy* hint) {
    return impl_->solve(anchor, estimates, hint);
}

double OptionOptimizer::evaluate(StateId anchor, const OptionPolicy& option,
                                 const ValueTable& estimates) {
    if (impl_->goal[anchor]) return 0.0;
    auto& m = impl_->model_for(anchor);
    impl_->fill_boundary(m, estimates);
    std::vector<int> assign(m.slots.size(), -1);
    for (std::size_t k = 0; k < m.slots.size(); ++k) {
        const auto& [t, s] = m.slots[k];
        assign[k] = option.action(t, s, impl_->umdp.num_states);
    }
    return impl_->bound(m, assign, estimates) + impl_->kappa;
}

const ReachableSets& OptionOptimizer::sets(StateId anchor) {
    return impl_->model_for(anchor).sets;
}

double option_policy_objective(const Umdp& umdp, const OptionPolicy& option,
                               const ValueTable& estimates,
                               const std::vector<ValueTable>& optimal_per_sample, BackupKind kind,
                               double kappa) {
    OptionOptimizer::Impl impl(umdp, option.horizon, optimal_per_sample, kind, kappa,
                               std::numeric_limits<long>::max());
    if (impl.goal[option.anchor]) return 0.0;
    auto& m = impl.model_for(option.anchor);
    impl.fill_boundary(m, estimates);
    std::vector<int> assign(m.slots.size(), -1);
    for (std::size_t k = 0; k < m.slots.size(); ++k) {
        const auto& [t, s] = m.slots[k];
        assign[k] = option.action(t, s, umdp.num_states);
    }
    return impl.bound(m, assign, estimates) + kappa;
}

InnerSolution optimize_option_deterministic(const Umdp& umdp, StateId anchor, int horizon,
                                            const ValueTable& estimates,
                                            const std::vector<ValueTable>& optimal_per_sample,
                                            double kappa, long node_budget, BackupKind kind,
                                            const OptionPolicy* hint) {
    OptionOptimizer optimizer(umdp, horizon, optimal_per_sample, kind, kappa, node_budget);
    return optimizer.solve(anchor, estimates, hint);
}

}  // namespace rumdp
