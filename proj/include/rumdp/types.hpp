#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rumdp {

using StateId = int;
using ActionId = int;

/// One sparse transition: successor state, probability and the cost incurred
/// when the transition is taken.
struct TransitionEntry {
    StateId next = 0;
    double prob = 0.0;
    double cost = 0.0;
};

using TransitionRow = std::vector<TransitionEntry>;

/// A value (or regret, or CEMR) table indexed by state.
using ValueTable = std::vector<double>;

class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when an iterative solver fails to converge. Carries the state with
/// the worst residual so dead ends can be located.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, StateId worst_state, double residual)
        : std::runtime_error(what), worst_state(worst_state), residual(residual) {}
    StateId worst_state;
    double residual;
};

/// Thrown when executing an option plan reaches a state/step the plan does not
/// cover.
class CoverageError : public std::runtime_error {
public:
    CoverageError(const std::string& what, StateId anchor, StateId state, int step)
        : std::runtime_error(what), anchor(anchor), state(state), step(step) {}
    StateId anchor;
    StateId state;
    int step;
};

/// Thrown when the inner policy search exceeds its node budget. Carries the
/// best incumbent objective found so far.
class SearchBudgetError : public std::runtime_error {
public:
    SearchBudgetError(const std::string& what, double incumbent)
        : std::runtime_error(what), incumbent(incumbent) {}
    double incumbent;
};

class TimeoutError : public std::runtime_error {
public:
    explicit TimeoutError(const std::string& what) : std::runtime_error(what) {}
};

/// One sample of model uncertainty: a concrete cost and transition function
/// over the shared state/action space. Transitions are stored sparsely per
/// (state, action); an empty row means the action is unavailable in the state.
class MdpSample {
public:
    MdpSample() = default;
    MdpSample(int num_states, int num_actions)
        : num_states_(num_states), num_actions_(num_actions),
          rows_(static_cast<std::size_t>(num_states) * num_actions) {}

    int num_states() const { return num_states_; }
    int num_actions() const { return num_actions_; }

    const TransitionRow& row(StateId s, ActionId a) const { return rows_[index(s, a)]; }

    bool has_action(StateId s, ActionId a) const { return !rows_[index(s, a)].empty(); }

    std::vector<ActionId> actions_at(StateId s) const {
        std::vector<ActionId> acts;
        for (ActionId a = 0; a < num_actions_; ++a)
            if (has_action(s, a)) acts.push_back(a);
        return acts;
    }

    void add_transition(StateId s, ActionId a, StateId next, double prob, double cost) {
        rows_[index(s, a)].push_back(TransitionEntry{next, prob, cost});
    }

    void set_row(StateId s, ActionId a, TransitionRow row) { rows_[index(s, a)] = std::move(row); }

    void clear_row(StateId s, ActionId a) { rows_[index(s, a)].clear(); }

    /// Expected one-step cost of applying `a` in `s`.
    double expected_cost(StateId s, ActionId a) const {
        const TransitionRow& r = row(s, a);
        if (r.empty())
            throw ModelError("expected_cost: no transitions at state " + std::to_string(s) +
                             ", action " + std::to_string(a));
        double c = 0.0;
        for (const TransitionEntry& e : r) c += e.prob * e.cost;
        return c;
    }

    /// Best expected one-step cost over the actions available at `s`.
    double best_expected_cost(StateId s) const {
        double best = 0.0;
        bool any = false;
        for (ActionId a = 0; a < num_actions_; ++a) {
            if (!has_action(s, a)) continue;
            double c = expected_cost(s, a);
            if (!any || c < best) best = c;
            any = true;
        }
        if (!any) throw ModelError("best_expected_cost: no actions at state " + std::to_string(s));
        return best;
    }

private:
    std::size_t index(StateId s, ActionId a) const {
        return static_cast<std::size_t>(s) * num_actions_ + a;
    }

    int num_states_ = 0;
    int num_actions_ = 0;
    std::vector<TransitionRow> rows_;
};

/// A stochastic shortest path UMDP: shared state/action space, goal set and a
/// finite set of (cost, transition) samples. Immutable once built; all solver
/// operations treat it as read-only.
struct Umdp {
    int num_states = 0;
    int num_actions = 0;
    StateId initial = 0;
    std::vector<StateId> goals;
    std::vector<MdpSample> samples;

    bool is_goal(StateId s) const {
        for (StateId g : goals)
            if (g == s) return true;
        return false;
    }

    std::vector<char> goal_mask() const {
        std::vector<char> mask(num_states, 0);
        for (StateId g : goals) mask[static_cast<std::size_t>(g)] = 1;
        return mask;
    }
};

/// Per-state distribution over actions. Deterministic policies are the
/// one-hot special case.
class StationaryPolicy {
public:
    StationaryPolicy() = default;
    explicit StationaryPolicy(int num_states) : rows_(num_states) {}

    static StationaryPolicy deterministic(const std::vector<ActionId>& choice) {
        StationaryPolicy p(static_cast<int>(choice.size()));
        for (std::size_t s = 0; s < choice.size(); ++s)
            p.rows_[s] = {{choice[s], 1.0}};
        return p;
    }

    int num_states() const { return static_cast<int>(rows_.size()); }

    const std::vector<std::pair<ActionId, double>>& row(StateId s) const { return rows_[s]; }

    void set_row(StateId s, std::vector<std::pair<ActionId, double>> row) {
        rows_[s] = std::move(row);
    }

    void set_action(StateId s, ActionId a) { rows_[s] = {{a, 1.0}}; }

    /// Most likely action; for deterministic policies the chosen one.
    ActionId action_at(StateId s) const {
        if (rows_[s].empty()) throw ModelError("policy has no action at state " + std::to_string(s));
        ActionId best = rows_[s].front().first;
        double best_p = rows_[s].front().second;
        for (const auto& [a, p] : rows_[s])
            if (p > best_p) { best = a; best_p = p; }
        return best;
    }

    bool is_deterministic() const {
        for (const auto& r : rows_)
            if (r.size() > 1) return false;
        return true;
    }

private:
    std::vector<std::vector<std::pair<ActionId, double>>> rows_;
};

/// Time-indexed policy executed for up to `horizon` steps from its anchor
/// state. The table covers the union over samples of the states reachable in
/// exactly t steps, goal states excluded.
struct OptionPolicy {
    StateId anchor = 0;
    int horizon = 1;
    // key = step * num_states + state
    std::unordered_map<std::int64_t, ActionId> table;

    static std::int64_t key(int step, StateId s, int num_states) {
        return static_cast<std::int64_t>(step) * num_states + s;
    }

    bool covers(int step, StateId s, int num_states) const {
        return table.count(key(step, s, num_states)) > 0;
    }

    ActionId action(int step, StateId s, int num_states) const {
        auto it = table.find(key(step, s, num_states));
        if (it == table.end())
            throw CoverageError("option policy does not cover state " + std::to_string(s) +
                                    " at step " + std::to_string(step) + " (anchor " +
                                    std::to_string(anchor) + ")",
                                anchor, s, step);
        return it->second;
    }
};

}  // namespace rumdp
