#include "rumdp/json_io.hpp"

#include "rumdp/solve.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rumdp {

namespace {

using nlohmann::json;

double number_or_decimal_string(const json& value, const char* what) {
    if (value.is_number()) return value.get<double>();
    if (value.is_string()) return std::stod(value.get<std::string>());
    throw ModelError(std::string("expected number or decimal string for ") + what);
}

int count_or_list_size(const json& value, const char* what) {
    if (value.is_number_integer()) return value.get<int>();
    if (value.is_array()) return static_cast<int>(value.size());
    throw ModelError(std::string("expected count or list for ") + what);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ModelError("cannot write " + path);
    out << text;
}

}  // namespace

Umdp umdp_from_json_string(const std::string& text) {
    const json doc = json::parse(text);
    Umdp umdp;
    umdp.num_states = count_or_list_size(doc.at("states"), "states");
    umdp.num_actions = count_or_list_size(doc.at("actions"), "actions");
    umdp.initial = doc.at("initial").get<StateId>();
    for (const auto& g : doc.at("goals")) umdp.goals.push_back(g.get<StateId>());
    for (const auto& sample_doc : doc.at("samples")) {
        MdpSample sample(umdp.num_states, umdp.num_actions);
        for (const auto& entry : sample_doc.at("transitions")) {
            if (!entry.is_array() || entry.size() != 5)
                throw ModelError("transition entries must be [s, a, s', p, c]");
            const StateId s = entry[0].get<StateId>();
            const ActionId a = entry[1].get<ActionId>();
            const StateId next = entry[2].get<StateId>();
            const double p = number_or_decimal_string(entry[3], "probability");
            const double c = number_or_decimal_string(entry[4], "cost");
            if (s < 0 || s >= umdp.num_states || a < 0 || a >= umdp.num_actions)
                throw ModelError("transition indices out of range");
            sample.add_transition(s, a, next, p, c);
        }
        umdp.samples.push_back(std::move(sample));
    }
    const auto issues = validate_umdp(umdp);
    if (!issues.empty()) {
        std::ostringstream msg;
        msg << "invalid UMDP (" << issues.size() << " issues):";
        for (std::size_t i = 0; i < issues.size() && i < 5; ++i) msg << "\n  " << issues[i];
        throw ModelError(msg.str());
    }
    return umdp;
}

std::string umdp_to_json_string(const Umdp& umdp) {
    json doc;
    doc["states"] = umdp.num_states;
    doc["actions"] = umdp.num_actions;
    doc["initial"] = umdp.initial;
    doc["goals"] = umdp.goals;
    doc["samples"] = json::array();
    for (const MdpSample& sample : umdp.samples) {
        json transitions = json::array();
        for (StateId s = 0; s < umdp.num_states; ++s)
            for (ActionId a = 0; a < umdp.num_actions; ++a)
                for (const TransitionEntry& e : sample.row(s, a))
                    transitions.push_back(json::array({s, a, e.next, e.prob, e.cost}));
        doc["samples"].push_back({{"transitions", std::move(transitions)}});
    }
    return doc.dump();
}

Umdp load_umdp_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return umdp_from_json_string(text.str());
}

void save_umdp_json(const Umdp& umdp, const std::string& path) {
    write_file(path, umdp_to_json_string(umdp));
}

std::string policy_to_json_string(const StationaryPolicy& policy) {
    json doc;
    doc["type"] = "stationary";
    json choice = json::array();
    for (StateId s = 0; s < policy.num_states(); ++s) {
        json row = json::array();
        for (const auto& [a, p] : policy.row(s)) row.push_back(json::array({a, p}));
        choice.push_back(std::move(row));
    }
    doc["choice"] = std::move(choice);
    return doc.dump();
}

std::string plan_to_json_string(const OptionPlan& plan, int num_states) {
    json doc;
    doc["type"] = "option_plan";
    doc["n"] = plan.horizon;
    doc["kind"] = plan.kind == BackupKind::regret ? "reg" : "cemr";
    doc["kappa"] = plan.kappa;
    doc["converged"] = plan.converged;
    doc["sweeps"] = plan.sweeps;
    doc["reg"] = plan.reg;
    json options = json::array();
    for (StateId anchor = 0; anchor < static_cast<StateId>(plan.options.size()); ++anchor) {
        const OptionPolicy& option = plan.options[anchor];
        if (option.table.empty()) continue;
        std::vector<std::tuple<StateId, int, ActionId>> rows;
        for (const auto& [key, action] : option.table) {
            const int t = static_cast<int>(key / num_states);
            const StateId s = static_cast<StateId>(key % num_states);
            rows.push_back({s, t, action});
        }
        std::sort(rows.begin(), rows.end());
        json table = json::array();
        for (const auto& [s, t, a] : rows) table.push_back(json::array({s, t, a}));
        options.push_back({{"anchor", anchor},
                           {"n", option.horizon},
                           {"table", std::move(table)},
                           {"objective", plan.reg[anchor]}});
    }
    doc["options"] = std::move(options);
    return doc.dump();
}

LoadedPolicy policy_from_json_string(const std::string& text) {
    const json doc = json::parse(text);
    LoadedPolicy loaded;
    const std::string type = doc.at("type").get<std::string>();
    if (type == "stationary") {
        loaded.kind = LoadedPolicy::Kind::stationary;
        const json& choice = doc.at("choice");
        StationaryPolicy policy(static_cast<int>(choice.size()));
        for (StateId s = 0; s < static_cast<StateId>(choice.size()); ++s) {
            std::vector<std::pair<ActionId, double>> row;
            for (const auto& pair : choice[s])
                row.push_back({pair[0].get<ActionId>(),
                               number_or_decimal_string(pair[1], "action probability")});
            policy.set_row(s, std::move(row));
        }
        loaded.policy = std::move(policy);
        return loaded;
    }
    if (type == "option_plan") {
        loaded.kind = LoadedPolicy::Kind::option_plan;
        OptionPlan plan;
        plan.horizon = doc.at("n").get<int>();
        plan.kind = doc.value("kind", "reg") == std::string("cemr") ? BackupKind::cemr
                                                                    : BackupKind::regret;
        plan.kappa = doc.value("kappa", 0.0);
        plan.converged = doc.value("converged", true);
        plan.sweeps = doc.value("sweeps", 0);
        plan.reg = doc.at("reg").get<std::vector<double>>();
        const int num_states = static_cast<int>(plan.reg.size());
        plan.options.resize(num_states);
        for (StateId s = 0; s < num_states; ++s) {
            plan.options[s].anchor = s;
            plan.options[s].horizon = plan.horizon;
        }
        for (const auto& option_doc : doc.at("options")) {
            const StateId anchor = option_doc.at("anchor").get<StateId>();
            OptionPolicy& option = plan.options.at(anchor);
            option.horizon = option_doc.at("n").get<int>();
            for (const auto& row : option_doc.at("table"))
                option.table[OptionPolicy::key(row[1].get<int>(), row[0].get<StateId>(),
                                               num_states)] = row[2].get<ActionId>();
        }
        loaded.plan = std::move(plan);
        return loaded;
    }
    throw ModelError("unknown policy type: " + type);
}

LoadedPolicy load_policy_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return policy_from_json_string(text.str());
}

void save_policy_json(const StationaryPolicy& policy, const std::string& path) {
    write_file(path, policy_to_json_string(policy));
}

void save_plan_json(const OptionPlan& plan, int num_states, const std::string& path) {
    write_file(path, plan_to_json_string(plan, num_states));
}

}  // namespace rumdp
