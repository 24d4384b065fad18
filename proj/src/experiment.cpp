#include "rumdp/experiment.hpp"

#include "rumdp/domains.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace rumdp {

namespace {

using nlohmann::json;

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.9g", value);
    return buffer;
}

struct Instance {
    InstanceSpec spec;
    std::uint64_t seed = 0;
    Umdp umdp;
    Umdp pruned;  // used by reg/cemr when pruning is on
    std::vector<MdpSample> test_samples;
};

Instance build_instance(const ExperimentConfig& config, const InstanceSpec& spec,
                        std::uint64_t seed) {
    Instance inst;
    inst.spec = spec;
    inst.seed = seed;
    const std::uint64_t test_seed = derive_seed(seed, 90001);

    if (spec.domain == "disaster") {
        DisasterSpec dspec;
        dspec.width = spec.width;
        dspec.height = spec.height;
        dspec.n_samples = std::max(spec.n_samples, spec.pool);
        dspec.seed = seed;
        DisasterInstance gen = gen_disaster_instance(dspec);
        inst.umdp = std::move(gen.umdp);
        if (spec.pool > spec.n_samples)
            inst.umdp.samples = select_samples(inst.umdp.samples, spec.n_samples);
        inst.test_samples =
            disaster_samples(gen.spec, gen.layout, config.test_samples, test_seed);
    } else if (spec.domain == "medical") {
        MedicalSpec mspec;
        mspec.n_samples = std::max(spec.n_samples, spec.pool);
        mspec.seed = seed;
        inst.umdp = gen_medical(mspec);
        if (spec.pool > spec.n_samples)
            inst.umdp.samples = select_samples(inst.umdp.samples, spec.n_samples);
        inst.test_samples = medical_samples(mspec, config.test_samples, test_seed);
    } else if (spec.domain == "glider") {
        GliderSpec gspec;
        gspec.grid_width = spec.width;
        gspec.grid_height = spec.height;
        gspec.epochs = spec.n_samples;
        gspec.seed = seed;
        const CurrentField field = synthetic_current_field(derive_seed(seed, 71), spec.width,
                                                           spec.height, gspec.epochs);
        inst.umdp = gen_glider(gspec, field);
        std::mt19937_64 rng(test_seed);
        std::uniform_real_distribution<double> point(0.0, gspec.epochs - 1.0);
        std::vector<double> points;
        for (int i = 0; i < config.test_samples; ++i) points.push_back(point(rng));
        inst.test_samples =
            glider_interpolated_samples(gspec, field, points, 0.02, derive_seed(seed, 72));
    } else {
        throw ModelError("unknown domain: " + spec.domain);
    }

    if (config.prune) {
        bool wants_prune = false;
        for (const MethodSpec& m : config.methods)
            wants_prune |= m.name == "reg" || m.name == "cemr";
        if (wants_prune) inst.pruned = prune_actions(inst.umdp);
    }
    return inst;
}

void run_method(const ExperimentConfig& config, const Instance& inst, const MethodSpec& method,
                ResultRow& row) {
    PlannerConfig cfg;
    cfg.epsilon = config.epsilon;
    cfg.kappa = config.kappa;
    if (config.timeout_s > 0)
        cfg.deadline = std::chrono::steady_clock::now() +
                       std::chrono::milliseconds(static_cast<long>(config.timeout_s * 1000));

    const bool pruned_model = config.prune && (method.name == "reg" || method.name == "cemr");
    const Umdp& model = pruned_model ? inst.pruned : inst.umdp;

    const auto start = std::chrono::steady_clock::now();
    OptionPlan plan;
    StationaryPolicy policy;
    bool is_plan = false;
    try {
        if (method.name == "reg") {
            plan = minimax_regret_vi(model, method.n, cfg);
            is_plan = true;
            row.plan_value = plan.reg[model.initial];
        } else if (method.name == "cemr") {
            plan = cemr_minimax_vi(model, method.n, cfg);
            is_plan = true;
            row.plan_value = plan.reg[model.initial];
        } else if (method.name == "robust") {
            RobustSolution sol = robust_vi(model, cfg);
            policy = std::move(sol.policy);
            row.plan_value = sol.values[model.initial];
        } else if (method.name == "avg") {
            policy = averaged_mdp_policy(model, cfg);
        } else if (method.name == "best") {
            BestSampleResult sol = best_sample_policy(model, cfg);
            policy = std::move(sol.policy);
            row.plan_value = sol.max_regret;
        } else {
            throw ModelError("unknown method: " + method.name);
        }
    } catch (const std::exception& err) {
        row.failure = err.what();
        row.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                         .count();
        return;
    }
    row.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.timeout_s > 0 && row.time_s > config.timeout_s && row.failure.empty())
        row.failure = "timeout";

    // evaluation always runs against the unpruned samples
    if (is_plan) {
        row.train = max_regret(inst.umdp, inst.umdp.samples, plan, {}, OffTablePolicy::error)
                        .value;
        row.test = max_regret(inst.umdp, inst.test_samples, plan, {}, OffTablePolicy::reanchor)
                       .value;
    } else {
        row.train = max_regret(inst.umdp, inst.umdp.samples, policy).value;
        row.test = max_regret(inst.umdp, inst.test_samples, policy).value;
    }
    row.completed = row.failure.empty();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentConfig config;
    for (const auto& inst : doc.at("instances")) {
        InstanceSpec spec;
        spec.domain = inst.at("domain").get<std::string>();
        spec.width = inst.value("width", spec.width);
        spec.height = inst.value("height", spec.height);
        spec.n_samples = inst.value("samples", spec.n_samples);
        spec.pool = inst.value("pool", 0);
        config.instances.push_back(spec);
    }
    for (const auto& s : doc.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
    for (const auto& m : doc.at("methods")) {
        MethodSpec method;
        method.name = m.at("method").get<std::string>();
        method.n = m.value("n", 1);
        config.methods.push_back(method);
    }
    config.epsilon = doc.value("epsilon", config.epsilon);
    config.kappa = doc.value("kappa", config.kappa);
    config.timeout_s = doc.value("timeout_s", config.timeout_s);
    config.test_samples = doc.value("test_samples", config.test_samples);
    config.prune = doc.value("prune", config.prune);
    config.record_time = doc.value("record_time", config.record_time);
    config.threads = doc.value("threads", config.threads);
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return experiment_config_from_json(text.str());
}

ExperimentResults run_experiment(const ExperimentConfig& config) {
    ExperimentResults results;
    results.config = config;

    struct Task {
        InstanceSpec spec;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const InstanceSpec& spec : config.instances)
        for (std::uint64_t seed : config.seeds) tasks.push_back({spec, seed});

    std::vector<std::vector<ResultRow>> per_task(tasks.size());
    auto run_task = [&](std::size_t index) {
        const Task& task = tasks[index];
        const Instance inst = build_instance(config, task.spec, task.seed);
        std::vector<ResultRow>& rows = per_task[index];
        for (const MethodSpec& method : config.methods) {
            ResultRow row;
            row.seed = task.seed;
            row.domain = task.spec.domain;
            row.size = task.spec.size();
            row.method = method.name;
            row.n = method.n;
            run_method(config, inst, method, row);
            rows.push_back(std::move(row));
        }
        // normalize among the methods that completed on this instance
        double worst = 0.0;
        for (const ResultRow& row : rows)
            if (row.completed) worst = std::max(worst, row.train);
        double worst_test = 0.0;
        for (const ResultRow& row : rows)
            if (row.completed) worst_test = std::max(worst_test, row.test);
        for (ResultRow& row : rows) {
            if (!row.completed) {
                row.train = row.test = row.normalized = row.normalized_test =
                    std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            row.normalized = worst > 0.0 ? row.train / worst : 1.0;
            row.normalized_test = worst_test > 0.0 ? row.test / worst_test : 1.0;
        }
    };

    if (config.threads > 1 && tasks.size() > 1) {
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> workers;
        const int count = std::min<int>(config.threads, static_cast<int>(tasks.size()));
        for (int w = 0; w < count; ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    const std::size_t index = cursor.fetch_add(1);
                    if (index >= tasks.size()) return;
                    try {
                        run_task(index);
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
    } else {
        for (std::size_t index = 0; index < tasks.size(); ++index) run_task(index);
    }

    for (auto& rows : per_task)
        for (auto& row : rows) results.rows.push_back(std::move(row));
    return results;
}

std::string ExperimentResults::csv() const {
    std::ostringstream out;
    out << "seed,domain,size,method,n,max_regret_train,max_regret_test,normalized,time_s\n";
    for (const ResultRow& row : rows) {
        char time_buffer[32];
        std::snprintf(time_buffer, sizeof(time_buffer), "%.3f",
                      config.record_time ? row.time_s : 0.0);
        out << row.seed << ',' << row.domain << ',' << row.size << ',' << row.method << ','
            << row.n << ',' << format_double(row.train) << ',' << format_double(row.test) << ','
            << format_double(row.normalized) << ',' << time_buffer << '\n';
    }
    return out.str();
}

std::string ExperimentResults::summary_json() const {
    std::vector<std::string> labels;
    for (const MethodSpec& method : config.methods) labels.push_back(method.label());

    // collect normalized scores per method, aligned over instances
    std::vector<std::vector<double>> norm_train(labels.size()), norm_test(labels.size());
    std::vector<std::vector<double>> times(labels.size());
    int dropouts = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t method_index = i % labels.size();
        const ResultRow& row = rows[i];
        if (!row.completed) {
            ++dropouts;
            continue;
        }
        norm_train[method_index].push_back(row.normalized);
        norm_test[method_index].push_back(row.normalized_test);
        times[method_index].push_back(row.time_s);
    }

    auto mean_sd = [](const std::vector<double>& v) -> std::pair<double, double> {
        if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN()};
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return {mean, std::sqrt(var)};
    };

    json doc;
    doc["dropouts"] = dropouts;
    doc["methods"] = json::object();
    for (std::size_t m = 0; m < labels.size(); ++m) {
        const auto [mean, sd] = mean_sd(norm_train[m]);
        const auto [mean_test, sd_test] = mean_sd(norm_test[m]);
        const auto [mean_time, sd_time] = mean_sd(times[m]);
        doc["methods"][labels[m]] = {
            {"runs", norm_train[m].size()},
            {"normalized_max_regret_mean", mean},
            {"normalized_max_regret_sd", sd},
            {"normalized_test_max_regret_mean", mean_test},
            {"normalized_test_max_regret_sd", sd_test},
            {"time_mean_s", config.record_time ? mean_time : 0.0},
        };
    }
    // p_values[i][j]: evidence that method i beats (scores below) method j
    json matrix = json::array();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        json line = json::array();
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (i == j || norm_train[i].size() < 2 || norm_train[j].size() < 2) {
                line.push_back(nullptr);
                continue;
            }
            try {
                line.push_back(welch_t_test(norm_train[i], norm_train[j]));
            } catch (const ModelError&) {
                line.push_back(nullptr);
            }
        }
        matrix.push_back(std::move(line));
    }
    doc["method_order"] = labels;
    doc["p_values"] = std::move(matrix);
    return doc.dump(2);
}

}  // namespace rumdp
