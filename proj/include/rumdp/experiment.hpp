#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rumdp/evaluation.hpp"

namespace rumdp {

struct MethodSpec {
    std::string name;  // reg | cemr | robust | avg | best
    int n = 1;
    std::string label() const { return name + "(n=" + std::to_string(n) + ")"; }
};

struct InstanceSpec {
    std::string domain;  // disaster | medical | glider
    int width = 6;
    int height = 6;
    int n_samples = 15;  // training samples; glider uses one per epoch
    int pool = 0;        // candidate pool for coverage selection, 0 = off
    std::string size() const { return std::to_string(width) + "x" + std::to_string(height); }
};

struct ExperimentConfig {
    std::vector<InstanceSpec> instances;
    std::vector<std::uint64_t> seeds;
    std::vector<MethodSpec> methods;
    double epsilon = 1e-6;
    double kappa = 1e-4;
    double timeout_s = 600.0;  // per-method planning budget, generation excluded
    int test_samples = 100;
    bool prune = true;        // action pruning before reg/cemr planning
    bool record_time = true;  // false writes 0 for byte-stable output files
    int threads = 1;
};

ExperimentConfig experiment_config_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

struct ResultRow {
    std::uint64_t seed = 0;
    std::string domain;
    std::string size;
    std::string method;
    int n = 1;
    bool completed = false;
    std::string failure;  // empty when completed
    double plan_value = 0.0;
    double train = 0.0;
    double test = 0.0;
    double normalized = 0.0;
    double normalized_test = 0.0;
    double time_s = 0.0;
};

struct ExperimentResults {
    ExperimentConfig config;
    std::vector<ResultRow> rows;

    /// seed,domain,size,method,n,max_regret_train,max_regret_test,normalized,time_s
    std::string csv() const;
    /// per-method means and deviations plus the one-sided Welch p-value matrix
    std::string summary_json() const;
};

ExperimentResults run_experiment(const ExperimentConfig& config);

}  // namespace rumdp
