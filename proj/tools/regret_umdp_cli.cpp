#include "rumdp/domains.hpp"
#include "rumdp/evaluation.hpp"
#include "rumdp/experiment.hpp"
#include "rumdp/json_io.hpp"
#include "rumdp/planners.hpp"
#include "rumdp/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNoConvergence = 2;
constexpr int kExitTimeout = 3;

int log_level() {
    const char* env = std::getenv("REGRET_UMDP_LOG");
    if (!env) return 1;
    const std::string level(env);
    if (level == "error") return 0;
    if (level == "debug") return 2;
    return 1;
}

void log_info(const std::string& message) {
    if (log_level() >= 1) std::cerr << "[info] " << message << "\n";
}

rumdp::CurrentField load_field_json(const std::string& path, int width, int height) {
    std::ifstream in(path);
    if (!in) throw rumdp::ModelError("cannot open field file " + path);
    nlohmann::json doc;
    in >> doc;
    rumdp::CurrentField field;
    field.width = doc.value("width", width);
    field.height = doc.value("height", height);
    for (const auto& epoch : doc.at("epochs")) {
        std::vector<std::pair<double, double>> cells;
        for (const auto& v : epoch) cells.push_back({v[0].get<double>(), v[1].get<double>()});
        if (static_cast<int>(cells.size()) != field.width * field.height)
            throw rumdp::ModelError("field epoch size does not match the grid");
        field.velocity.push_back(std::move(cells));
    }
    field.epochs = static_cast<int>(field.velocity.size());
    return field;
}

struct CommonOptions {
    std::string method = "reg";
    int n = 1;
    double epsilon = 1e-6;
    double kappa = 1e-4;
    std::uint64_t seed = 0;
    double timeout = 0.0;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    std::string out;
};

rumdp::PlannerConfig planner_config(const CommonOptions& opts) {
    rumdp::PlannerConfig cfg;
    cfg.epsilon = opts.epsilon;
    cfg.kappa = opts.kappa;
    cfg.threads = std::max(1, opts.threads);
    if (opts.timeout > 0)
        cfg.deadline = std::chrono::steady_clock::now() +
                       std::chrono::milliseconds(static_cast<long>(opts.timeout * 1000));
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"minimax-regret planning for stochastic shortest path UMDPs"};
    app.require_subcommand(1);

    CommonOptions opts;

    // generate
    auto* generate = app.add_subcommand("generate", "write a benchmark UMDP as JSON");
    std::string domain = "disaster";
    int width = 6, height = 6, samples = 15;
    double region_rate = 1.0 / 15.0;
    std::string field_source = "synthetic";
    generate->add_option("--domain", domain, "disaster|medical|glider")->required();
    generate->add_option("--seed", opts.seed, "generator seed");
    generate->add_option("--out", opts.out, "output path")->required();
    generate->add_option("--width", width, "grid width");
    generate->add_option("--height", height, "grid height");
    generate->add_option("--samples", samples, "number of samples (glider: epochs)");
    generate->add_option("--region-rate", region_rate, "disaster region centre probability");
    generate->add_option("--field", field_source, "glider currents: synthetic or a JSON path");

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "compute a policy for a UMDP file");
    std::string umdp_path;
    plan_cmd->add_option("--umdp", umdp_path, "UMDP JSON path")->required();
    plan_cmd->add_option("--method", opts.method, "reg|cemr|robust|avg|best");
    plan_cmd->add_option("--n", opts.n, "option horizon");
    plan_cmd->add_option("--epsilon", opts.epsilon, "convergence threshold");
    plan_cmd->add_option("--kappa", opts.kappa, "perturbation");
    plan_cmd->add_option("--seed", opts.seed, "unused for planning, kept for symmetry");
    plan_cmd->add_option("--timeout", opts.timeout, "planning budget in seconds");
    plan_cmd->add_option("--threads", opts.threads, "worker pool size");
    plan_cmd->add_option("--out", opts.out, "policy output path");
    bool prune = false;
    plan_cmd->add_flag("--prune", prune, "action pruning before planning");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "max regret of a policy file");
    std::string policy_path, samples_path;
    eval_cmd->add_option("--umdp", umdp_path, "UMDP JSON path")->required();
    eval_cmd->add_option("--policy", policy_path, "policy JSON path")->required();
    eval_cmd->add_option("--samples", samples_path,
                         "evaluate against this UMDP file's samples instead");
    eval_cmd->add_option("--out", opts.out, "write the evaluation report as JSON");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment config");
    std::string config_path;
    sweep_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    sweep_cmd->add_option("--out", opts.out, "output directory")->required();
    sweep_cmd->add_option("--threads", opts.threads, "instances evaluated in parallel");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "run the self-check property suite");
    bool quick = false;
    verify_cmd->add_option("--seed", opts.seed, "suite seed");
    verify_cmd->add_flag("--quick", quick, "reduced instance counts");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) {
            rumdp::Umdp umdp;
            if (domain == "disaster") {
                rumdp::DisasterSpec spec;
                spec.width = width;
                spec.height = height;
                spec.region_rate = region_rate;
                spec.n_samples = samples;
                spec.seed = opts.seed;
                umdp = rumdp::gen_disaster(spec);
            } else if (domain == "medical") {
                rumdp::MedicalSpec spec;
                spec.n_samples = samples;
                spec.seed = opts.seed;
                umdp = rumdp::gen_medical(spec);
            } else if (domain == "glider") {
                rumdp::GliderSpec spec;
                spec.grid_width = width;
                spec.grid_height = height;
                spec.epochs = samples;
                spec.seed = opts.seed;
                const rumdp::CurrentField field =
                    field_source == "synthetic"
                        ? rumdp::synthetic_current_field(rumdp::derive_seed(opts.seed, 71),
                                                         width, height, samples)
                        : load_field_json(field_source, width, height);
                umdp = rumdp::gen_glider(spec, field);
            } else {
                std::cerr << "unknown domain: " << domain << "\n";
                return kExitValidation;
            }
            rumdp::save_umdp_json(umdp, opts.out);
            log_info("wrote " + opts.out);
            return 0;
        }

        if (*plan_cmd) {
            rumdp::Umdp umdp = rumdp::load_umdp_json(umdp_path);
            if (prune) umdp = rumdp::prune_actions(umdp);
            const rumdp::PlannerConfig cfg = planner_config(opts);
            const auto start = std::chrono::steady_clock::now();
            double value = 0.0;
            if (opts.method == "reg" || opts.method == "cemr") {
                const rumdp::OptionPlan plan =
                    opts.method == "reg" ? rumdp::minimax_regret_vi(umdp, opts.n, cfg)
                                         : rumdp::cemr_minimax_vi(umdp, opts.n, cfg);
                value = plan.reg[umdp.initial];
                if (!opts.out.empty())
                    rumdp::save_plan_json(plan, umdp.num_states, opts.out);
            } else if (opts.method == "robust") {
                const rumdp::RobustSolution sol = rumdp::robust_vi(umdp, cfg);
                value = sol.values[umdp.initial];
                if (!opts.out.empty()) rumdp::save_policy_json(sol.policy, opts.out);
            } else if (opts.method == "avg") {
                const rumdp::StationaryPolicy policy = rumdp::averaged_mdp_policy(umdp, cfg);
                value = rumdp::max_regret(umdp, umdp.samples, policy).value;
                if (!opts.out.empty()) rumdp::save_policy_json(policy, opts.out);
            } else if (opts.method == "best") {
                const rumdp::BestSampleResult sol = rumdp::best_sample_policy(umdp, cfg);
                value = sol.max_regret;
                if (!opts.out.empty()) rumdp::save_policy_json(sol.policy, opts.out);
            } else {
                std::cerr << "unknown method: " << opts.method << "\n";
                return kExitValidation;
            }
            const double elapsed =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::cout << "value " << value << "\n";
            std::cout << "time_s " << elapsed << "\n";
            return 0;
        }

        if (*eval_cmd) {
            const rumdp::Umdp umdp = rumdp::load_umdp_json(umdp_path);
            const std::vector<rumdp::MdpSample>& samples =
                samples_path.empty() ? umdp.samples
                                     : rumdp::load_umdp_json(samples_path).samples;
            const rumdp::LoadedPolicy loaded = rumdp::load_policy_json(policy_path);
            rumdp::MaxRegretResult result;
            if (loaded.kind == rumdp::LoadedPolicy::Kind::stationary) {
                result = rumdp::max_regret(umdp, samples, loaded.policy);
            } else {
                result = rumdp::max_regret(umdp, samples, loaded.plan, {},
                                           rumdp::OffTablePolicy::reanchor);
            }
            std::cout << "max_regret " << result.value << "\n";
            std::cout << "worst_sample " << result.worst_sample << "\n";
            if (!opts.out.empty()) {
                nlohmann::json doc{{"max_regret", result.value},
                                   {"worst_sample", result.worst_sample},
                                   {"per_sample", result.per_sample}};
                std::ofstream out(opts.out);
                out << doc.dump(2);
            }
            return 0;
        }

        if (*sweep_cmd) {
            rumdp::ExperimentConfig config = rumdp::load_experiment_config(config_path);
            if (opts.threads > 1) config.threads = opts.threads;
            const rumdp::ExperimentResults results = rumdp::run_experiment(config);
            std::filesystem::create_directories(opts.out);
            {
                std::ofstream csv(std::filesystem::path(opts.out) / "results.csv");
                csv << results.csv();
            }
            {
                std::ofstream summary(std::filesystem::path(opts.out) / "summary.json");
                summary << results.summary_json();
            }
            log_info("wrote results.csv and summary.json under " + opts.out);
            bool any_timeout = false;
            for (const auto& row : results.rows) any_timeout |= row.failure == "timeout";
            return any_timeout ? kExitTimeout : 0;
        }

        if (*verify_cmd) {
            const auto results = rumdp::run_property_suite(opts.seed, quick);
            bool all_passed = true;
            for (const auto& result : results) {
                std::cout << (result.passed ? "PASS" : "FAIL") << " " << result.name << ": "
                          << result.detail << "\n";
                all_passed &= result.passed;
            }
            return all_passed ? 0 : kExitValidation;
        }
    } catch (const rumdp::TimeoutError& err) {
        std::cerr << "timeout: " << err.what() << "\n";
        return kExitTimeout;
    } catch (const rumdp::ConvergenceError& err) {
        std::cerr << "no convergence: " << err.what() << "\n";
        return kExitNoConvergence;
    } catch (const rumdp::SearchBudgetError& err) {
        std::cerr << "search budget exceeded: " << err.what()
                  << " (best incumbent " << err.incumbent << ")\n";
        return kExitNoConvergence;
    } catch (const rumdp::ModelError& err) {
        std::cerr << "invalid model: " << err.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
