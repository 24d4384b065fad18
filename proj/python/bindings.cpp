#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rumdp/domains.hpp"
#include "rumdp/evaluation.hpp"
#include "rumdp/experiment.hpp"
#include "rumdp/json_io.hpp"
#include "rumdp/planners.hpp"
#include "rumdp/solve.hpp"
#include "rumdp/verify.hpp"

namespace py = pybind11;
using namespace rumdp;

namespace {

PlannerConfig make_config(double epsilon, double kappa, int threads) {
    PlannerConfig cfg;
    cfg.epsilon = epsilon;
    cfg.kappa = kappa;
    cfg.threads = threads;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(regret_umdp, m) {
    m.doc() = "minimax-regret planning for stochastic shortest path UMDPs";

    py::register_exception<ModelError>(m, "ModelError");
    py::register_exception<ConvergenceError>(m, "ConvergenceError");

    py::class_<Umdp>(m, "Umdp")
        .def_readonly("num_states", &Umdp::num_states)
        .def_readonly("num_actions", &Umdp::num_actions)
        .def_readonly("initial", &Umdp::initial)
        .def_readonly("goals", &Umdp::goals)
        .def_property_readonly("num_samples",
                               [](const Umdp& u) { return u.samples.size(); })
        .def("to_json", &umdp_to_json_string)
        .def_static("from_json", &umdp_from_json_string);

    py::class_<OptionPlan>(m, "OptionPlan")
        .def_readonly("horizon", &OptionPlan::horizon)
        .def_readonly("reg", &OptionPlan::reg)
        .def_readonly("sweeps", &OptionPlan::sweeps)
        .def_readonly("converged", &OptionPlan::converged)
        .def_readonly("policy_stable", &OptionPlan::policy_stable)
        .def("value", [](const OptionPlan& p, const Umdp& u) { return p.reg[u.initial]; })
        .def("to_json", [](const OptionPlan& p, const Umdp& u) {
            return plan_to_json_string(p, u.num_states);
        });

    m.def("load_umdp", &load_umdp_json, py::arg("path"));
    m.def("save_umdp", &save_umdp_json, py::arg("umdp"), py::arg("path"));
    m.def("validate", &validate_umdp, py::arg("umdp"));

    m.def(
        "gen_disaster",
        [](int width, int height, int samples, std::uint64_t seed) {
            DisasterSpec spec;
            spec.width = width;
            spec.height = height;
            spec.n_samples = samples;
            spec.seed = seed;
            return gen_disaster(spec);
        },
        py::arg("width") = 6, py::arg("height") = 6, py::arg("samples") = 15,
        py::arg("seed") = 0);
    m.def(
        "gen_medical",
        [](int samples, std::uint64_t seed) {
            MedicalSpec spec;
            spec.n_samples = samples;
            spec.seed = seed;
            return gen_medical(spec);
        },
        py::arg("samples") = 15, py::arg("seed") = 0);
    m.def(
        "gen_glider",
        [](int width, int height, int epochs, std::uint64_t seed) {
            GliderSpec spec;
            spec.grid_width = width;
            spec.grid_height = height;
            spec.epochs = epochs;
            spec.seed = seed;
            const CurrentField field =
                synthetic_current_field(derive_seed(seed, 71), width, height, epochs);
            return gen_glider(spec, field);
        },
        py::arg("width") = 10, py::arg("height") = 10, py::arg("epochs") = 12,
        py::arg("seed") = 0);
    m.def("prune_actions", &prune_actions, py::arg("umdp"));

    m.def(
        "plan_minimax_regret",
        [](const Umdp& umdp, int n, double epsilon, double kappa, int threads) {
            return minimax_regret_vi(umdp, n, make_config(epsilon, kappa, threads));
        },
        py::arg("umdp"), py::arg("n") = 1, py::arg("epsilon") = 1e-6, py::arg("kappa") = 1e-4,
        py::arg("threads") = 1);
    m.def(
        "plan_cemr",
        [](const Umdp& umdp, int n, double epsilon, double kappa, int threads) {
            return cemr_minimax_vi(umdp, n, make_config(epsilon, kappa, threads));
        },
        py::arg("umdp"), py::arg("n") = 1, py::arg("epsilon") = 1e-6, py::arg("kappa") = 1e-4,
        py::arg("threads") = 1);
    m.def(
        "plan_robust",
        [](const Umdp& umdp, double epsilon) {
            const RobustSolution sol = robust_vi(umdp, make_config(epsilon, 0.0, 1));
            return py::make_tuple(policy_to_json_string(sol.policy), sol.values[umdp.initial]);
        },
        py::arg("umdp"), py::arg("epsilon") = 1e-6);
    m.def(
        "plan_averaged",
        [](const Umdp& umdp) { return policy_to_json_string(averaged_mdp_policy(umdp)); },
        py::arg("umdp"));
    m.def(
        "plan_best_sample",
        [](const Umdp& umdp) {
            const BestSampleResult sol = best_sample_policy(umdp);
            return py::make_tuple(policy_to_json_string(sol.policy), sol.max_regret);
        },
        py::arg("umdp"));

    m.def(
        "max_regret_of_plan",
        [](const Umdp& umdp, const OptionPlan& plan) {
            return max_regret(umdp, umdp.samples, plan).value;
        },
        py::arg("umdp"), py::arg("plan"));
    m.def(
        "max_regret_of_policy",
        [](const Umdp& umdp, const std::string& policy_json) {
            const LoadedPolicy loaded = policy_from_json_string(policy_json);
            if (loaded.kind == LoadedPolicy::Kind::stationary)
                return max_regret(umdp, umdp.samples, loaded.policy).value;
            return max_regret(umdp, umdp.samples, loaded.plan).value;
        },
        py::arg("umdp"), py::arg("policy_json"));
    m.def(
        "adversary_value",
        [](const Umdp& umdp, const OptionPlan& plan) { return adversary_value(umdp, plan); },
        py::arg("umdp"), py::arg("plan"));

    m.def("welch_t_test", &welch_t_test, py::arg("xs"), py::arg("ys"));

    m.def(
        "run_experiment",
        [](const std::string& config_json) {
            const ExperimentResults results =
                run_experiment(experiment_config_from_json(config_json));
            return py::make_tuple(results.csv(), results.summary_json());
        },
        py::arg("config_json"));

    m.def(
        "verify",
        [](std::uint64_t seed, bool quick) {
            std::vector<py::dict> out;
            for (const PropertyResult& r : run_property_suite(seed, quick)) {
                py::dict d;
                d["name"] = r.name;
                d["passed"] = r.passed;
                d["detail"] = r.detail;
                out.push_back(std::move(d));
            }
            return out;
        },
        py::arg("seed") = 0, py::arg("quick") = true);
}
