#pragma once

#include <string>
#include <vector>

#include "rumdp/evaluation.hpp"
#include "rumdp/options.hpp"
#include "rumdp/planners.hpp"

namespace rumdp {

/// Exhaustive minimax regret over all deterministic stationary policies,
/// evaluating each candidate's regret in every sample.
struct BruteForceResult {
    double value = 0.0;
    StationaryPolicy policy;
    long candidates = 0;
};

BruteForceResult brute_force_minimax_regret(const Umdp& umdp, const SolveParams& params = {});

/// Exhaustive minimum over all deterministic option-policy assignments on
/// the reachable slots, sharing the search's leaf evaluation. Throws
/// ModelError when more than max_candidates assignments exist.
struct EnumerationResult {
    double objective = 0.0;
    OptionPolicy policy;
    long candidates = 0;
};

EnumerationResult enumerate_option_policies(const Umdp& umdp, StateId anchor, int horizon,
                                            const ValueTable& estimates,
                                            const std::vector<ValueTable>& optimal_per_sample,
                                            BackupKind kind, double kappa,
                                            long max_candidates = 100000);

/// Counts the deterministic option assignments of an inner problem.
long count_option_policies(const Umdp& umdp, StateId anchor, int horizon, long cap);

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Self-contained property checks over random instances: the regret
/// recursion against direct evaluation, exactness for independent menus
/// against brute force, the per-step adversary sandwich, option-level
/// Bellman consistency of returned plans, horizon monotonicity, search
/// exactness against enumeration, and validator fault detection.
std::vector<PropertyResult> run_property_suite(std::uint64_t seed, bool quick);

}  // namespace rumdp
