#pragma once

#include <cstdint>
#include <vector>

#include "rumdp/types.hpp"

namespace rumdp {

/// Independent deterministic generator stream for (seed, stream) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// disaster rescue: 8-connected grid with swamp and obstacle regions
// ---------------------------------------------------------------------------

struct DisasterSpec {
    int width = 6;
    int height = 6;
    double region_rate = 1.0 / 15.0;  // chance of a cell being a region centre
    int n_samples = 15;
    std::uint64_t seed = 0;
};

/// Region layout derived deterministically from the spec; the per-sample
/// swamp/obstacle placements are drawn inside these regions.
struct DisasterLayout {
    StateId start = 0;
    StateId goal = 0;
    std::vector<std::vector<StateId>> swamp_regions;     // cells per region
    std::vector<std::vector<StateId>> obstacle_regions;  // cells per region
};

DisasterLayout disaster_layout(const DisasterSpec& spec);

/// Fresh samples for a fixed layout: one swamp and one obstacle placed
/// uniformly inside each region, swamp entry costs drawn per sample.
std::vector<MdpSample> disaster_samples(const DisasterSpec& spec, const DisasterLayout& layout,
                                        int count, std::uint64_t sample_seed);

/// Generated instance plus the layout it was built from, so further samples
/// (e.g. held-out evaluation sets) can be drawn for the same regions.
struct DisasterInstance {
    DisasterSpec spec;  // seed may differ from the requested one after retries
    DisasterLayout layout;
    Umdp umdp;
};

DisasterInstance gen_disaster_instance(const DisasterSpec& spec);

Umdp gen_disaster(const DisasterSpec& spec);

// ---------------------------------------------------------------------------
// medical decision making: (health, day) chain with noisy treatment outcomes
// ---------------------------------------------------------------------------

struct MedicalSpec {
    int health_levels = 20;
    int days = 7;
    int actions = 3;
    double noise_sd = 0.1;
    int n_samples = 15;
    int initial_health = 10;
    std::uint64_t seed = 0;
};

std::vector<MdpSample> medical_samples(const MedicalSpec& spec, int count,
                                       std::uint64_t sample_seed);

Umdp gen_medical(const MedicalSpec& spec);

/// State index for (health, day); the goal is the final extra state.
StateId medical_state(const MedicalSpec& spec, int health, int day);

// ---------------------------------------------------------------------------
// underwater glider: grid abstraction of current-driven navigation
// ---------------------------------------------------------------------------

struct GliderSpec {
    int grid_width = 10;
    int grid_height = 10;
    double cell_size = 500.0;     // m
    double glider_speed = 0.6;    // m/s
    double delta_t = 800.0;       // s
    double noise_sd = 150.0;      // per-axis displacement noise, m
    int headings = 12;            // evenly spaced over 360 degrees
    double cost_min = 0.8;
    double cost_max = 1.0;
    double shallow_penalty = 3.0;
    double shallow_depth = 260.0;   // m
    double strong_current = 0.12;   // m/s
    int epochs = 12;                // one sample per hourly field
    std::uint64_t seed = 0;
};

/// Per-epoch cell-centre current velocities in m/s.
struct CurrentField {
    int width = 0;
    int height = 0;
    int epochs = 0;
    std::vector<std::vector<std::pair<double, double>>> velocity;  // [epoch][y*width+x]

    const std::pair<double, double>& at(int epoch, int x, int y) const {
        return velocity[epoch][static_cast<std::size_t>(y) * width + x];
    }
};

/// Smooth synthetic field built from drifting rotational kernels; speeds are
/// capped at max_speed and adjacent epochs differ only slightly.
CurrentField synthetic_current_field(std::uint64_t seed, int width, int height, int epochs = 12,
                                     double max_speed = 0.3, int kernels = 6);

Umdp gen_glider(const GliderSpec& spec, const CurrentField& field);

/// Samples at interpolation points between adjacent epoch fields, with
/// Gaussian noise of noise_frac times the local current speed added per
/// component. Integer points with zero noise reproduce the epoch samples.
std::vector<MdpSample> glider_interpolated_samples(const GliderSpec& spec,
                                                   const CurrentField& field,
                                                   const std::vector<double>& points,
                                                   double noise_frac, std::uint64_t seed);

// ---------------------------------------------------------------------------
// sample selection and action pruning
// ---------------------------------------------------------------------------

/// Greedy k-center selection under the L-infinity distance on the flattened
/// (probability, cost) parameters, seeded with the candidate nearest the
/// centroid. Returned indices are sorted ascending.
std::vector<std::size_t> select_sample_indices(const std::vector<MdpSample>& candidates,
                                               std::size_t k);

std::vector<MdpSample> select_samples(const std::vector<MdpSample>& candidates, std::size_t k);

/// Keeps an action at a state only if it is chosen there by some sample's
/// optimal policy; goal self-loops survive. The result is revalidated.
Umdp prune_actions(const Umdp& umdp);

}  // namespace rumdp
