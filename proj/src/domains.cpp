#include "rumdp/domains.hpp"

#include "rumdp/solve.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

namespace rumdp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 over (seed, stream) for independent generator streams
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

void make_goal_absorbing(MdpSample& sample, StateId goal, int num_actions) {
    for (ActionId a = 0; a < num_actions; ++a) sample.set_row(goal, a, {{goal, 1.0, 0.0}});
}

// 8-connected compass directions; the two squares adjacent to a heading are
// its 45-degree neighbours
constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {1, 1, 0, -1, -1, -1, 0, 1};

}  // namespace

// ---------------------------------------------------------------------------
// disaster rescue
// ---------------------------------------------------------------------------

DisasterLayout disaster_layout(const DisasterSpec& spec) {
    if (spec.width * spec.height < 4) throw ModelError("disaster grid must have at least 4 cells");
    DisasterLayout layout;
    layout.start = 0;
    layout.goal = spec.width * spec.height - 1;

    std::mt19937_64 rng(derive_seed(spec.seed, 1));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    auto region_around = [&](int cx, int cy) {
        std::vector<StateId> cells;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const int x = cx + dx, y = cy + dy;
                if (x < 0 || x >= spec.width || y < 0 || y >= spec.height) continue;
                cells.push_back(y * spec.width + x);
            }
        return cells;
    };
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const StateId s = y * spec.width + x;
            const bool swamp_centre = uniform(rng) < spec.region_rate;
            const bool obstacle_centre = uniform(rng) < spec.region_rate;
            if (s == layout.start || s == layout.goal) continue;
            if (swamp_centre) layout.swamp_regions.push_back(region_around(x, y));
            if (obstacle_centre) layout.obstacle_regions.push_back(region_around(x, y));
        }
    }
    return layout;
}

std::vector<MdpSample> disaster_samples(const DisasterSpec& spec, const DisasterLayout& layout,
                                        int count, std::uint64_t sample_seed) {
    const int num_states = spec.width * spec.height;
    const int num_actions = 8;
    std::vector<MdpSample> samples;
    samples.reserve(count);

    for (int index = 0; index < count; ++index) {
        std::mt19937_64 rng(derive_seed(sample_seed, 1000 + index));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);

        std::vector<char> obstacle(num_states, 0);
        std::vector<double> entry_cost(num_states, 0.5);
        for (const auto& region : layout.swamp_regions) {
            const std::size_t pick = static_cast<std::size_t>(uniform(rng) * region.size());
            const StateId cell = region[std::min(pick, region.size() - 1)];
            entry_cost[cell] = 1.0 + uniform(rng);
        }
        for (const auto& region : layout.obstacle_regions) {
            const std::size_t pick = static_cast<std::size_t>(uniform(rng) * region.size());
            obstacle[region[std::min(pick, region.size() - 1)]] = 1;
        }

        MdpSample sample(num_states, num_actions);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const StateId s = y * spec.width + x;
                if (s == layout.goal) continue;
                for (ActionId a = 0; a < num_actions; ++a) {
                    std::map<StateId, double> probs;
                    double stay = 0.0;
                    const int outcomes[3] = {a, (a + 7) % 8, (a + 1) % 8};
                    const double nominal[3] = {0.8, 0.1, 0.1};
                    for (int k = 0; k < 3; ++k) {
                        const int nx = x + kDx[outcomes[k]];
                        const int ny = y + kDy[outcomes[k]];
                        if (nx < 0 || nx >= spec.width || ny < 0 || ny >= spec.height) {
                            stay += nominal[k];
                            continue;
                        }
                        const StateId next = ny * spec.width + nx;
                        if (obstacle[next]) {
                            probs[next] += 0.05;
                            stay += nominal[k] - 0.05;
                        } else {
                            probs[next] += nominal[k];
                        }
                    }
                    if (stay > 0.0) probs[s] += stay;
                    TransitionRow row;
                    for (const auto& [next, p] : probs)
                        row.push_back({next, p, entry_cost[next]});
                    sample.set_row(s, a, std::move(row));
                }
            }
        }
        make_goal_absorbing(sample, layout.goal, num_actions);
        samples.push_back(std::move(sample));
    }
    return samples;
}

DisasterInstance gen_disaster_instance(const DisasterSpec& spec) {
    for (int attempt = 0; attempt < 10; ++attempt) {
        DisasterInstance inst;
        inst.spec = spec;
        inst.spec.seed = attempt == 0 ? spec.seed : derive_seed(spec.seed, 7000 + attempt);
        inst.layout = disaster_layout(inst.spec);
        inst.umdp.num_states = spec.width * spec.height;
        inst.umdp.num_actions = 8;
        inst.umdp.initial = inst.layout.start;
        inst.umdp.goals = {inst.layout.goal};
        inst.umdp.samples = disaster_samples(inst.spec, inst.layout, spec.n_samples,
                                             derive_seed(inst.spec.seed, 2));
        if (validate_umdp(inst.umdp).empty()) return inst;
    }
    throw ModelError("gen_disaster: could not generate a valid instance after 10 region layouts");
}

Umdp gen_disaster(const DisasterSpec& spec) { return gen_disaster_instance(spec).umdp; }

// ---------------------------------------------------------------------------
// medical decision making
// ---------------------------------------------------------------------------

StateId medical_state(const MedicalSpec& spec, int health, int day) {
    return day * spec.health_levels + health;
}

namespace {

// nominal one-hot outcome rows per (health, action), shared by all samples
std::vector<std::vector<int>> medical_nominal(const MedicalSpec& spec) {
    std::mt19937_64 rng(derive_seed(spec.seed, 11));
    std::uniform_int_distribution<int> row(0, 6);
    std::vector<std::vector<int>> nominal(spec.health_levels, std::vector<int>(spec.actions));
    for (int h = 0; h < spec.health_levels; ++h)
        for (int a = 0; a < spec.actions; ++a) nominal[h][a] = row(rng);
    return nominal;
}

}  // namespace

std::vector<MdpSample> medical_samples(const MedicalSpec& spec, int count,
                                       std::uint64_t sample_seed) {
    const auto nominal = medical_nominal(spec);
    const int num_states = spec.health_levels * spec.days + 1;
    const StateId goal = num_states - 1;
    const int last_day = spec.days - 1;

    std::vector<MdpSample> samples;
    samples.reserve(count);
    for (int index = 0; index < count; ++index) {
        std::mt19937_64 rng(derive_seed(sample_seed, 3000 + index));
        std::normal_distribution<double> noise(0.0, spec.noise_sd);

        // outcome distributions over relative health changes in {-3..3}
        std::vector<std::vector<std::array<double, 7>>> outcome(
            spec.health_levels, std::vector<std::array<double, 7>>(spec.actions));
        for (int h = 0; h < spec.health_levels; ++h) {
            for (int a = 0; a < spec.actions; ++a) {
                auto& row = outcome[h][a];
                double total = 0.0;
                for (int k = 0; k < 7; ++k) {
                    row[k] = (k == nominal[h][a] ? 1.0 : 0.0) + std::abs(noise(rng));
                    total += row[k];
                }
                for (int k = 0; k < 7; ++k) row[k] /= total;
            }
        }

        MdpSample sample(num_states, spec.actions);
        for (int d = 0; d < spec.days; ++d) {
            for (int h = 0; h < spec.health_levels; ++h) {
                const StateId s = medical_state(spec, h, d);
                if (d == last_day) {
                    const double cost = 0.05 * (spec.health_levels - 1 - h) + (h == 0 ? 2.0 : 0.0);
                    for (ActionId a = 0; a < spec.actions; ++a)
                        sample.set_row(s, a, {{goal, 1.0, cost}});
                    continue;
                }
                for (ActionId a = 0; a < spec.actions; ++a) {
                    std::map<StateId, double> probs;
                    for (int k = 0; k < 7; ++k) {
                        const int next_h =
                            std::clamp(h + k - 3, 0, spec.health_levels - 1);
                        probs[medical_state(spec, next_h, d + 1)] += outcome[h][a][k];
                    }
                    TransitionRow row;
                    for (const auto& [next, p] : probs) row.push_back({next, p, 0.0});
                    sample.set_row(s, a, std::move(row));
                }
            }
        }
        make_goal_absorbing(sample, goal, spec.actions);
        samples.push_back(std::move(sample));
    }
    return samples;
}

Umdp gen_medical(const MedicalSpec& spec) {
    if (spec.noise_sd <= 0.0) throw ModelError("gen_medical: noise_sd must be positive");
    Umdp umdp;
    umdp.num_states = spec.health_levels * spec.days + 1;
    umdp.num_actions = spec.actions;
    umdp.initial = medical_state(spec, spec.initial_health, 0);
    umdp.goals = {umdp.num_states - 1};
    umdp.samples = medical_samples(spec, spec.n_samples, derive_seed(spec.seed, 12));
    return umdp;
}

// ---------------------------------------------------------------------------
// underwater glider
// ---------------------------------------------------------------------------

CurrentField synthetic_current_field(std::uint64_t seed, int width, int height, int epochs,
                                     double max_speed, int kernels) {
    if (max_speed <= 0.0) throw ModelError("synthetic_current_field: max_speed must be positive");
    std::mt19937_64 rng(derive_seed(seed, 31));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    struct Kernel {
        double x, y, radius, strength, drift_x, drift_y, strength_drift;
    };
    std::vector<Kernel> vortices;
    for (int k = 0; k < kernels; ++k) {
        Kernel v;
        v.x = uniform(rng) * width;
        v.y = uniform(rng) * height;
        v.radius = 1.5 + 2.5 * uniform(rng);
        v.strength = (uniform(rng) - 0.5) * 2.0;
        // slow drift keeps adjacent epochs similar
        v.drift_x = (uniform(rng) - 0.5) * 0.3;
        v.drift_y = (uniform(rng) - 0.5) * 0.3;
        v.strength_drift = (uniform(rng) - 0.5) * 0.1;
        vortices.push_back(v);
    }

    CurrentField field;
    field.width = width;
    field.height = height;
    field.epochs = epochs;
    field.velocity.assign(epochs, std::vector<std::pair<double, double>>(
                                      static_cast<std::size_t>(width) * height, {0.0, 0.0}));
    double peak = 0.0;
    for (int e = 0; e < epochs; ++e) {
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                double vx = 0.0, vy = 0.0;
                for (const Kernel& v : vortices) {
                    const double cx = v.x + v.drift_x * e;
                    const double cy = v.y + v.drift_y * e;
                    const double strength = v.strength + v.strength_drift * e;
                    const double dx = (x + 0.5) - cx;
                    const double dy = (y + 0.5) - cy;
                    const double w =
                        strength * std::exp(-(dx * dx + dy * dy) / (2.0 * v.radius * v.radius));
                    vx += -dy * w;
                    vy += dx * w;
                }
                field.velocity[e][static_cast<std::size_t>(y) * width + x] = {vx, vy};
                peak = std::max(peak, std::hypot(vx, vy));
            }
        }
    }
    if (peak > 0.0) {
        const double scale = max_speed / peak * 0.9;
        for (auto& epoch : field.velocity)
            for (auto& v : epoch) {
                v.first *= scale;
                v.second *= scale;
            }
    }
    return field;
}

namespace {

struct GliderStatics {
    StateId start, goal;
    std::vector<double> entry_cost;
    std::vector<char> shallow;
};

GliderStatics glider_statics(const GliderSpec& spec) {
    const int num_states = spec.grid_width * spec.grid_height;
    GliderStatics st;
    std::mt19937_64 rng(derive_seed(spec.seed, 41));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    st.start = static_cast<StateId>(uniform(rng) * num_states) % num_states;
    do {
        st.goal = static_cast<StateId>(uniform(rng) * num_states) % num_states;
    } while (st.goal == st.start);

    st.entry_cost.resize(num_states);
    for (int s = 0; s < num_states; ++s)
        st.entry_cost[s] = spec.cost_min + (spec.cost_max - spec.cost_min) * uniform(rng);

    // smooth synthetic bathymetry around the shallow threshold
    struct Bump {
        double x, y, radius, amp;
    };
    std::vector<Bump> bumps;
    for (int k = 0; k < 5; ++k)
        bumps.push_back({uniform(rng) * spec.grid_width, uniform(rng) * spec.grid_height,
                         1.5 + 3.0 * uniform(rng), (uniform(rng) - 0.5) * 300.0});
    st.shallow.resize(num_states);
    for (int y = 0; y < spec.grid_height; ++y) {
        for (int x = 0; x < spec.grid_width; ++x) {
            double depth = 300.0;
            for (const Bump& b : bumps) {
                const double dx = (x + 0.5) - b.x, dy = (y + 0.5) - b.y;
                depth += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.radius * b.radius));
            }
            st.shallow[static_cast<std::size_t>(y) * spec.grid_width + x] =
                depth < spec.shallow_depth;
        }
    }
    return st;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MdpSample glider_sample_from_currents(const GliderSpec& spec, const GliderStatics& st,
                                      const std::vector<std::pair<double, double>>& currents) {
    const int w = spec.grid_width, h = spec.grid_height;
    const int num_states = w * h;
    const double L = spec.cell_size;

    std::vector<double> cost(num_states);
    for (int s = 0; s < num_states; ++s) {
        const double speed = std::hypot(currents[s].first, currents[s].second);
        cost[s] = st.entry_cost[s] +
                  (st.shallow[s] && speed > spec.strong_current ? spec.shallow_penalty : 0.0);
    }

    // per-axis cell masses of a normal around mu; boundary cells absorb the
    // out-of-grid tails
    auto axis_masses = [&](double mu, int cells) {
        std::vector<double> mass(cells);
        for (int i = 0; i < cells; ++i) {
            const double lo = i == 0 ? -std::numeric_limits<double>::infinity()
                                     : (i * L - mu) / spec.noise_sd;
            const double hi = i == cells - 1 ? std::numeric_limits<double>::infinity()
                                             : ((i + 1) * L - mu) / spec.noise_sd;
            const double upper = std::isinf(hi) ? 1.0 : normal_cdf(hi);
            const double lower = std::isinf(lo) ? 0.0 : normal_cdf(lo);
            mass[i] = upper - lower;
        }
        return mass;
    };

    MdpSample sample(num_states, spec.headings);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const StateId s = y * w + x;
            if (s == st.goal) continue;
            for (ActionId a = 0; a < spec.headings; ++a) {
                const double angle = 2.0 * M_PI * a / spec.headings;
                const double vx = spec.glider_speed * std::cos(angle) + currents[s].first;
                const double vy = spec.glider_speed * std::sin(angle) + currents[s].second;
                const double mx = (x + 0.5) * L + vx * spec.delta_t;
                const double my = (y + 0.5) * L + vy * spec.delta_t;
                const std::vector<double> px = axis_masses(mx, w);
                const std::vector<double> py = axis_masses(my, h);
                TransitionRow row;
                double total = 0.0;
                for (int j = 0; j < h; ++j) {
                    if (py[j] <= 0.0) continue;
                    for (int i = 0; i < w; ++i) {
                        const double p = px[i] * py[j];
                        if (p < 1e-12) continue;
                        const StateId next = j * w + i;
                        row.push_back({next, p, cost[next]});
                        total += p;
                    }
                }
                for (TransitionEntry& e : row) e.prob /= total;
                sample.set_row(s, a, std::move(row));
            }
        }
    }
    make_goal_absorbing(sample, st.goal, spec.headings);
    return sample;
}

}  // namespace

Umdp gen_glider(const GliderSpec& spec, const CurrentField& field) {
    if (field.width != spec.grid_width || field.height != spec.grid_height ||
        field.epochs < spec.epochs)
        throw ModelError("gen_glider: current field does not match the grid");
    const GliderStatics st = glider_statics(spec);
    Umdp umdp;
    umdp.num_states = spec.grid_width * spec.grid_height;
    umdp.num_actions = spec.headings;
    umdp.initial = st.start;
    umdp.goals = {st.goal};
    for (int e = 0; e < spec.epochs; ++e)
        umdp.samples.push_back(glider_sample_from_currents(spec, st, field.velocity[e]));
    return umdp;
}

std::vector<MdpSample> glider_interpolated_samples(const GliderSpec& spec,
                                                   const CurrentField& field,
                                                   const std::vector<double>& points,
                                                   double noise_frac, std::uint64_t seed) {
    const GliderStatics st = glider_statics(spec);
    const int num_states = spec.grid_width * spec.grid_height;
    std::mt19937_64 rng(derive_seed(seed, 51));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<MdpSample> samples;
    for (double u : points) {
        const double clamped = std::clamp(u, 0.0, static_cast<double>(spec.epochs - 1));
        const int lo = std::min(static_cast<int>(clamped), spec.epochs - 2);
        const double frac = clamped - lo;
        std::vector<std::pair<double, double>> currents(num_states);
        for (int s = 0; s < num_states; ++s) {
            const auto& a = field.velocity[lo][s];
            const auto& b = field.velocity[lo + 1][s];
            double vx = (1.0 - frac) * a.first + frac * b.first;
            double vy = (1.0 - frac) * a.second + frac * b.second;
            if (noise_frac > 0.0) {
                const double sd = noise_frac * std::hypot(vx, vy);
                vx += sd * gauss(rng);
                vy += sd * gauss(rng);
            }
            currents[s] = {vx, vy};
        }
        samples.push_back(glider_sample_from_currents(spec, st, currents));
    }
    return samples;
}

// ---------------------------------------------------------------------------
// sample selection and pruning
// ---------------------------------------------------------------------------

namespace {

// flattened (probability, cost) parameters keyed by (s, a, s')
using ParamVector = std::vector<std::pair<std::int64_t, std::pair<double, double>>>;

ParamVector flatten(const MdpSample& sample) {
    ParamVector params;
    for (StateId s = 0; s < sample.num_states(); ++s)
        for (ActionId a = 0; a < sample.num_actions(); ++a)
            for (const TransitionEntry& e : sample.row(s, a)) {
                const std::int64_t key =
                    (static_cast<std::int64_t>(s) * sample.num_actions() + a) *
                        sample.num_states() +
                    e.next;
                params.push_back({key, {e.prob, e.cost}});
            }
    std::sort(params.begin(), params.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return params;
}

double linf_distance(const ParamVector& a, const ParamVector& b) {
    double dist = 0.0;
    std::size_t i = 0, j = 0;
    auto update = [&dist](const std::pair<double, double>& x, const std::pair<double, double>& y) {
        dist = std::max({dist, std::abs(x.first - y.first), std::abs(x.second - y.second)});
    };
    while (i < a.size() || j < b.size()) {
        if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
            update(a[i++].second, {0.0, 0.0});
        } else if (i == a.size() || b[j].first < a[i].first) {
            update({0.0, 0.0}, b[j++].second);
        } else {
            update(a[i++].second, b[j++].second);
        }
    }
    return dist;
}

}  // namespace

std::vector<std::size_t> select_sample_indices(const std::vector<MdpSample>& candidates,
                                               std::size_t k) {
    if (candidates.empty()) throw ModelError("select_samples: empty candidate set");
    if (k > candidates.size()) throw ModelError("select_samples: k exceeds candidate count");

    std::vector<ParamVector> vectors;
    vectors.reserve(candidates.size());
    for (const MdpSample& c : candidates) vectors.push_back(flatten(c));

    // centroid over the union of keys
    std::map<std::int64_t, std::pair<double, double>> centroid_map;
    for (const ParamVector& v : vectors)
        for (const auto& [key, pc] : v) {
            centroid_map[key].first += pc.first / candidates.size();
            centroid_map[key].second += pc.second / candidates.size();
        }
    ParamVector centroid(centroid_map.begin(), centroid_map.end());

    std::vector<std::size_t> selected;
    std::size_t seed_index = 0;
    double seed_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const double d = linf_distance(vectors[i], centroid);
        if (d < seed_dist) {
            seed_dist = d;
            seed_index = i;
        }
    }
    selected.push_back(seed_index);

    std::vector<double> min_dist(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i)
        min_dist[i] = linf_distance(vectors[i], vectors[seed_index]);
    while (selected.size() < k) {
        std::size_t farthest = 0;
        double far_dist = -1.0;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (std::find(selected.begin(), selected.end(), i) != selected.end()) continue;
            if (min_dist[i] > far_dist) {
                far_dist = min_dist[i];
                farthest = i;
            }
        }
        selected.push_back(farthest);
        for (std::size_t i = 0; i < vectors.size(); ++i)
            min_dist[i] = std::min(min_dist[i], linf_distance(vectors[i], vectors[farthest]));
    }
    std::sort(selected.begin(), selected.end());
    return selected;
}

std::vector<MdpSample> select_samples(const std::vector<MdpSample>& candidates, std::size_t k) {
    std::vector<MdpSample> picked;
    for (std::size_t i : select_sample_indices(candidates, k)) picked.push_back(candidates[i]);
    return picked;
}

Umdp prune_actions(const Umdp& umdp) {
    const std::vector<char> goal = umdp.goal_mask();
    std::vector<std::set<ActionId>> keep(umdp.num_states);
    for (const MdpSample& sample : umdp.samples) {
        const StationaryPolicy policy = optimal_values(umdp, sample).policy;
        for (StateId s = 0; s < umdp.num_states; ++s)
            if (!goal[s]) keep[s].insert(policy.action_at(s));
    }

    Umdp pruned = umdp;
    for (MdpSample& sample : pruned.samples) {
        for (StateId s = 0; s < umdp.num_states; ++s) {
            if (goal[s]) continue;  // goal self-loops survive
            if (keep[s].empty())
                throw ModelError("prune_actions: no optimal action recorded at state " +
                                 std::to_string(s));
            for (ActionId a = 0; a < umdp.num_actions; ++a)
                if (!keep[s].count(a)) sample.clear_row(s, a);
        }
    }
    const auto issues = validate_umdp(pruned);
    if (!issues.empty())
        throw ModelError("prune_actions: pruned model failed validation: " + issues.front());
    return pruned;
}

}  // namespace rumdp
