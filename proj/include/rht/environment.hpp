#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/error.hpp"
#include "rht/random.hpp"

namespace rht {

enum class RewardFamily {
    // Bump around an "ideal item" that moves with the context.
    context_peak,
    // Same bump with a context-independent ideal item.
    context_free,
};

enum class ContextDistribution { uniform, mixture };

struct EnvSpec {
    RewardFamily family = RewardFamily::context_peak;
    double sigma = 0.1;
    double sharpness = 2.0;
    double l_x = 1.0;
    double alpha = 1.0;
    int d_x = 2;
    int d_c = 3;
    std::uint64_t seed = 7;
    ContextDistribution contexts = ContextDistribution::uniform;
    int mixture_components = 4;
    std::size_t items = 256;

    void validate() const
    {
        if (!(sigma >= 0.0 && sigma < 0.5)) {
            throw Error(ErrorCode::invalid_config, "noise half-width sigma must lie in [0, 0.5)");
        }
        if (!(sharpness > 0.0) || !std::isfinite(sharpness)) {
            throw Error(ErrorCode::invalid_config, "sharpness must be positive");
        }
        if (!(l_x >= 0.0) || !std::isfinite(l_x)) {
            throw Error(ErrorCode::invalid_config, "l_x must be nonnegative");
        }
        if (!(alpha > 0.0 && alpha <= 1.0)) {
            throw Error(ErrorCode::invalid_config, "alpha must lie in (0,1]");
        }
        if (d_x < 1 || d_c < 1) {
            throw Error(ErrorCode::invalid_config, "d_x and d_c must be positive");
        }
        if (mixture_components < 1) {
            throw Error(ErrorCode::invalid_config, "mixture needs at least one component");
        }
    }
};

/// Mean reward f(x, c) = (1 - 2σ)(1 - min(1, a‖c - g(x)‖)) + σ with
/// g(x) = clamp(b + M (x - 1/2)). The anchor b and matrix M are drawn from
/// the model seed; M is scaled so f is L_X-Hölder(α) in the context.
/// Sampled rewards add uniform noise on (-σ, σ), so they stay in [0,1].
class RewardModel {
public:
    explicit RewardModel(EnvSpec spec) : spec_(std::move(spec))
    {
        spec_.validate();
        Rng rng(derive_seed(spec_.seed, 0x5eed));
        anchor_.resize(static_cast<std::size_t>(spec_.d_c));
        for (double& b : anchor_) {
            b = uniform_in(rng, 0.25, 0.75);
        }
        slope_.assign(static_cast<std::size_t>(spec_.d_c * spec_.d_x), 0.0);
        if (spec_.family == RewardFamily::context_peak) {
            double frob = 0.0;
            for (double& v : slope_) {
                v = uniform_in(rng, -1.0, 1.0);
                frob += v * v;
            }
            frob = std::sqrt(frob);
            // ‖Δf‖ <= (1-2σ) a ‖M‖_F ‖Δx‖; the extra factor covers α < 1
            // for context distances above 1.
            const double budget = spec_.l_x / ((1.0 - 2.0 * spec_.sigma) * spec_.sharpness) /
                                  std::pow(std::sqrt(static_cast<double>(spec_.d_x)), 1.0 - spec_.alpha);
            if (frob > 0.0) {
                for (double& v : slope_) {
                    v *= budget / frob;
                }
            }
        }
    }

    const EnvSpec& spec() const { return spec_; }
    double sigma() const { return spec_.sigma; }

    /// The feature point that earns the maximal reward 1 - σ at context x.
    std::vector<double> ideal_item(const ContextPoint& x) const
    {
        check_context(x);
        std::vector<double> g(anchor_);
        if (spec_.family == RewardFamily::context_peak) {
            for (int i = 0; i < spec_.d_c; ++i) {
                double acc = 0.0;
                for (int k = 0; k < spec_.d_x; ++k) {
                    acc += slope_[static_cast<std::size_t>(i * spec_.d_x + k)] * (x.coords[static_cast<std::size_t>(k)] - 0.5);
                }
                g[static_cast<std::size_t>(i)] = std::clamp(g[static_cast<std::size_t>(i)] + acc, 0.0, 1.0);
            }
        }
        return g;
    }

    double mean_reward(const ContextPoint& x, const CourseItem& c) const { return mean_given_ideal(ideal_item(x), c); }

    /// f for a precomputed ideal item g(x); lets callers scan many items at
    /// one context without recomputing g.
    double mean_given_ideal(const std::vector<double>& g, const CourseItem& c) const
    {
        if (static_cast<int>(c.features.size()) != spec_.d_c) {
            throw Error(ErrorCode::dimension_mismatch, "item " + std::to_string(c.id) + " has " +
                                                           std::to_string(c.features.size()) + " features, model expects " +
                                                           std::to_string(spec_.d_c));
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double d = c.features[i] - g[i];
            sq += d * d;
        }
        const double closeness = 1.0 - std::min(1.0, spec_.sharpness * std::sqrt(sq));
        return (1.0 - 2.0 * spec_.sigma) * closeness + spec_.sigma;
    }

    template <class Urbg>
    double sample_reward(const ContextPoint& x, const CourseItem& c, Urbg& rng) const
    {
        const double f = mean_reward(x, c);
        if (spec_.sigma == 0.0) {
            return f;
        }
        return std::clamp(f + uniform_in(rng, -spec_.sigma, spec_.sigma), 0.0, 1.0);
    }

private:
    void check_context(const ContextPoint& x) const
    {
        if (static_cast<int>(x.dim()) != spec_.d_x) {
            throw Error(ErrorCode::dimension_mismatch, "context has " + std::to_string(x.dim()) +
                                                           " coordinates, model expects " + std::to_string(spec_.d_x));
        }
    }

    EnvSpec spec_;
    std::vector<double> anchor_;
    std::vector<double> slope_; // d_c x d_x, row-major
};

/// i.i.d. contexts: uniform on the cube, or a seeded mixture of small boxes.
class ContextStream {
public:
    ContextStream(const EnvSpec& spec, std::uint64_t seed)
        : d_x_(spec.d_x), kind_(spec.contexts), rng_(derive_seed(seed, 0xc0))
    {
        if (kind_ == ContextDistribution::mixture) {
            Rng centers(derive_seed(spec.seed, 0x1111));
            for (int j = 0; j < spec.mixture_components; ++j) {
                std::vector<double> c(static_cast<std::size_t>(d_x_));
                for (double& v : c) {
                    v = uniform01(centers);
                }
                centers_.push_back(std::move(c));
            }
        }
    }

    ContextPoint next()
    {
        ContextPoint x;
        x.coords.resize(static_cast<std::size_t>(d_x_));
        if (kind_ == ContextDistribution::uniform) {
            for (double& v : x.coords) {
                v = uniform01(rng_);
            }
            return x;
        }
        const auto& c = centers_[uniform_index(rng_, centers_.size())];
        for (std::size_t k = 0; k < x.coords.size(); ++k) {
            x.coords[k] = std::clamp(c[k] + uniform_in(rng_, -0.1, 0.1), 0.0, 1.0);
        }
        return x;
    }

    const Rng& rng() const { return rng_; }
    Rng& rng() { return rng_; }

private:
    int d_x_;
    ContextDistribution kind_;
    Rng rng_;
    std::vector<std::vector<double>> centers_;
};

/// `count` items with features uniform on [0,1]^{d_C} and ids first_id, ...
inline std::vector<CourseItem> synthetic_items(std::size_t count, int d_c, std::uint64_t seed, ItemId first_id = 1)
{
    Rng rng(derive_seed(seed, 0x17e5));
    std::vector<CourseItem> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        CourseItem c;
        c.id = first_id + static_cast<ItemId>(k);
        c.features.resize(static_cast<std::size_t>(d_c));
        for (double& v : c.features) {
            v = uniform01(rng);
        }
        out.push_back(std::move(c));
    }
    return out;
}

struct OracleResult {
    ItemId item = 0;
    double value = 0.0;
};

/// Exhaustive argmax of f(x, ·); ties go to the lowest id.
inline OracleResult oracle_at(const RewardModel& model, const ContextPoint& x, const ItemStore& items)
{
    if (items.empty()) {
        throw Error(ErrorCode::no_items, "oracle over an empty item universe");
    }
    const std::vector<double> g = model.ideal_item(x);
    OracleResult best;
    bool first = true;
    for (const CourseItem& c : items.items()) {
        const double v = model.mean_given_ideal(g, c);
        if (first || v > best.value || (v == best.value && c.id < best.item)) {
            best = OracleResult{c.id, v};
            first = false;
        }
    }
    return best;
}

/// The per-cell optimum, evaluated at the cell center.
inline OracleResult oracle_best(const RewardModel& model, const CellId& cell, const PartitionConfig& partition,
                                const ItemStore& items)
{
    return oracle_at(model, cell_center(cell, partition), items);
}

} // namespace rht
