#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rht/environment.hpp"

using namespace rht;

namespace {

// Second implementation of the default family, written from its formula:
// f = (1-2σ)(1 - min(1, a‖c - g(x)‖)) + σ, g(x) = clamp(b + M(x - 1/2)).
// b and M are redrawn from the model seed in the documented order.
double reference_mean(const EnvSpec& s, const std::vector<double>& x, const std::vector<double>& c)
{
    Rng rng(derive_seed(s.seed, 0x5eed));
    std::vector<double> b;
    for (int i = 0; i < s.d_c; ++i) {
        b.push_back(uniform_in(rng, 0.25, 0.75));
    }
    std::vector<std::vector<double>> m(static_cast<std::size_t>(s.d_c), std::vector<double>(static_cast<std::size_t>(s.d_x), 0.0));
    if (s.family == RewardFamily::context_peak) {
        double norm2 = 0.0;
        for (auto& row : m) {
            for (double& v : row) {
                v = uniform_in(rng, -1.0, 1.0);
                norm2 += v * v;
            }
        }
        const double scale = s.l_x / ((1.0 - 2.0 * s.sigma) * s.sharpness) /
                             std::pow(std::sqrt(static_cast<double>(s.d_x)), 1.0 - s.alpha) / std::sqrt(norm2);
        for (auto& row : m) {
            for (double& v : row) {
                v *= scale;
            }
        }
    }
    double dist2 = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        double g = b[i];
        for (std::size_t k = 0; k < x.size(); ++k) {
            g += m[i][k] * (x[k] - 0.5);
        }
        g = std::min(1.0, std::max(0.0, g));
        dist2 += (c[i] - g) * (c[i] - g);
    }
    return (1.0 - 2.0 * s.sigma) * (1.0 - std::min(1.0, s.sharpness * std::sqrt(dist2))) + s.sigma;
}

ItemStore store_of(const std::vector<CourseItem>& items, int d_c)
{
    ItemStore store(d_c);
    for (const CourseItem& c : items) {
        store.add(c);
    }
    return store;
}

} // namespace

TEST(RewardModel, MatchesIndependentClosedForm)
{
    Rng rng(3);
    for (RewardFamily family : {RewardFamily::context_peak, RewardFamily::context_free}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            EnvSpec spec;
            spec.family = family;
            spec.seed = seed;
            spec.alpha = seed % 2 == 0 ? 0.5 : 1.0;
            spec.sharpness = 1.0 + static_cast<double>(seed);
            const RewardModel model(spec);
            for (int k = 0; k < 500; ++k) {
                const std::vector<double> x{uniform01(rng), uniform01(rng)};
                const CourseItem c{1, {uniform01(rng), uniform01(rng), uniform01(rng)}};
                EXPECT_NEAR(model.mean_reward(ContextPoint{x}, c), reference_mean(spec, x, c.features), 1e-12);
            }
        }
    }
}

TEST(RewardModel, PeakItemEarnsOneMinusSigma)
{
    const EnvSpec spec;
    const RewardModel model(spec);
    Rng rng(4);
    for (int k = 0; k < 50; ++k) {
        const ContextPoint x{{uniform01(rng), uniform01(rng)}};
        const CourseItem peak{1, model.ideal_item(x)};
        EXPECT_NEAR(model.mean_reward(x, peak), 1.0 - spec.sigma, 1e-15);
    }
}

TEST(RewardModel, MeanStaysInsideSigmaBand)
{
    EnvSpec spec;
    spec.sigma = 0.2;
    const RewardModel model(spec);
    Rng rng(5);
    for (int k = 0; k < 20000; ++k) {
        const ContextPoint x{{uniform01(rng), uniform01(rng)}};
        const CourseItem c{1, {uniform01(rng), uniform01(rng), uniform01(rng)}};
        const double f = model.mean_reward(x, c);
        EXPECT_GE(f, 0.2 - 1e-15);
        EXPECT_LE(f, 0.8 + 1e-15);
    }
}

TEST(RewardModel, RejectsInvalidSpecs)
{
    EnvSpec spec;
    spec.sigma = 0.5;
    EXPECT_THROW(RewardModel{spec}, Error);
    spec.sigma = -0.1;
    EXPECT_THROW(RewardModel{spec}, Error);
    spec = EnvSpec{};
    spec.alpha = 0.0;
    EXPECT_THROW(RewardModel{spec}, Error);
    spec = EnvSpec{};
    spec.sharpness = 0.0;
    EXPECT_THROW(RewardModel{spec}, Error);
}

TEST(RewardModel, DimensionMismatch)
{
    const RewardModel model{EnvSpec{}};
    try {
        model.mean_reward(ContextPoint{{0.5}}, CourseItem{1, {0.1, 0.1, 0.1}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
    EXPECT_THROW(model.mean_reward(ContextPoint{{0.5, 0.5}}, CourseItem{1, {0.1}}), Error);
}

TEST(SampleReward, NoiselessIsExact)
{
    EnvSpec spec;
    spec.sigma = 0.0;
    const RewardModel model(spec);
    Rng rng(6);
    const ContextPoint x{{0.3, 0.6}};
    const CourseItem c{1, {0.2, 0.4, 0.9}};
    for (int k = 0; k < 100; ++k) {
        EXPECT_EQ(model.sample_reward(x, c, rng), model.mean_reward(x, c));
    }
}

TEST(SampleReward, EmpiricalMeanAndBoundedness)
{
    const RewardModel model{EnvSpec{}};
    Rng rng(7);
    const ContextPoint x{{0.3, 0.6}};
    const CourseItem c{1, {0.2, 0.4, 0.9}};
    const double f = model.mean_reward(x, c);
    double sum = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double r = model.sample_reward(x, c, rng);
        ASSERT_GE(r, 0.0);
        ASSERT_LE(r, 1.0);
        ASSERT_LT(std::abs(r - f), 0.1);
        sum += r;
    }
    EXPECT_NEAR(sum / 100000.0, f, 0.001);
}

TEST(RewardModel, LipschitzInContext)
{
    Rng rng(8);
    for (double alpha : {1.0, 0.6, 0.3}) {
        for (double l_x : {0.5, 1.0, 3.0}) {
            EnvSpec spec;
            spec.alpha = alpha;
            spec.l_x = l_x;
            spec.seed = static_cast<std::uint64_t>(alpha * 100 + l_x);
            const RewardModel model(spec);
            for (int k = 0; k < 10000; ++k) {
                const ContextPoint a{{uniform01(rng), uniform01(rng)}};
                const ContextPoint b{{uniform01(rng), uniform01(rng)}};
                const CourseItem c{1, {uniform01(rng), uniform01(rng), uniform01(rng)}};
                const double gap = std::abs(model.mean_reward(a, c) - model.mean_reward(b, c));
                const double dist = std::hypot(a.coords[0] - b.coords[0], a.coords[1] - b.coords[1]);
                ASSERT_LE(gap, l_x * std::pow(dist, alpha) + 1e-9);
            }
        }
    }
}

TEST(RewardModel, ContextFreeFamilyIgnoresContext)
{
    EnvSpec spec;
    spec.family = RewardFamily::context_free;
    const RewardModel model(spec);
    const CourseItem c{1, {0.1, 0.5, 0.7}};
    EXPECT_EQ(model.mean_reward(ContextPoint{{0.0, 0.0}}, c), model.mean_reward(ContextPoint{{1.0, 0.3}}, c));
}

TEST(ContextStream, SamplesStayInTheCube)
{
    for (ContextDistribution kind : {ContextDistribution::uniform, ContextDistribution::mixture}) {
        EnvSpec spec;
        spec.contexts = kind;
        spec.d_x = 3;
        ContextStream stream(spec, 11);
        ContextStream again(spec, 11);
        for (int k = 0; k < 5000; ++k) {
            const ContextPoint x = stream.next();
            ASSERT_EQ(x.dim(), 3U);
            for (double v : x.coords) {
                ASSERT_GE(v, 0.0);
                ASSERT_LE(v, 1.0);
            }
            ASSERT_EQ(x.coords, again.next().coords);
        }
    }
}

TEST(Oracle, TwoItemArgmax)
{
    EnvSpec spec;
    spec.family = RewardFamily::context_free;
    const RewardModel model(spec);
    const ContextPoint x{{0.5, 0.5}};
    const std::vector<double> g = model.ideal_item(x);
    // Item 2 sits on the peak; item 1 is 0.25 away along dim 0.
    std::vector<double> off = g;
    off[0] = g[0] > 0.5 ? g[0] - 0.25 : g[0] + 0.25;
    const ItemStore store = store_of({CourseItem{1, off}, CourseItem{2, g}}, 3);
    const OracleResult best = oracle_at(model, x, store);
    EXPECT_EQ(best.item, 2);
    EXPECT_NEAR(best.value, 0.9, 1e-15);
    EXPECT_NEAR(model.mean_reward(x, store.get(1)), 0.8 * 0.5 + 0.1, 1e-12);
}

TEST(Oracle, TiesGoToLowestId)
{
    const RewardModel model{EnvSpec{}};
    const ItemStore store = store_of({CourseItem{9, {0.5, 0.5, 0.5}}, CourseItem{3, {0.5, 0.5, 0.5}}}, 3);
    EXPECT_EQ(oracle_at(model, ContextPoint{{0.5, 0.5}}, store).item, 3);
}

TEST(Oracle, AddingABetterItemRaisesTheValue)
{
    const RewardModel model{EnvSpec{}};
    ItemStore store = store_of(synthetic_items(50, 3, 4), 3);
    const PartitionConfig partition{2, 2, 1.0, 1.0};
    const CellId cell{{1, 0}};
    const double before = oracle_best(model, cell, partition, store).value;
    store.add(CourseItem{1000, model.ideal_item(cell_center(cell, partition))});
    const OracleResult after = oracle_best(model, cell, partition, store);
    EXPECT_GT(after.value, before);
    EXPECT_EQ(after.item, 1000);
}

TEST(Oracle, MatchesIndependentLinearScan)
{
    const EnvSpec spec;
    const RewardModel model(spec);
    const auto items = synthetic_items(10000, 3, 21);
    const ItemStore store = store_of(items, 3);
    const std::vector<double> x{0.2, 0.85};
    ItemId best_id = 0;
    double best = -1.0;
    for (const CourseItem& c : items) {
        const double v = reference_mean(spec, x, c.features);
        if (v > best) {
            best = v;
            best_id = c.id;
        }
    }
    const OracleResult r = oracle_at(model, ContextPoint{x}, store);
    EXPECT_EQ(r.item, best_id);
    EXPECT_NEAR(r.value, best, 1e-12);
    EXPECT_THROW(oracle_at(model, ContextPoint{x}, ItemStore(3)), Error);
}
