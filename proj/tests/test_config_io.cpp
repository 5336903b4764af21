#include <gtest/gtest.h>

#include <sstream>

#include "rht/config.hpp"
#include "rht/items_io.hpp"

using namespace rht;

namespace {

ConfigSource parse(const std::string& text)
{
    std::istringstream in(text);
    return ConfigSource::parse(in);
}

std::string error_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

ItemFile items_from(const std::string& text, int d_c)
{
    std::istringstream in(text);
    return read_items(in, d_c);
}

} // namespace

TEST(ConfigSource, ParsesKeysCommentsAndBlankLines)
{
    const RunConfig cfg = parse("# sample\n"
                                "policy = rht-nocontext\n"
                                "\n"
                                "horizon = 5000   # rounds\n"
                                "replicas=3\n"
                                "env.sigma = 0.05\n"
                                "env.family = context-free\n"
                                "checkpoints = 10, 100, 5000\n")
                              .build();
    EXPECT_EQ(cfg.policy.name, "rht-nocontext");
    EXPECT_EQ(cfg.policy.n_t, 1);
    EXPECT_EQ(cfg.experiment.horizon, 5000U);
    EXPECT_EQ(cfg.experiment.replicas, 3);
    EXPECT_EQ(cfg.env.sigma, 0.05);
    EXPECT_EQ(cfg.env.family, RewardFamily::context_free);
    EXPECT_EQ(cfg.experiment.checkpoints, (std::vector<std::uint64_t>{10, 100, 5000}));
}

TEST(ConfigSource, ErrorsCiteTheLine)
{
    EXPECT_NE(error_of([] { parse("horizon = 10\nbogus = 1\n"); }).find("line 2: unknown key 'bogus'"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse("horizon = 10\n\nhorizon = 20\n"); }).find("line 3"), std::string::npos);
    EXPECT_NE(error_of([] { parse("horizon 10\n"); }).find("line 1"), std::string::npos);
    EXPECT_NE(error_of([] { parse("seed = 1\nhorizon = ten\n").build(); }).find("line 2: horizon"),
              std::string::npos);
    EXPECT_NE(error_of([] { parse("z = -3\n").build(); }).find("line 1: z"), std::string::npos);
    EXPECT_NE(error_of([] { parse("policy = magic\n").build(); }).find("unknown policy"), std::string::npos);
    EXPECT_NE(error_of([] { parse("window_fraction = 0\n").build(); }).find("window fraction"), std::string::npos);
}

TEST(ConfigSource, OverridesReplaceFileValues)
{
    ConfigSource src = parse("horizon = 5000\nseed = 3\n");
    src.set("horizon", "777", "--horizon");
    src.set("n_t", "4", "--n-t");
    const RunConfig cfg = src.build();
    EXPECT_EQ(cfg.experiment.horizon, 777U);
    EXPECT_EQ(cfg.experiment.seed, 3U);
    EXPECT_EQ(cfg.policy.n_t, 4);
    EXPECT_EQ(src.entries().at("horizon").origin, "--horizon");
    EXPECT_NE(error_of([&] { src.set("nope", "1", "--set"); }).find("--set: unknown key"), std::string::npos);
    src.set("units", "x", "--units");
    EXPECT_NE(error_of([&] { src.build(); }).find("--units: units"), std::string::npos);
}

TEST(ConfigSource, PolicyIsAppliedBeforeRefinements)
{
    // std::map orders keys; "k2" sorts before "policy" but must survive it.
    const RunConfig cfg = parse("k2 = 0.5\npolicy = dsrht\nunits = 8\nz = auto-min\nshard = hash\n").build();
    EXPECT_EQ(cfg.policy.kind, PolicyKind::dsrht);
    EXPECT_EQ(cfg.policy.k2, 0.5);
    EXPECT_EQ(cfg.policy.units, 8);
    EXPECT_EQ(cfg.policy.shard, ShardMode::hash);
    EXPECT_EQ(resolve_policy(cfg.policy, cfg.env, 100000).engine.z, 3);
}

TEST(ConfigEcho, RoundTripsTheResolvedRun)
{
    for (const std::string& text :
         {std::string("policy = rht-full\nhorizon = 10000\n"),
          std::string("policy = dsrht-opt\nhorizon = 100000\nalpha = 0.5\nenv.sigma = 0.2\n"),
          std::string("policy = dsrht\nunits = 5\nhorizon = 3000\nshard = hash\ncheckpoints = 1,10,3000\n"),
          std::string("policy = uniform-random\nhorizon = 50\nitems_file = x.csv\n")}) {
        const RunConfig cfg = parse(text).build();
        const ResolvedPolicy resolved = resolve_policy(cfg.policy, cfg.env, cfg.experiment.horizon);
        std::ostringstream echo;
        write_config_echo(echo, cfg, resolved);

        const RunConfig again = parse(echo.str()).build();
        const ResolvedPolicy resolved_again = resolve_policy(again.policy, again.env, again.experiment.horizon);
        EXPECT_EQ(resolved_again.engine.partition.n_t, resolved.engine.partition.n_t) << text;
        EXPECT_EQ(resolved_again.engine.z, resolved.engine.z) << text;
        EXPECT_EQ(resolved_again.engine.units, resolved.engine.units) << text;
        EXPECT_EQ(resolved_again.engine.distributed, resolved.engine.distributed) << text;
        EXPECT_EQ(again.policy.kind, cfg.policy.kind) << text;
        EXPECT_EQ(again.policy.name, cfg.policy.name) << text;
        EXPECT_EQ(again.env.alpha, cfg.env.alpha) << text;
        EXPECT_EQ(again.env.sigma, cfg.env.sigma) << text;
        EXPECT_EQ(again.experiment.checkpoints, cfg.experiment.checkpoints) << text;
        EXPECT_EQ(again.items_file, cfg.items_file) << text;

        std::ostringstream echo_again;
        write_config_echo(echo_again, again, resolved_again);
        EXPECT_EQ(echo_again.str(), echo.str());
    }
}

TEST(ReadItems, ThreeLines)
{
    const ItemFile f = items_from("1,0.1,0.2,0.3\n2,0.4,0.5,0.6\n3,0.7,0.8,0.9\n", 3);
    ASSERT_EQ(f.items.size(), 3U);
    EXPECT_EQ(f.items[1].id, 2);
    EXPECT_EQ(f.items[2].features, (std::vector<double>{0.7, 0.8, 0.9}));
    EXPECT_FALSE(f.has_units());
}

TEST(ReadItems, UnitColumnAndShortRows)
{
    const ItemFile f = items_from("# id,f1,f2,unit\n\n10,0.5,0.5,2\n11,0.25\n", 2);
    ASSERT_EQ(f.items.size(), 2U);
    EXPECT_EQ(f.units, (std::vector<int>{2, 0}));
    EXPECT_EQ(f.lines, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(f.items[1].features, (std::vector<double>{0.25}));
    EXPECT_TRUE(f.has_units());
}

TEST(ReadItems, DuplicateCitesBothLines)
{
    std::string text;
    for (int k = 1; k <= 6; ++k) {
        text += std::to_string(k) + ",0.5,0.5,0.5\n";
    }
    text += "4,0.1,0.1,0.1\n";
    try {
        items_from(text, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::duplicate_item);
        EXPECT_EQ(e.detail(), "line 7: duplicate item id 4 (first seen on line 4)");
    }
}

TEST(ReadItems, MalformedRows)
{
    EXPECT_NE(error_of([] { items_from("x,0.1\n", 2); }).find("line 1"), std::string::npos);
    EXPECT_NE(error_of([] { items_from("1,0.1\n2,abc\n", 2); }).find("line 2"), std::string::npos);
    EXPECT_NE(error_of([] { items_from("1,0.1,0.2,0.3,4\n", 2); }).find("expected at most"), std::string::npos);
    EXPECT_NE(error_of([] { items_from("1,1.5\n", 2); }).find("outside [0,1]"), std::string::npos);
    EXPECT_NE(error_of([] { items_from("1,0.5,0.5,0\n", 2); }).find("unit"), std::string::npos);
}

TEST(WriteItems, ReadsBackExactly)
{
    const std::vector<CourseItem> items = synthetic_items(50, 4, 3);
    std::vector<int> units;
    for (std::size_t k = 0; k < items.size(); ++k) {
        units.push_back(static_cast<int>(k % 3) + 1);
    }
    std::ostringstream out;
    write_items(out, items, units);
    const ItemFile f = items_from(out.str(), 4);
    ASSERT_EQ(f.items.size(), items.size());
    for (std::size_t k = 0; k < items.size(); ++k) {
        EXPECT_EQ(f.items[k].id, items[k].id);
        EXPECT_EQ(f.items[k].features, items[k].features);
    }
    EXPECT_EQ(f.units, units);
}

TEST(HashShard, SpreadsEvenly)
{
    std::vector<int> counts(3, 0);
    for (const CourseItem& c : synthetic_items(10000, 2, 5)) {
        ++counts[static_cast<std::size_t>(shard_unit(ShardMode::hash, c.id, 0, 3) - 1)];
    }
    for (int n : counts) {
        EXPECT_NEAR(n, 10000.0 / 3.0, 10000.0 / 3.0 * 0.1);
    }
}
