#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/distributed_forest.hpp"
#include "rht/engine.hpp"
#include "rht/environment.hpp"
#include "rht/error.hpp"
#include "rht/invariants.hpp"
#include "rht/random.hpp"

namespace rht {

enum class PolicyKind { rht, dsrht, uniform_random };
enum class ZMode { fixed, auto_min, auto_optimal };

/// A named engine configuration before horizon-dependent parameters
/// (n_T, z) are resolved.
struct PolicySpec {
    std::string name = "rht-full";
    PolicyKind kind = PolicyKind::rht;
    std::optional<int> n_t; // unset: slicing number from the horizon
    double k1 = 1.0;
    double m = 0.5;
    double k2 = 2.0;
    int units = 1;
    ZMode z_mode = ZMode::auto_min;
    int z = 0;
    // Use d = 2^z real units (z picked first, items spread over all units).
    bool fill_units = false;
    ShardMode shard = ShardMode::round_robin;
    // Prefer unit ids read from the item file over `shard`.
    bool use_file_units = true;
};

/// The item universe of an experiment: features plus optional unit ids read
/// from an ingestion file.
struct World {
    std::vector<CourseItem> items;
    std::vector<int> file_units;
};

inline World synthetic_world(const EnvSpec& env)
{
    return World{synthetic_items(env.items, env.d_c, env.seed), {}};
}

struct ScheduledArrival {
    std::uint64_t round = 0; // the item joins before this round is served
    CourseItem item;
    int unit = 0; // 0: shard like any other arrival
};

struct ExperimentSpec {
    std::uint64_t horizon = 1000;
    int replicas = 1;
    std::uint64_t seed = 1;
    // Rounds at which a checkpoint row is recorded. Empty: powers of two
    // up to the horizon, plus the horizon itself.
    std::vector<std::uint64_t> checkpoints;
    double arrival_rate = 0.0; // random new items per 1000 rounds
    std::vector<ScheduledArrival> scheduled;
    bool discretization = true;
    int jobs = 1;
    double window_fraction = 0.1;
    // Grid on which regret is measured. Unset: the slicing number for the
    // horizon, so policies with different n_T share one yardstick.
    std::optional<int> eval_n_t;
    // Keep each replica's final engine in its result (for checkpoints).
    bool keep_engines = false;
};

inline PartitionConfig evaluation_partition(const EnvSpec& env, const ExperimentSpec& exp)
{
    PartitionConfig p;
    p.d_x = env.d_x;
    p.alpha = env.alpha;
    p.l_x = env.l_x;
    p.n_t = exp.eval_n_t ? *exp.eval_n_t : compute_slicing_number(exp.horizon, env.alpha, env.d_x, env.d_c);
    p.validate();
    return p;
}

/// One served round.
struct RunRecord {
    std::uint64_t round = 0;
    CellId cell;
    ItemId item = 0;
    double reward = 0.0;
    double oracle_value = 0.0;
    double chosen_value = 0.0; // f(center, chosen)
    double regret = 0.0;
    double cumulative_regret = 0.0;
    std::size_t nodes = 0;
};

struct CheckpointRow {
    std::string run_id;
    std::string policy;
    std::string seed;
    std::uint64_t t = 0;
    double cum_regret = 0.0;
    double avg_regret = 0.0;
    double accuracy = 0.0;
    double nodes = 0.0;
    double discretization_regret = 0.0;
};

struct ReplicaResult {
    std::uint64_t seed = 0;
    std::vector<CheckpointRow> rows;
    double window_accuracy = 0.0; // mean f(center, chosen) over the final window
    double window_oracle = 0.0;   // mean oracle value over the same rounds
    double average_oracle = 0.0;
    std::size_t final_nodes = 0;
    // Empty when the final engine passed every invariant check.
    std::vector<std::string> invariant_violations;
    std::shared_ptr<const Engine> engine; // set when keep_engines is on
};

/// Parameters the run actually used after resolving "auto" settings.
struct ResolvedPolicy {
    PolicySpec spec;
    EngineConfig engine;
};

struct SummaryReport {
    ResolvedPolicy policy;
    EnvSpec env;
    ExperimentSpec experiment;
    std::vector<ReplicaResult> replicas;
    std::vector<CheckpointRow> aggregate;
    double fitted_slope = std::nan("");
    std::size_t slope_points_excluded = 0; // checkpoints with zero regret
    double theoretical_exponent = 0.0;
};

/// Regret growth exponent (d_X + α(d_C+2)) / (d_X + α(d_C+3)).
inline double theoretical_exponent(double alpha, int d_x, int d_c)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_config, "alpha must lie in (0,1]");
    }
    return (d_x + alpha * (d_c + 2)) / (d_x + alpha * (d_c + 3));
}

struct SlopeFit {
    double slope = std::nan("");
    std::size_t used = 0;
    std::size_t excluded = 0;
};

/// Least-squares slope of log R against log T. Points with R <= 0 are
/// dropped and counted in `excluded`.
inline SlopeFit fit_regret_slope(const std::vector<std::pair<double, double>>& checkpoints)
{
    for (std::size_t k = 1; k < checkpoints.size(); ++k) {
        if (!(checkpoints[k].first > checkpoints[k - 1].first)) {
            throw Error(ErrorCode::invalid_config, "checkpoint horizons must be strictly increasing");
        }
    }
    SlopeFit fit;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [t, r] : checkpoints) {
        if (!(r > 0.0) || !(t > 0.0)) {
            ++fit.excluded;
            continue;
        }
        const double x = std::log(t);
        const double y = std::log(r);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++fit.used;
    }
    if (fit.used < 3) {
        throw Error(ErrorCode::invalid_config, "need at least 3 positive checkpoints to fit a slope");
    }
    const double n = static_cast<double>(fit.used);
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return fit;
}

inline std::vector<std::uint64_t> power_of_two_checkpoints(std::uint64_t horizon)
{
    std::vector<std::uint64_t> out;
    for (std::uint64_t t = 1; t <= horizon; t *= 2) {
        out.push_back(t);
    }
    if (out.empty() || out.back() != horizon) {
        out.push_back(horizon);
    }
    return out;
}

/// rht-full, rht-nocontext (n_T = 1), dsrht-z0, dsrht-z10, dsrht-opt and
/// uniform-random.
inline std::vector<PolicySpec> baseline_configs()
{
    std::vector<PolicySpec> out;
    PolicySpec full;
    full.name = "rht-full";
    out.push_back(full);

    PolicySpec nocontext = full;
    nocontext.name = "rht-nocontext";
    nocontext.n_t = 1;
    out.push_back(nocontext);

    PolicySpec z0 = full;
    z0.name = "dsrht-z0";
    z0.kind = PolicyKind::dsrht;
    z0.z_mode = ZMode::fixed;
    z0.z = 0;
    z0.units = 1;
    out.push_back(z0);

    PolicySpec z10 = z0;
    z10.name = "dsrht-z10";
    z10.z = 10;
    z10.fill_units = true;
    out.push_back(z10);

    PolicySpec opt = z0;
    opt.name = "dsrht-opt";
    opt.z_mode = ZMode::auto_optimal;
    opt.fill_units = true;
    out.push_back(opt);

    PolicySpec uniform = full;
    uniform.name = "uniform-random";
    uniform.kind = PolicyKind::uniform_random;
    out.push_back(uniform);
    return out;
}

inline std::optional<PolicySpec> find_baseline(const std::string& name)
{
    for (PolicySpec& p : baseline_configs()) {
        if (p.name == name) {
            return p;
        }
    }
    return std::nullopt;
}

inline ResolvedPolicy resolve_policy(const PolicySpec& spec, const EnvSpec& env, std::uint64_t horizon)
{
    ResolvedPolicy out{spec, {}};
    EngineConfig& e = out.engine;
    e.horizon = horizon;
    e.partition.d_x = env.d_x;
    e.partition.alpha = env.alpha;
    e.partition.l_x = env.l_x;
    e.partition.n_t = spec.n_t ? *spec.n_t : compute_slicing_number(horizon, env.alpha, env.d_x, env.d_c);
    e.k1 = spec.k1;
    e.m = spec.m;
    e.k2 = spec.k2;
    if (spec.kind == PolicyKind::dsrht) {
        e.distributed = true;
        switch (spec.z_mode) {
        case ZMode::fixed: e.z = spec.z; break;
        case ZMode::auto_min: e.z = depth_for_units(spec.units); break;
        case ZMode::auto_optimal: e.z = optimal_unit_exponent(horizon, env.alpha, env.d_x, env.d_c); break;
        }
        e.units = spec.fill_units ? (1 << e.z) : spec.units;
    }
    e.validate();
    return out;
}

namespace detail {

inline ItemStore build_store(const World& world, const ResolvedPolicy& policy, int d_c)
{
    ItemStore store(d_c);
    const bool sharded = policy.engine.units > 1;
    for (std::size_t k = 0; k < world.items.size(); ++k) {
        int unit = 1;
        if (sharded) {
            if (policy.spec.use_file_units && !world.file_units.empty() && world.file_units[k] != 0) {
                unit = world.file_units[k];
            } else {
                unit = shard_unit(policy.spec.shard, world.items[k].id, k, policy.engine.units);
            }
        }
        store.add(world.items[k], unit);
    }
    return store;
}

/// Mean of a set of rows sharing a checkpoint.
inline CheckpointRow average_rows(const std::vector<const CheckpointRow*>& rows, const std::string& policy)
{
    CheckpointRow out;
    out.run_id = policy + "-mean";
    out.policy = policy;
    out.seed = "all";
    out.t = rows.front()->t;
    for (const CheckpointRow* r : rows) {
        out.cum_regret += r->cum_regret;
        out.avg_regret += r->avg_regret;
        out.accuracy += r->accuracy;
        out.nodes += r->nodes;
        out.discretization_regret += r->discretization_regret;
    }
    const double n = static_cast<double>(rows.size());
    out.cum_regret /= n;
    out.avg_regret /= n;
    out.accuracy /= n;
    out.nodes /= n;
    out.discretization_regret /= n;
    return out;
}

} // namespace detail

using RecordSink = std::function<void(const RunRecord&)>;

/// Serves `horizon` rounds of one replica. Regret is the expected loss at
/// the cell center: oracle mean minus the chosen item's mean.
inline ReplicaResult run_replica(const ResolvedPolicy& policy, const EnvSpec& env, const World& world,
                                 const ExperimentSpec& exp, int replica, const RecordSink& sink = {})
{
    const std::uint64_t seed = exp.seed + static_cast<std::uint64_t>(replica);
    const RewardModel model(env);
    ContextStream contexts(env, seed);
    Rng engine_rng(derive_seed(seed, 1));
    Rng noise_rng(derive_seed(seed, 2));
    Rng arrival_rng(derive_seed(seed, 3));

    const PartitionConfig partition = evaluation_partition(env, exp);
    const bool random_policy = policy.spec.kind == PolicyKind::uniform_random;
    std::shared_ptr<Engine> engine;
    ItemStore plain_store(env.d_c);
    if (random_policy) {
        plain_store = detail::build_store(world, policy, env.d_c);
    } else {
        engine = std::make_shared<Engine>(policy.engine, detail::build_store(world, policy, env.d_c));
    }
    auto store = [&]() -> const ItemStore& { return engine ? engine->store() : plain_store; };

    ItemId next_id = 1;
    for (const CourseItem& c : world.items) {
        next_id = std::max(next_id, c.id + 1);
    }
    std::size_t ordinal = world.items.size();
    auto add_item = [&](CourseItem c, int unit) {
        if (unit == 0) {
            unit = policy.engine.units > 1 ? shard_unit(policy.spec.shard, c.id, ordinal, policy.engine.units) : 1;
        }
        ++ordinal;
        next_id = std::max(next_id, c.id + 1);
        if (engine) {
            engine->add_course(std::move(c), unit);
        } else {
            plain_store.add(std::move(c), unit);
        }
    };

    std::vector<std::uint64_t> checkpoints = exp.checkpoints.empty() ? power_of_two_checkpoints(exp.horizon)
                                                                      : exp.checkpoints;
    std::sort(checkpoints.begin(), checkpoints.end());
    std::size_t next_checkpoint = 0;
    std::vector<ScheduledArrival> scheduled = exp.scheduled;
    std::stable_sort(scheduled.begin(), scheduled.end(),
                     [](const ScheduledArrival& a, const ScheduledArrival& b) { return a.round < b.round; });
    std::size_t next_scheduled = 0;

    std::map<CellId, OracleResult> oracle_cache;
    ReplicaResult result;
    result.seed = seed;
    const std::uint64_t window_start =
        exp.horizon - static_cast<std::uint64_t>(std::floor(exp.window_fraction * static_cast<double>(exp.horizon)));
    double cum_regret = 0.0, cum_value = 0.0, cum_oracle = 0.0, cum_disc = 0.0;
    double window_value = 0.0, window_oracle = 0.0;
    std::uint64_t window_rounds = 0;

    for (std::uint64_t t = 1; t <= exp.horizon; ++t) {
        bool items_changed = false;
        while (next_scheduled < scheduled.size() && scheduled[next_scheduled].round <= t) {
            add_item(scheduled[next_scheduled].item, scheduled[next_scheduled].unit);
            ++next_scheduled;
            items_changed = true;
        }
        if (exp.arrival_rate > 0.0) {
            const auto due = static_cast<std::uint64_t>(std::floor(exp.arrival_rate * static_cast<double>(t) / 1000.0)) -
                             static_cast<std::uint64_t>(std::floor(exp.arrival_rate * static_cast<double>(t - 1) / 1000.0));
            for (std::uint64_t k = 0; k < due; ++k) {
                CourseItem c = synthetic_items(1, env.d_c, arrival_rng(), next_id).front();
                add_item(std::move(c), 0);
                items_changed = true;
            }
        }
        if (items_changed) {
            oracle_cache.clear();
        }

        const ContextPoint x = contexts.next();
        const CellId cell = locate_cell(x, partition);
        const ContextPoint center = cell_center(cell, partition);
        auto cached = oracle_cache.find(cell);
        if (cached == oracle_cache.end()) {
            cached = oracle_cache.emplace(cell, oracle_best(model, cell, partition, store())).first;
        }
        const OracleResult oracle = cached->second;

        ItemId chosen;
        std::optional<Recommendation> rec;
        if (engine) {
            rec = engine->recommend(x, engine_rng);
            chosen = rec->item;
        } else {
            chosen = store().items()[uniform_index(engine_rng, store().size())].id;
        }
        const CourseItem& item = store().get(chosen);
        const double reward = model.sample_reward(x, item, noise_rng);
        if (rec) {
            engine->feedback(*rec, reward);
        }

        const double chosen_value = model.mean_reward(center, item);
        const double regret = oracle.value - chosen_value;
        cum_regret += regret;
        cum_value += chosen_value;
        cum_oracle += oracle.value;
        if (exp.discretization) {
            const double exact_regret = oracle_at(model, x, store()).value - model.mean_reward(x, item);
            cum_disc += exact_regret - regret;
        }
        if (t > window_start) {
            window_value += chosen_value;
            window_oracle += oracle.value;
            ++window_rounds;
        }

        const bool at_checkpoint = next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == t;
        if (sink || at_checkpoint) {
            const std::size_t nodes = engine ? engine->storage_counters().nodes : 0;
            if (sink) {
                sink(RunRecord{t, cell, chosen, reward, oracle.value, chosen_value, regret, cum_regret, nodes});
            }
            if (at_checkpoint) {
                CheckpointRow row;
                row.policy = policy.spec.name;
                row.run_id = policy.spec.name + "-r" + std::to_string(replica);
                row.seed = std::to_string(seed);
                row.t = t;
                row.cum_regret = cum_regret;
                row.avg_regret = cum_regret / static_cast<double>(t);
                row.accuracy = cum_value / static_cast<double>(t);
                row.nodes = static_cast<double>(nodes);
                row.discretization_regret = cum_disc;
                result.rows.push_back(std::move(row));
                ++next_checkpoint;
            }
        }
        while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] <= t) {
            ++next_checkpoint;
        }
    }
    result.window_accuracy = window_rounds ? window_value / static_cast<double>(window_rounds) : 0.0;
    result.window_oracle = window_rounds ? window_oracle / static_cast<double>(window_rounds) : 0.0;
    result.average_oracle = cum_oracle / static_cast<double>(exp.horizon);
    result.final_nodes = engine ? engine->storage_counters().nodes : 0;
    if (engine) {
        result.invariant_violations = verify_engine(*engine).violations;
        if (exp.keep_engines) {
            result.engine = engine;
        }
    }
    return result;
}

/// Runs every replica (in parallel when exp.jobs > 1) and aggregates the
/// checkpoint rows. Replica r uses seed exp.seed + r.
inline SummaryReport run_experiment(const PolicySpec& spec, const EnvSpec& env, const World& world,
                                    const ExperimentSpec& exp)
{
    if (exp.horizon < 3) {
        throw Error(ErrorCode::horizon_too_small, "horizon " + std::to_string(exp.horizon) + " < 3");
    }
    if (exp.replicas < 1) {
        throw Error(ErrorCode::invalid_config, "replicas must be positive");
    }
    env.validate();
    for (const CourseItem& c : world.items) {
        if (static_cast<int>(c.features.size()) > env.d_c) {
            throw Error(ErrorCode::dimension_mismatch, "item " + std::to_string(c.id) + " has more features than d_c");
        }
    }
    SummaryReport report;
    report.policy = resolve_policy(spec, env, exp.horizon);
    report.env = env;
    report.experiment = exp;
    report.theoretical_exponent = theoretical_exponent(env.alpha, env.d_x, env.d_c);
    report.replicas.resize(static_cast<std::size_t>(exp.replicas));

    const int jobs = std::max(1, std::min(exp.jobs, exp.replicas));
    if (jobs == 1) {
        for (int r = 0; r < exp.replicas; ++r) {
            report.replicas[static_cast<std::size_t>(r)] = run_replica(report.policy, env, world, exp, r);
        }
    } else {
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(exp.replicas));
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                for (int r = w; r < exp.replicas; r += jobs) {
                    try {
                        report.replicas[static_cast<std::size_t>(r)] = run_replica(report.policy, env, world, exp, r);
                    } catch (...) {
                        errors[static_cast<std::size_t>(r)] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : workers) {
            th.join();
        }
        for (auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }

    const std::size_t n_rows = report.replicas.front().rows.size();
    std::vector<std::pair<double, double>> curve;
    for (std::size_t k = 0; k < n_rows; ++k) {
        std::vector<const CheckpointRow*> rows;
        for (const ReplicaResult& r : report.replicas) {
            rows.push_back(&r.rows[k]);
        }
        report.aggregate.push_back(detail::average_rows(rows, spec.name));
        curve.emplace_back(static_cast<double>(report.aggregate.back().t), report.aggregate.back().cum_regret);
    }
    try {
        const SlopeFit fit = fit_regret_slope(curve);
        report.fitted_slope = fit.slope;
        report.slope_points_excluded = fit.excluded;
    } catch (const Error&) {
        // Too few positive checkpoints; the slope stays NaN.
    }
    return report;
}

inline std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_csv_header(std::ostream& os)
{
    os << "run_id,policy,seed,T,cum_regret,avg_regret,accuracy,nodes,discretization_regret\n";
}

inline void write_csv_row(std::ostream& os, const CheckpointRow& r)
{
    os << r.run_id << ',' << r.policy << ',' << r.seed << ',' << r.t << ',' << format_number(r.cum_regret) << ','
       << format_number(r.avg_regret) << ',' << format_number(r.accuracy) << ',' << format_number(r.nodes) << ','
       << format_number(r.discretization_regret) << '\n';
}

/// Replica rows first, then the aggregate rows, for each report in order.
inline void write_csv(std::ostream& os, const std::vector<SummaryReport>& reports)
{
    write_csv_header(os);
    for (const SummaryReport& rep : reports) {
        for (const ReplicaResult& r : rep.replicas) {
            for (const CheckpointRow& row : r.rows) {
                write_csv_row(os, row);
            }
        }
        for (const CheckpointRow& row : rep.aggregate) {
            write_csv_row(os, row);
        }
    }
}

} // namespace rht
