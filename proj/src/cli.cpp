#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "rht/rht.hpp"

namespace rht::cli {
namespace {

std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    for (const std::string& part : detail::split_commas(s)) {
        if (!part.empty()) {
            out.push_back(part);
        }
    }
    return out;
}

World load_world(const RunConfig& cfg)
{
    if (!cfg.items_file) {
        return synthetic_world(cfg.env);
    }
    ItemFile file = read_items_file(*cfg.items_file, cfg.env.d_c);
    World w;
    w.items = std::move(file.items);
    if (file.has_units()) {
        w.file_units = std::move(file.units);
    }
    return w;
}

struct RunFlags {
    std::optional<std::string> config;
    std::map<std::string, std::string> overrides; // config key -> value
    std::vector<std::string> sets;
};

/// Accuracy grid at k x 10^5 rounds, one row per policy.
void print_table(std::ostream& out, const std::vector<SummaryReport>& reports)
{
    std::vector<std::uint64_t> columns;
    for (std::uint64_t k = 1; k <= 6; ++k) {
        columns.push_back(k * 100000);
    }
    out << "accuracy (mean reward of chosen items, %)\n";
    out << std::left << std::setw(18) << "policy";
    for (std::uint64_t c : columns) {
        out << std::right << std::setw(10) << (std::to_string(c / 100000) + "e5");
    }
    out << '\n';
    for (const SummaryReport& rep : reports) {
        out << std::left << std::setw(18) << rep.policy.spec.name;
        for (std::uint64_t c : columns) {
            std::string cell = "-";
            for (const CheckpointRow& row : rep.aggregate) {
                if (row.t == c) {
                    cell = fixed(100.0 * row.accuracy, 2);
                }
            }
            out << std::right << std::setw(10) << cell;
        }
        out << '\n';
    }
}

int cmd_run(const RunFlags& flags, std::ostream& out, std::ostream& err)
{
    ConfigSource src = flags.config ? ConfigSource::load(*flags.config) : ConfigSource{};
    for (const auto& [key, value] : flags.overrides) {
        src.set(key, value, "--" + key);
    }
    for (const std::string& kv : flags.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::invalid_config, "--set expects key=value, got '" + kv + "'");
        }
        src.set(detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)), "--set " + kv);
    }
    std::vector<std::string> policies{"rht-full"};
    std::string policy_origin = "default";
    if (auto it = src.entries().find("policy"); it != src.entries().end()) {
        policies = split_list(it->second.value);
        policy_origin = it->second.origin;
        if (policies.empty()) {
            throw Error(ErrorCode::invalid_config, policy_origin + ": policy: empty policy list");
        }
    }

    std::vector<SummaryReport> reports;
    std::vector<RunConfig> configs;
    bool gates_ok = true;
    for (const std::string& name : policies) {
        ConfigSource one = src;
        one.set("policy", name, policy_origin);
        RunConfig cfg = one.build();
        if (cfg.emit_table) {
            auto& cps = cfg.experiment.checkpoints;
            if (cps.empty()) {
                cps = power_of_two_checkpoints(cfg.experiment.horizon);
            }
            for (std::uint64_t k = 1; k <= 6; ++k) {
                if (k * 100000 <= cfg.experiment.horizon) {
                    cps.push_back(k * 100000);
                }
            }
            std::sort(cps.begin(), cps.end());
            cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
        }
        cfg.experiment.keep_engines = cfg.checkpoint.has_value();
        const World world = load_world(cfg);
        SummaryReport rep = run_experiment(cfg.policy, cfg.env, world, cfg.experiment);

        for (const ReplicaResult& r : rep.replicas) {
            for (const std::string& v : r.invariant_violations) {
                err << "invariant violation (" << rep.policy.spec.name << ", seed " << r.seed << "): " << v << '\n';
                gates_ok = false;
            }
        }
        if (cfg.out != "-") {
            const std::string echo_path = cfg.out + "." + rep.policy.spec.name + ".conf";
            std::ofstream echo(echo_path);
            if (!echo) {
                throw Error(ErrorCode::invalid_config, "cannot write " + echo_path);
            }
            write_config_echo(echo, cfg, rep.policy);
        }
        if (cfg.checkpoint && rep.replicas.front().engine) {
            const std::string path = policies.size() == 1 ? *cfg.checkpoint : *cfg.checkpoint + "." + name;
            save_checkpoint(path, capture(*rep.replicas.front().engine));
            for (ReplicaResult& r : rep.replicas) {
                r.engine.reset();
            }
        }
        reports.push_back(std::move(rep));
        configs.push_back(std::move(cfg));
    }

    const std::string& out_path = configs.front().out;
    if (out_path == "-") {
        write_csv(out, reports);
    } else {
        std::ofstream csv(out_path, std::ios::binary);
        if (!csv) {
            throw Error(ErrorCode::invalid_config, "cannot write " + out_path);
        }
        write_csv(csv, reports);
    }

    auto& log = out_path == "-" ? err : out;
    for (const SummaryReport& rep : reports) {
        const EngineConfig& e = rep.policy.engine;
        const CheckpointRow& last = rep.aggregate.back();
        log << rep.policy.spec.name << ": n_T=" << e.partition.n_t << " z=" << e.z << " units=" << e.units
            << " replicas=" << rep.replicas.size() << " T=" << last.t << " cum_regret=" << format_number(last.cum_regret)
            << " accuracy=" << format_number(last.accuracy) << " slope=" << format_number(rep.fitted_slope)
            << " (theory " << format_number(rep.theoretical_exponent) << ")\n";
        if (rep.slope_points_excluded > 0) {
            err << "warning: " << rep.policy.spec.name << ": " << rep.slope_points_excluded
                << " checkpoint(s) with nonpositive regret left out of the slope fit\n";
        }
    }
    if (configs.front().emit_table) {
        print_table(log, reports);
    }
    if (!gates_ok) {
        err << "error: invariant gate failed\n";
        return exit_invariants;
    }
    return exit_ok;
}

int cmd_ingest(const std::string& file, int d_c, int units, const std::string& shard, const std::string& out_path,
               std::ostream& out)
{
    if (units < 1) {
        throw Error(ErrorCode::invalid_config, "--units must be positive");
    }
    ShardMode mode;
    if (shard == "round-robin") {
        mode = ShardMode::round_robin;
    } else if (shard == "hash") {
        mode = ShardMode::hash;
    } else {
        throw Error(ErrorCode::invalid_config, "--shard expects round-robin or hash");
    }
    ItemFile items = read_items_file(file, d_c);
    ItemStore store(d_c);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(units), 0);
    for (std::size_t k = 0; k < items.items.size(); ++k) {
        int unit = items.units[k];
        if (unit == 0) {
            unit = shard_unit(mode, items.items[k].id, k, units);
        } else if (unit > units) {
            throw Error(ErrorCode::invalid_config, file + ": line " + std::to_string(items.lines[k]) + ": unit " +
                                                       std::to_string(unit) + " exceeds --units " +
                                                       std::to_string(units));
        }
        items.units[k] = unit;
        store.add(items.items[k], unit);
        ++sizes[static_cast<std::size_t>(unit - 1)];
    }
    out << "ingested " << store.size() << " items (d_C=" << d_c << ", units=" << units << ")\n";
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        out << "unit " << j + 1 << ": " << sizes[j] << " items\n";
    }
    if (!out_path.empty()) {
        std::vector<CourseItem> padded = store.items();
        std::ofstream f(out_path);
        if (!f) {
            throw Error(ErrorCode::invalid_config, "cannot write " + out_path);
        }
        write_items(f, padded, store.units());
    }
    return exit_ok;
}

int cmd_params(std::uint64_t horizon, double alpha, int d_x, int d_c, const std::vector<int>& extra_units,
               std::ostream& out)
{
    const int n_t = compute_slicing_number(horizon, alpha, d_x, d_c);
    const double raw_n_t = horizon_power(horizon, alpha / (d_x + alpha * (d_c + 3)));
    const double gamma = theoretical_exponent(alpha, d_x, d_c);
    const int z_star = optimal_unit_exponent(horizon, alpha, d_x, d_c);
    const double budget = horizon_power(horizon, unit_exponent(alpha, d_x, d_c));
    std::uint64_t cells = 1;
    for (int k = 0; k < d_x; ++k) {
        cells *= static_cast<std::uint64_t>(n_t);
    }
    out << "T=" << horizon << " alpha=" << format_number(alpha) << " d_X=" << d_x << " d_C=" << d_c << '\n';
    out << "n_T = " << n_t << " (unfloored " << fixed(raw_n_t, 4) << "), cells = " << cells << '\n';
    out << "gamma = " << fixed(gamma, 6) << '\n';
    out << "z* = " << z_star << " (unit budget " << fixed(budget, 2) << ")\n";
    out << "unit condition: d <= 2^z <= unit budget\n";
    out << std::right << std::setw(8) << "d" << std::setw(6) << "z" << std::setw(10) << "2^z" << "  status\n";
    std::vector<int> ds;
    for (int z = 0; z <= z_star + 1 && z <= 30; ++z) {
        ds.push_back(1 << z);
    }
    ds.insert(ds.end(), extra_units.begin(), extra_units.end());
    std::sort(ds.begin(), ds.end());
    ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
    for (int d : ds) {
        if (d < 1) {
            throw Error(ErrorCode::invalid_config, "unit counts must be positive");
        }
        const int z = depth_for_units(d);
        out << std::setw(8) << d << std::setw(6) << z << std::setw(10) << (std::uint64_t{1} << z) << "  "
            << (check_unit_condition(d, horizon, alpha, d_x, d_c) ? "satisfied" : "violated") << '\n';
    }
    return exit_ok;
}

int cmd_env_describe(const RunFlags& flags, std::ostream& out)
{
    ConfigSource src = flags.config ? ConfigSource::load(*flags.config) : ConfigSource{};
    for (const auto& [key, value] : flags.overrides) {
        src.set(key, value, "--" + key);
    }
    RunConfig cfg = src.build();
    const World world = load_world(cfg);
    ItemStore store(cfg.env.d_c);
    for (const CourseItem& c : world.items) {
        store.add(c);
    }
    ResolvedPolicy resolved = resolve_policy(cfg.policy, cfg.env, cfg.experiment.horizon);
    const PartitionConfig& partition = resolved.engine.partition;
    if (partition.cell_count() * store.size() > 10'000'000) {
        throw Error(ErrorCode::invalid_config, "universe too large to describe (" +
                                                   std::to_string(partition.cell_count()) + " cells x " +
                                                   std::to_string(store.size()) + " items)");
    }
    const RewardModel model(cfg.env);
    out << "family=" << to_string(cfg.env.family) << " sigma=" << format_number(cfg.env.sigma)
        << " sharpness=" << format_number(cfg.env.sharpness) << " seed=" << cfg.env.seed << " items=" << store.size()
        << " n_T=" << partition.n_t << '\n';
    out << "cell\tcenter\tbest_item\tvalue\tideal_point\n";
    for (const CellId& cell : all_cells(partition)) {
        const ContextPoint center = cell_center(cell, partition);
        const OracleResult best = oracle_best(model, cell, partition, store);
        auto join = [](const std::vector<double>& v) {
            std::string s = "(";
            for (std::size_t k = 0; k < v.size(); ++k) {
                s += (k ? "," : "") + fixed(v[k], 4);
            }
            return s + ")";
        };
        out << cell.to_string() << '\t' << join(center.coords) << '\t' << best.item << '\t' << fixed(best.value, 6)
            << '\t' << join(model.ideal_item(center)) << '\n';
    }
    return exit_ok;
}

int cmd_verify(const std::string& path, std::ostream& out, std::ostream& err)
{
    const std::unique_ptr<Engine> engine = restore_engine(load_checkpoint(path));
    const InvariantReport report = verify_engine(*engine);
    const StorageCounters counters = engine->storage_counters();
    std::uint64_t rounds = 0;
    for (const CellCounters& c : counters.cells) {
        rounds += c.rounds;
    }
    out << "cells=" << counters.cells.size() << " nodes=" << counters.nodes << " items=" << counters.items
        << " rounds=" << rounds << " checked=" << report.nodes_checked << '\n';
    if (!report.ok()) {
        for (const std::string& v : report.violations) {
            err << "invariant violation: " << v << '\n';
        }
        err << "error: checkpoint failed " << report.violations.size() << " invariant check(s)\n";
        return exit_invariants;
    }
    out << "all invariants hold\n";
    return exit_ok;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Contextual hierarchical-tree bandit simulator", "rht"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run_cmd = app.add_subcommand("run", "Run seeded experiments and write the checkpoint CSV");
    run_cmd->add_option("--config", run_flags.config, "Configuration file (key = value lines)");
    struct Override {
        const char* flag;
        const char* key;
        const char* help;
    };
    const Override overrides[] = {
        {"--horizon", "horizon", "Number of rounds T"},
        {"--policy", "policy", "Policy name or comma-separated list"},
        {"--n-t", "n_t", "Slicing number (integer or auto)"},
        {"--z", "z", "Forest depth (integer, auto-min or auto-optimal)"},
        {"--units", "units", "Number of storage units d"},
        {"--seed", "seed", "Base seed; replica r uses seed + r"},
        {"--replicas", "replicas", "Number of replicas"},
        {"--jobs", "jobs", "Replicas run in parallel"},
        {"--out", "out", "CSV output path ('-' for stdout)"},
        {"--shard", "shard", "Unit assignment for synthetic items (round-robin or hash)"},
        {"--arrive-rate", "arrive_rate", "New random items per 1000 rounds"},
        {"--checkpoint", "checkpoint", "Write the final engine of the first replica here"},
        {"--items", "items_file", "Item file (id,f1..fk[,unit] lines) replacing the synthetic universe"},
    };
    std::map<std::string, std::string> raw_run;
    for (const Override& o : overrides) {
        run_cmd->add_option_function<std::string>(
            o.flag, [&raw_run, key = std::string(o.key)](const std::string& v) { raw_run[key] = v; }, o.help);
    }
    bool emit_table = false;
    run_cmd->add_flag("--emit-table", emit_table, "Print accuracy at 1..6 x 10^5 rounds");
    run_cmd->add_option("--set", run_flags.sets, "Override any config key (key=value)");

    std::string ingest_file, ingest_shard = "round-robin", ingest_out;
    int ingest_dc = 3, ingest_units = 1;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate an item file and report unit sizes");
    ingest_cmd->add_option("--file", ingest_file, "Item file")->required();
    ingest_cmd->add_option("--d-c", ingest_dc, "Item feature dimension");
    ingest_cmd->add_option("--units", ingest_units, "Number of storage units d");
    ingest_cmd->add_option("--shard", ingest_shard, "round-robin or hash, for lines without a unit column");
    ingest_cmd->add_option("--out", ingest_out, "Write the validated items with their units here");

    std::uint64_t params_horizon = 0;
    double params_alpha = 1.0;
    int params_dx = 2, params_dc = 3;
    std::vector<int> params_units;
    auto* params_cmd = app.add_subcommand("params", "Print the horizon-derived parameters");
    params_cmd->add_option("--horizon", params_horizon, "Number of rounds T")->required();
    params_cmd->add_option("--alpha", params_alpha, "Hoelder exponent of the context");
    params_cmd->add_option("--d-x", params_dx, "Context dimension");
    params_cmd->add_option("--d-c", params_dc, "Item feature dimension");
    params_cmd->add_option("--units", params_units, "Extra unit counts to check")->delimiter(',');

    RunFlags env_flags;
    std::map<std::string, std::string> raw_env;
    auto* env_cmd = app.add_subcommand("env-describe", "Print the oracle item of every cell");
    env_cmd->add_option("--config", env_flags.config, "Configuration file");
    env_cmd->add_option_function<std::string>(
        "--horizon", [&raw_env](const std::string& v) { raw_env["horizon"] = v; }, "Horizon used for auto n_T");
    env_cmd->add_option_function<std::string>(
        "--n-t", [&raw_env](const std::string& v) { raw_env["n_t"] = v; }, "Slicing number (integer or auto)");
    env_cmd->add_option_function<std::string>(
        "--items", [&raw_env](const std::string& v) { raw_env["items_file"] = v; }, "Item file");

    std::string verify_path;
    auto* verify_cmd = app.add_subcommand("verify", "Run the invariant suite on a checkpoint");
    verify_cmd->add_option("--checkpoint", verify_path, "Checkpoint file")->required();

    std::vector<std::string> argv_store{"rht"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const std::string& a : argv_store) {
        argv.push_back(a.c_str());
    }
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*run_cmd) {
            run_flags.overrides = raw_run;
            if (emit_table) {
                run_flags.overrides["emit_table"] = "true";
            }
            return cmd_run(run_flags, out, err);
        }
        if (*ingest_cmd) {
            return cmd_ingest(ingest_file, ingest_dc, ingest_units, ingest_shard, ingest_out, out);
        }
        if (*params_cmd) {
            return cmd_params(params_horizon, params_alpha, params_dx, params_dc, params_units, out);
        }
        if (*env_cmd) {
            env_flags.overrides = raw_env;
            return cmd_env_describe(env_flags, out);
        }
        if (*verify_cmd) {
            return cmd_verify(verify_path, out, err);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_error;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_error;
    }
    return exit_usage;
}

} // namespace rht::cli
