#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rht/distributed_forest.hpp"
#include "rht/environment.hpp"
#include "rht/error.hpp"
#include "rht/harness.hpp"
#include "rht/items_io.hpp"

namespace rht {

/// Everything a `run` needs. Built from a `key = value` text file whose
/// entries can be overridden one by one (the CLI flags do this).
struct RunConfig {
    PolicySpec policy = *find_baseline("rht-full");
    EnvSpec env;
    ExperimentSpec experiment;
    std::optional<std::string> items_file;
    std::string out = "run.csv";
    bool emit_table = false;
    std::optional<std::string> checkpoint;
};

/// One `key = value` setting and where it came from ("line 4", "--horizon").
struct ConfigEntry {
    std::string value;
    std::string origin;
};

class ConfigSource {
public:
    /// Parses the text format: one `key = value` per line, '#' starts a
    /// comment, blank lines are ignored. Unknown or repeated keys are errors.
    static ConfigSource parse(std::istream& in)
    {
        ConfigSource src;
        std::string raw;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            const auto hash = raw.find('#');
            const std::string line = detail::trim(raw.substr(0, hash));
            if (line.empty()) {
                continue;
            }
            const std::string origin = "line " + std::to_string(line_no);
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw Error(ErrorCode::invalid_config, origin + ": expected 'key = value', got '" + line + "'");
            }
            const std::string key = detail::trim(line.substr(0, eq));
            const std::string value = detail::trim(line.substr(eq + 1));
            check_key(key, origin);
            if (src.entries_.count(key) != 0) {
                throw Error(ErrorCode::invalid_config, origin + ": key '" + key + "' already set on " +
                                                           src.entries_[key].origin);
            }
            src.entries_[key] = ConfigEntry{value, origin};
        }
        return src;
    }

    static ConfigSource load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorCode::invalid_config, "cannot open config file " + path);
        }
        try {
            return parse(in);
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.detail());
        }
    }

    /// Sets or replaces a key.
    void set(const std::string& key, const std::string& value, const std::string& origin)
    {
        check_key(key, origin);
        entries_[key] = ConfigEntry{value, origin};
    }

    const std::map<std::string, ConfigEntry>& entries() const { return entries_; }

    static const std::vector<std::string>& known_keys()
    {
        static const std::vector<std::string> keys = {
            "policy",       "policy.name",      "horizon",         "replicas",       "seed",
            "jobs",         "d_x",              "alpha",           "l_x",            "n_t",
            "k1",           "m",                "k2",              "units",          "z",
            "fill_units",   "shard",            "env.family",      "env.sigma",      "env.sharpness",
            "env.seed",     "env.items",        "env.d_c",         "env.context",    "env.components",
            "items_file",   "arrive_rate",      "checkpoints",     "window_fraction", "eval_n_t",
            "discretization", "out",            "emit_table",      "checkpoint",
        };
        return keys;
    }

    /// Resolves all entries into a RunConfig. `policy` is applied first so
    /// that the other keys refine the chosen baseline.
    RunConfig build() const
    {
        RunConfig cfg;
        if (auto it = entries_.find("policy"); it != entries_.end()) {
            apply(cfg, it->first, it->second);
        }
        for (const auto& [key, entry] : entries_) {
            if (key != "policy") {
                apply(cfg, key, entry);
            }
        }
        return cfg;
    }

private:
    static void check_key(const std::string& key, const std::string& origin)
    {
        const auto& keys = known_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw Error(ErrorCode::invalid_config, origin + ": unknown key '" + key + "'");
        }
    }

    static void apply(RunConfig& cfg, const std::string& key, const ConfigEntry& e)
    {
        auto fail = [&](const std::string& what) -> void {
            throw Error(ErrorCode::invalid_config, e.origin + ": " + key + ": " + what);
        };
        auto as_u64 = [&]() {
            char* end = nullptr;
            errno = 0;
            const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
            if (e.value.empty() || e.value.front() == '-' || errno != 0 || *end != '\0') {
                fail("expected a nonnegative integer, got '" + e.value + "'");
            }
            return static_cast<std::uint64_t>(v);
        };
        auto as_int = [&]() {
            const std::uint64_t v = as_u64();
            if (v > static_cast<std::uint64_t>(1) << 30) {
                fail("value " + e.value + " too large");
            }
            return static_cast<int>(v);
        };
        auto as_real = [&]() {
            double v = 0.0;
            if (!detail::parse_real(e.value, v) || !std::isfinite(v)) {
                fail("expected a real number, got '" + e.value + "'");
            }
            return v;
        };
        auto as_bool = [&]() {
            if (e.value == "true" || e.value == "1" || e.value == "yes") {
                return true;
            }
            if (e.value == "false" || e.value == "0" || e.value == "no") {
                return false;
            }
            fail("expected true or false, got '" + e.value + "'");
            return false;
        };
        auto auto_or_int = [&]() -> std::optional<int> {
            if (e.value == "auto") {
                return std::nullopt;
            }
            return as_int();
        };

        PolicySpec& p = cfg.policy;
        EnvSpec& env = cfg.env;
        ExperimentSpec& x = cfg.experiment;
        if (key == "policy") {
            if (auto base = find_baseline(e.value)) {
                p = *base;
            } else if (e.value == "rht") {
                p = PolicySpec{};
                p.name = "rht";
            } else if (e.value == "dsrht") {
                p = PolicySpec{};
                p.name = "dsrht";
                p.kind = PolicyKind::dsrht;
            } else {
                fail("unknown policy '" + e.value + "'");
            }
        } else if (key == "policy.name") {
            if (e.value.empty() || e.value.find_first_of(", \t") != std::string::npos) {
                fail("policy names may not be empty or contain commas or spaces");
            }
            p.name = e.value;
        } else if (key == "horizon") {
            x.horizon = as_u64();
        } else if (key == "replicas") {
            x.replicas = as_int();
            if (x.replicas < 1) {
                fail("need at least one replica");
            }
        } else if (key == "seed") {
            x.seed = as_u64();
        } else if (key == "jobs") {
            x.jobs = std::max(1, as_int());
        } else if (key == "d_x") {
            env.d_x = as_int();
        } else if (key == "alpha") {
            env.alpha = as_real();
        } else if (key == "l_x") {
            env.l_x = as_real();
        } else if (key == "n_t") {
            p.n_t = auto_or_int();
        } else if (key == "k1") {
            p.k1 = as_real();
        } else if (key == "m") {
            p.m = as_real();
        } else if (key == "k2") {
            p.k2 = as_real();
        } else if (key == "units") {
            p.units = as_int();
        } else if (key == "z") {
            if (e.value == "auto-min") {
                p.z_mode = ZMode::auto_min;
            } else if (e.value == "auto-optimal") {
                p.z_mode = ZMode::auto_optimal;
            } else {
                p.z_mode = ZMode::fixed;
                p.z = as_int();
            }
        } else if (key == "fill_units") {
            p.fill_units = as_bool();
        } else if (key == "shard") {
            if (e.value == "round-robin") {
                p.shard = ShardMode::round_robin;
            } else if (e.value == "hash") {
                p.shard = ShardMode::hash;
            } else {
                fail("expected round-robin or hash, got '" + e.value + "'");
            }
        } else if (key == "env.family") {
            if (e.value == "context-peak") {
                env.family = RewardFamily::context_peak;
            } else if (e.value == "context-free") {
                env.family = RewardFamily::context_free;
            } else {
                fail("expected context-peak or context-free, got '" + e.value + "'");
            }
        } else if (key == "env.sigma") {
            env.sigma = as_real();
        } else if (key == "env.sharpness") {
            env.sharpness = as_real();
        } else if (key == "env.seed") {
            env.seed = as_u64();
        } else if (key == "env.items") {
            env.items = static_cast<std::size_t>(as_u64());
        } else if (key == "env.d_c") {
            env.d_c = as_int();
        } else if (key == "env.context") {
            if (e.value == "uniform") {
                env.contexts = ContextDistribution::uniform;
            } else if (e.value == "mixture") {
                env.contexts = ContextDistribution::mixture;
            } else {
                fail("expected uniform or mixture, got '" + e.value + "'");
            }
        } else if (key == "env.components") {
            env.mixture_components = as_int();
        } else if (key == "items_file") {
            if (e.value.empty()) {
                cfg.items_file.reset();
            } else {
                cfg.items_file = e.value;
            }
        } else if (key == "arrive_rate") {
            x.arrival_rate = as_real();
            if (x.arrival_rate < 0.0) {
                fail("arrival rate must be nonnegative");
            }
        } else if (key == "checkpoints") {
            x.checkpoints.clear();
            if (e.value != "pow2") {
                for (const std::string& part : detail::split_commas(e.value)) {
                    char* end = nullptr;
                    errno = 0;
                    const unsigned long long v = std::strtoull(part.c_str(), &end, 10);
                    if (part.empty() || part.front() == '-' || errno != 0 || *end != '\0' || v == 0) {
                        fail("checkpoint '" + part + "' is not a positive integer");
                    }
                    x.checkpoints.push_back(v);
                }
            }
        } else if (key == "window_fraction") {
            x.window_fraction = as_real();
            if (!(x.window_fraction > 0.0 && x.window_fraction <= 1.0)) {
                fail("window fraction must lie in (0,1]");
            }
        } else if (key == "eval_n_t") {
            x.eval_n_t = auto_or_int();
        } else if (key == "discretization") {
            x.discretization = as_bool();
        } else if (key == "out") {
            cfg.out = e.value;
        } else if (key == "emit_table") {
            cfg.emit_table = as_bool();
        } else if (key == "checkpoint") {
            if (e.value.empty()) {
                cfg.checkpoint.reset();
            } else {
                cfg.checkpoint = e.value;
            }
        }
    }

    std::map<std::string, ConfigEntry> entries_;
};

inline const char* to_string(RewardFamily f) { return f == RewardFamily::context_peak ? "context-peak" : "context-free"; }
inline const char* to_string(ContextDistribution c) { return c == ContextDistribution::uniform ? "uniform" : "mixture"; }
inline const char* to_string(ShardMode s) { return s == ShardMode::round_robin ? "round-robin" : "hash"; }

/// Writes `cfg` back in the text format with every automatic setting
/// replaced by the value it resolved to, so the echo reproduces the run.
inline void write_config_echo(std::ostream& out, const RunConfig& cfg, const ResolvedPolicy& resolved)
{
    const PolicySpec& p = cfg.policy;
    const EngineConfig& e = resolved.engine;
    const ExperimentSpec& x = cfg.experiment;
    auto real = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    const char* kind = p.kind == PolicyKind::rht ? "rht" : p.kind == PolicyKind::dsrht ? "dsrht" : "uniform-random";
    out << "# resolved configuration\n";
    out << "policy = " << kind << '\n';
    out << "policy.name = " << p.name << '\n';
    out << "horizon = " << x.horizon << '\n';
    out << "replicas = " << x.replicas << '\n';
    out << "seed = " << x.seed << '\n';
    out << "jobs = " << x.jobs << '\n';
    out << "d_x = " << cfg.env.d_x << '\n';
    out << "alpha = " << real(cfg.env.alpha) << '\n';
    out << "l_x = " << real(cfg.env.l_x) << '\n';
    out << "n_t = " << e.partition.n_t << '\n';
    out << "k1 = " << real(p.k1) << '\n';
    out << "m = " << real(p.m) << '\n';
    out << "k2 = " << real(p.k2) << '\n';
    out << "units = " << e.units << '\n';
    out << "z = " << e.z << '\n';
    out << "fill_units = false\n";
    out << "shard = " << to_string(p.shard) << '\n';
    out << "env.family = " << to_string(cfg.env.family) << '\n';
    out << "env.sigma = " << real(cfg.env.sigma) << '\n';
    out << "env.sharpness = " << real(cfg.env.sharpness) << '\n';
    out << "env.seed = " << cfg.env.seed << '\n';
    out << "env.items = " << cfg.env.items << '\n';
    out << "env.d_c = " << cfg.env.d_c << '\n';
    out << "env.context = " << to_string(cfg.env.contexts) << '\n';
    out << "env.components = " << cfg.env.mixture_components << '\n';
    out << "items_file = " << (cfg.items_file ? *cfg.items_file : "") << '\n';
    out << "arrive_rate = " << real(x.arrival_rate) << '\n';
    out << "checkpoints = ";
    if (x.checkpoints.empty()) {
        out << "pow2";
    }
    for (std::size_t k = 0; k < x.checkpoints.size(); ++k) {
        out << (k ? "," : "") << x.checkpoints[k];
    }
    out << '\n';
    out << "window_fraction = " << real(x.window_fraction) << '\n';
    out << "eval_n_t = " << evaluation_partition(cfg.env, x).n_t << '\n';
    out << "discretization = " << (x.discretization ? "true" : "false") << '\n';
    out << "out = " << cfg.out << '\n';
    out << "emit_table = " << (cfg.emit_table ? "true" : "false") << '\n';
    out << "checkpoint = " << (cfg.checkpoint ? *cfg.checkpoint : "") << '\n';
}

} // namespace rht
