#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rht/bandit_tree.hpp"
#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/error.hpp"
#include "rht/random.hpp"

namespace rht {

/// One item shard. Units are numbered 1..2^z; ids above the real unit count
/// d are virtual padding and hold no items.
struct StorageUnit {
    int id = 1;
    std::vector<ItemId> items;
    bool is_virtual = false;
};

struct ForestConfig {
    int d = 1;
    int z = 0;

    int width() const { return 1 << z; }
    int virtual_count() const { return width() - d; }

    void validate() const
    {
        if (d < 1) {
            throw Error(ErrorCode::invalid_config, "unit count d must be positive");
        }
        if (z < 0 || z > 30) {
            throw Error(ErrorCode::invalid_config, "forest depth z must lie in [0,30]");
        }
        if (d > width()) {
            throw Error(ErrorCode::invalid_config,
                        std::to_string(d) + " units do not fit under depth " + std::to_string(z));
        }
    }
};

/// Smallest z with 2^z >= d.
inline int depth_for_units(int d)
{
    if (d < 1) {
        throw Error(ErrorCode::invalid_config, "unit count d must be positive");
    }
    int z = 0;
    while ((std::int64_t{1} << z) < d) {
        ++z;
    }
    return z;
}

inline double unit_exponent(double alpha, int d_x, int d_c)
{
    return (d_x + alpha * d_c) / (d_x + alpha * (d_c + 3));
}

/// floor(log2((T/ln T)^{(d_X+αd_C)/(d_X+α(d_C+3))})), never below 0.
inline int optimal_unit_exponent(std::uint64_t horizon, double alpha, int d_x, int d_c)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::invalid_config, "alpha must lie in (0,1]");
    }
    const double units = horizon_power(horizon, unit_exponent(alpha, d_x, d_c));
    return std::max(0, static_cast<int>(std::floor(std::log2(units))));
}

/// d <= 2^{depth_for_units(d)} <= (T/ln T)^{(d_X+αd_C)/(d_X+α(d_C+3))}.
inline bool check_unit_condition(int d, std::uint64_t horizon, double alpha, int d_x, int d_c)
{
    const double width = std::ldexp(1.0, depth_for_units(d));
    return d <= width && width <= horizon_power(horizon, unit_exponent(alpha, d_x, d_c));
}

/// Groups the store's items into 2^z units by their recorded unit id.
inline std::vector<StorageUnit> units_from_store(const ItemStore& store, const ForestConfig& cfg)
{
    cfg.validate();
    std::vector<StorageUnit> units(static_cast<std::size_t>(cfg.width()));
    for (int j = 0; j < cfg.width(); ++j) {
        units[static_cast<std::size_t>(j)].id = j + 1;
        units[static_cast<std::size_t>(j)].is_virtual = j + 1 > cfg.d;
    }
    const auto& items = store.items();
    const auto& owners = store.units();
    for (std::size_t k = 0; k < items.size(); ++k) {
        const int unit = cfg.z == 0 ? 1 : owners[k];
        if (unit < 1 || unit > cfg.d) {
            throw Error(ErrorCode::invalid_config, "item " + std::to_string(items[k].id) + " assigned to unit " +
                                                       std::to_string(unit) + ", only " + std::to_string(cfg.d) +
                                                       " units exist");
        }
        units[static_cast<std::size_t>(unit - 1)].items.push_back(items[k].id);
    }
    for (auto& u : units) {
        std::sort(u.items.begin(), u.items.end());
    }
    return units;
}

/// Materializes one depth-z node per unit and nothing above depth z. Real
/// units start unvisited (E = +inf); virtual units carry B = E = 0 forever.
inline CellForest init_forest(const std::vector<StorageUnit>& units, const CellId& cell, const ForestConfig& cfg)
{
    cfg.validate();
    if (static_cast<int>(units.size()) != cfg.width()) {
        throw Error(ErrorCode::invalid_config, "expected " + std::to_string(cfg.width()) + " units, got " +
                                                   std::to_string(units.size()));
    }
    CellForest forest;
    forest.cell = cell;
    forest.top_depth = cfg.z;
    for (std::size_t j = 0; j < units.size(); ++j) {
        const StorageUnit& unit = units[j];
        const bool should_be_virtual = unit.id > cfg.d;
        if (unit.id != static_cast<int>(j) + 1 || unit.is_virtual != should_be_virtual ||
            (unit.is_virtual && !unit.items.empty())) {
            throw Error(ErrorCode::invalid_config, "storage unit " + std::to_string(unit.id) + " is inconsistent");
        }
        Region region;
        region.depth = cfg.z;
        region.rank = static_cast<std::uint64_t>(unit.id);
        region.items = unit.items;
        std::sort(region.items.begin(), region.items.end());
        const NodeIndex idx = forest.add_node(std::move(region));
        if (unit.is_virtual) {
            TreeNode& node = forest.at(idx);
            node.dormant = false;
            node.virtual_unit = true;
            node.bound = node.estimation = 0.0;
        }
        forest.tops.push_back(idx);
    }
    return forest;
}

/// Pairwise scan over the depth-z nodes keeping the earlier node unless the
/// next one is strictly larger, so ties go to the lowest rank.
inline NodeIndex select_top_region(const CellForest& forest)
{
    if (forest.tops.empty()) {
        throw Error(ErrorCode::no_items, "forest has no top nodes");
    }
    NodeIndex best = forest.tops.front();
    for (std::size_t j = 1; j < forest.tops.size(); ++j) {
        const NodeIndex next = forest.tops[j];
        if (forest.at(best).estimation < forest.at(next).estimation) {
            best = next;
        }
    }
    const TreeNode& chosen = forest.at(best);
    if (chosen.virtual_unit || forest.region(best).empty()) {
        throw Error(ErrorCode::no_items, "no storage unit holds items");
    }
    return best;
}

enum class ShardMode { round_robin, hash };

/// Unit (1-based) for the item at ingestion position `ordinal`.
inline int shard_unit(ShardMode mode, ItemId id, std::size_t ordinal, int d)
{
    if (d < 1) {
        throw Error(ErrorCode::invalid_config, "unit count d must be positive");
    }
    if (mode == ShardMode::round_robin) {
        return static_cast<int>(ordinal % static_cast<std::size_t>(d)) + 1;
    }
    return static_cast<int>(splitmix64(static_cast<std::uint64_t>(id)) % static_cast<std::uint64_t>(d)) + 1;
}

} // namespace rht
