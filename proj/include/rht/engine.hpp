#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "rht/bandit_tree.hpp"
#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/distributed_forest.hpp"
#include "rht/error.hpp"
#include "rht/random.hpp"

namespace rht {

/// Resolved engine parameters. A plain hierarchical tree is the forest with
/// one unit (units = 1, z = 0).
struct EngineConfig {
    PartitionConfig partition;
    std::uint64_t horizon = 1000;
    double k1 = 1.0;
    double m = 0.5;
    double k2 = 2.0;
    int units = 1;
    int z = 0;
    // Build cells through the storage-unit forest even when z = 0.
    bool distributed = false;

    void validate() const
    {
        partition.validate();
        if (horizon < 3) {
            throw Error(ErrorCode::horizon_too_small, "horizon " + std::to_string(horizon) + " < 3");
        }
        DiamBoundConfig{k1, m}.validate();
        if (!(k2 >= 0.0) || !std::isfinite(k2)) {
            throw Error(ErrorCode::invalid_config, "k2 must be a finite nonnegative real");
        }
        forest().validate();
    }

    ForestConfig forest() const { return ForestConfig{units, z}; }

    BoundParams bound_params() const
    {
        return BoundParams{k2, std::log(static_cast<double>(horizon)), k1, m, context_gap(partition)};
    }
};

/// Returned by recommend and consumed by the matching feedback call.
struct Recommendation {
    ItemId item = 0;
    CellId cell;
    std::vector<NodeIndex> path;
    std::uint64_t ticket = 0;
};

struct CellCounters {
    CellId cell;
    std::size_t nodes = 0;
    std::uint64_t rounds = 0;
};

struct StorageCounters {
    std::size_t nodes = 0;
    std::size_t items = 0;
    std::vector<CellCounters> cells;
};

/// Contextual tree-bandit engine. Cell forests are created lazily the first
/// time a context lands in their cell.
///
/// Thread-safety: recommend/feedback on different cells may run
/// concurrently; calls for the same cell alternate strictly per ticket.
/// add_course excludes every other call.
class Engine {
public:
    Engine(EngineConfig cfg, ItemStore store) : cfg_(std::move(cfg)), store_(std::move(store))
    {
        cfg_.validate();
        params_ = cfg_.bound_params();
        // Fails early on items assigned to units that do not exist.
        units_from_store(store_, cfg_.forest());
    }

    /// Restores an engine from checkpointed cell forests.
    Engine(EngineConfig cfg, ItemStore store, std::vector<CellForest> forests, std::uint64_t next_ticket)
        : Engine(std::move(cfg), std::move(store))
    {
        for (CellForest& f : forests) {
            auto state = std::make_unique<CellState>();
            CellId id = f.cell;
            state->forest = std::move(f);
            cells_.emplace(std::move(id), std::move(state));
        }
        next_ticket_ = next_ticket;
    }

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    template <class Urbg>
    Recommendation recommend(const ContextPoint& x, Urbg& rng)
    {
        std::shared_lock store_lock(store_mutex_);
        if (store_.empty()) {
            throw Error(ErrorCode::no_items, "no items ingested");
        }
        const CellId cell = locate_cell(x, cfg_.partition);
        CellState& state = cell_state(cell);
        std::lock_guard cell_lock(state.mutex);
        if (state.pending) {
            throw Error(ErrorCode::protocol_error, "cell " + cell.to_string() + " already has an open recommendation");
        }
        CellForest& forest = state.forest;
        for (NodeIndex top : forest.tops) {
            activate_if_filled(forest, top);
        }
        const NodeIndex start = select_top_region(forest);
        Recommendation rec;
        rec.path = explore(forest, start, store_, rng);
        const Region& region = forest.region(rec.path.back());
        rec.item = region.items[uniform_index(rng, region.items.size())];
        rec.cell = cell;
        rec.ticket = next_ticket_.fetch_add(1);
        state.pending = rec.ticket;
        return rec;
    }

    void feedback(const Recommendation& rec, double reward)
    {
        std::shared_lock store_lock(store_mutex_);
        CellState* state = find_state(rec.cell);
        if (state == nullptr) {
            throw Error(ErrorCode::protocol_error, "feedback for unknown cell " + rec.cell.to_string());
        }
        std::lock_guard cell_lock(state->mutex);
        if (!state->pending || *state->pending != rec.ticket) {
            throw Error(ErrorCode::protocol_error, "stale or duplicate ticket " + std::to_string(rec.ticket));
        }
        if (!(reward >= 0.0 && reward <= 1.0)) {
            throw Error(ErrorCode::invalid_reward, "reward " + std::to_string(reward) + " outside [0,1]");
        }
        update_path(state->forest, rec.path, reward, params_);
        state->pending.reset();
    }

    /// Adds an item to the universe and routes it into every materialized
    /// cell forest. No node statistic changes.
    void add_course(CourseItem item, int unit = 1)
    {
        std::unique_lock store_lock(store_mutex_);
        if (cfg_.z > 0 && (unit < 1 || unit > cfg_.units)) {
            throw Error(ErrorCode::invalid_item, "unit " + std::to_string(unit) + " does not exist");
        }
        const ItemId id = store_.add(std::move(item), cfg_.z > 0 ? unit : 1).id;
        const int top = cfg_.z > 0 ? unit - 1 : 0;
        std::lock_guard cells_lock(cells_mutex_);
        for (auto& [cell, state] : cells_) {
            route_item(state->forest, state->forest.tops[static_cast<std::size_t>(top)], id, store_);
        }
    }

    StorageCounters storage_counters() const
    {
        std::shared_lock store_lock(store_mutex_);
        std::lock_guard cells_lock(cells_mutex_);
        StorageCounters out;
        out.items = store_.size();
        for (const auto& [cell, state] : cells_) {
            out.nodes += state->forest.node_count();
            out.cells.push_back(CellCounters{cell, state->forest.node_count(), state->forest.rounds});
        }
        return out;
    }

    /// Node count a never-visited cell starts with.
    std::size_t initial_cell_nodes() const { return static_cast<std::size_t>(cfg_.forest().width()); }

    const EngineConfig& config() const { return cfg_; }
    const BoundParams& bound_params() const { return params_; }
    const ItemStore& store() const { return store_; }
    std::uint64_t next_ticket() const { return next_ticket_.load(); }

    /// Read access for audits and checkpoints; callers must not run
    /// concurrent mutations.
    const CellForest* find_forest(const CellId& cell) const
    {
        std::lock_guard cells_lock(cells_mutex_);
        auto it = cells_.find(cell);
        return it == cells_.end() ? nullptr : &it->second->forest;
    }

    std::vector<const CellForest*> forests() const
    {
        std::lock_guard cells_lock(cells_mutex_);
        std::vector<const CellForest*> out;
        for (const auto& [cell, state] : cells_) {
            out.push_back(&state->forest);
        }
        return out;
    }

    bool has_pending() const
    {
        std::lock_guard cells_lock(cells_mutex_);
        for (const auto& [cell, state] : cells_) {
            if (state->pending) {
                return true;
            }
        }
        return false;
    }

private:
    struct CellState {
        CellForest forest;
        std::optional<std::uint64_t> pending;
        std::mutex mutex;
    };

    CellState& cell_state(const CellId& cell)
    {
        std::lock_guard cells_lock(cells_mutex_);
        auto it = cells_.find(cell);
        if (it != cells_.end()) {
            return *it->second;
        }
        auto state = std::make_unique<CellState>();
        if (!cfg_.distributed && cfg_.z == 0 && cfg_.units == 1) {
            state->forest = make_cell_tree(cell, store_);
        } else {
            state->forest = init_forest(units_from_store(store_, cfg_.forest()), cell, cfg_.forest());
        }
        return *cells_.emplace(cell, std::move(state)).first->second;
    }

    CellState* find_state(const CellId& cell)
    {
        std::lock_guard cells_lock(cells_mutex_);
        auto it = cells_.find(cell);
        return it == cells_.end() ? nullptr : it->second.get();
    }

    EngineConfig cfg_;
    BoundParams params_;
    ItemStore store_;
    std::map<CellId, std::unique_ptr<CellState>> cells_;
    std::atomic<std::uint64_t> next_ticket_{1};
    mutable std::shared_mutex store_mutex_;
    mutable std::mutex cells_mutex_;
};

} // namespace rht
