#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rht/bandit_tree.hpp"
#include "rht/course_space.hpp"
#include "rht/engine.hpp"

namespace rht {

struct InvariantReport {
    std::vector<std::string> violations;
    std::size_t nodes_checked = 0;

    bool ok() const { return violations.empty(); }

    void fail(const CellForest& f, std::size_t idx, const std::string& what)
    {
        // Cap the list so a corrupt checkpoint does not flood the output.
        if (violations.size() < 64) {
            violations.push_back("cell " + f.cell.to_string() + " node (" + std::to_string(f.nodes[idx].depth) + "," +
                                 std::to_string(f.regions[idx].rank) + "): " + what);
        }
    }
};

/// Checks the invariants local to node `idx`: its own statistics and its
/// relation to its children.
inline void verify_node(const CellForest& f, std::size_t idx, const ItemStore& store, const BoundParams& params,
                        InvariantReport& report)
{
    const TreeNode& n = f.nodes[idx];
    const Region& region = f.regions[idx];
    ++report.nodes_checked;
    if (!(n.estimation <= n.bound)) {
        report.fail(f, idx, "E > B");
    }
    if (!n.has_children() && n.estimation != n.bound) {
        report.fail(f, idx, "leaf with E != B");
    }
    if (n.pulls >= 1 && !(n.mean >= 0.0 && n.mean <= 1.0)) {
        report.fail(f, idx, "mean outside [0,1]");
    }
    if (n.virtual_unit) {
        if (n.pulls != 0 || n.has_children() || n.bound != 0.0 || n.estimation != 0.0 || !region.empty()) {
            report.fail(f, idx, "virtual unit was touched");
        }
        return;
    }
    if (!n.dormant && n.bound != bound_value(n, params)) {
        report.fail(f, idx, "stored B differs from recomputed B");
    }
    if (n.has_children()) {
        const TreeNode& l = f.at(n.left);
        const TreeNode& r = f.at(n.right());
        const Region& lr = f.region(n.left);
        const Region& rr = f.region(n.right());
        if (n.estimation != std::min(n.bound, std::max(l.estimation, r.estimation))) {
            report.fail(f, idx, "stored E differs from min(B, max child E)");
        }
        if (n.selected && n.pulls != 1 + l.pulls + r.pulls) {
            report.fail(f, idx, "pull count != 1 + children");
        }
        if (l.parent != static_cast<NodeIndex>(idx) || r.parent != static_cast<NodeIndex>(idx) || l.depth != n.depth + 1 ||
            r.depth != n.depth + 1 || lr.rank != 2 * region.rank - 1 ||
            rr.rank != 2 * region.rank) {
            report.fail(f, idx, "child indexing broken");
        }
        std::vector<ItemId> merged;
        merged.reserve(lr.items.size() + rr.items.size());
        std::merge(lr.items.begin(), lr.items.end(), rr.items.begin(), rr.items.end(),
                   std::back_inserter(merged));
        if (std::adjacent_find(merged.begin(), merged.end()) != merged.end()) {
            report.fail(f, idx, "children regions intersect");
        }
        if (merged != region.items) {
            report.fail(f, idx, "children regions do not cover parent region");
        }
        for (ItemId id : lr.items) {
            if (store.feature(id, region.split_dim) > region.split_threshold) {
                report.fail(f, idx, "item " + std::to_string(id) + " on the wrong side of the split");
            }
        }
        for (ItemId id : rr.items) {
            if (store.feature(id, region.split_dim) <= region.split_threshold) {
                report.fail(f, idx, "item " + std::to_string(id) + " on the wrong side of the split");
            }
        }
    } else if (n.selected || n.pulls != 0) {
        report.fail(f, idx, "selected node without children");
    }
}

/// Checks every structural and statistical invariant of a settled cell
/// forest (no open recommendation):
///   E <= B, E = B at leaves, B and E equal their recomputed values,
///   pulls = 1 + pulls(left) + pulls(right) for selected internal nodes,
///   mean in [0,1] once pulled, children partition their parent's items,
///   the explored set grows by one node per round and the node count is
///   (number of tops) + 2 * rounds.
inline void verify_forest(const CellForest& f, const ItemStore& store, const BoundParams& params,
                          InvariantReport& report)
{
    for (std::size_t idx = 0; idx < f.nodes.size(); ++idx) {
        verify_node(f, idx, store, params, report);
    }

    std::size_t items_in_tops = 0;
    for (NodeIndex t : f.tops) {
        items_in_tops += f.region(t).items.size();
    }
    if (items_in_tops != store.size()) {
        if (report.violations.size() < 64) {
            report.violations.push_back("cell " + f.cell.to_string() + ": tops hold " + std::to_string(items_in_tops) +
                                        " items, store has " + std::to_string(store.size()));
        }
    }
    if (f.regions.size() != f.nodes.size() || f.explored.size() != f.rounds || f.nodes.size() != f.tops.size() + 2 * f.rounds) {
        if (report.violations.size() < 64) {
            report.violations.push_back("cell " + f.cell.to_string() + ": node accounting off (" +
                                        std::to_string(f.nodes.size()) + " nodes, " + std::to_string(f.rounds) +
                                        " rounds)");
        }
    }
}

inline InvariantReport verify_engine(const Engine& engine)
{
    InvariantReport report;
    for (const CellForest* f : engine.forests()) {
        verify_forest(*f, engine.store(), engine.bound_params(), report);
    }
    return report;
}

/// FNV-1a over every node statistic (pulls, mean, B, E and flags) of the
/// given forests. Region contents are deliberately excluded.
inline std::uint64_t statistics_hash(const std::vector<const CellForest*>& forests)
{
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 1099511628211ULL;
        }
    };
    for (const CellForest* f : forests) {
        for (int idx : f->cell.indices) {
            mix(static_cast<std::uint64_t>(idx));
        }
        mix(f->nodes.size());
        for (std::size_t idx = 0; idx < f->nodes.size(); ++idx) {
            const TreeNode& n = f->nodes[idx];
            mix(static_cast<std::uint64_t>(n.depth));
            mix(f->regions[idx].rank);
            mix(n.pulls);
            mix(std::bit_cast<std::uint64_t>(n.mean));
            mix(std::bit_cast<std::uint64_t>(n.bound));
            mix(std::bit_cast<std::uint64_t>(n.estimation));
            mix((n.selected ? 1U : 0U) | (n.dormant ? 2U : 0U) | (n.virtual_unit ? 4U : 0U));
        }
    }
    return h;
}

inline std::uint64_t statistics_hash(const Engine& engine) { return statistics_hash(engine.forests()); }

} // namespace rht
