#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rht/context_partition.hpp"
#include "rht/course_space.hpp"
#include "rht/error.hpp"
#include "rht/random.hpp"

namespace rht {

using NodeIndex = std::int32_t;
inline constexpr NodeIndex no_node = -1;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// Per-node statistics of a cell tree. `pulls` counts the rounds whose
/// selected node lies in this node's subtree; `mean` is the running average
/// of their rewards. The node's item region lives in CellForest::regions at
/// the same index, which keeps this struct to one cache line for the
/// descent and update loops.
struct TreeNode {
    double mean = 0.0;
    double bound = infinity;
    double estimation = infinity;
    std::uint64_t pulls = 0;
    std::int32_t depth = 0;
    NodeIndex parent = no_node;
    NodeIndex left = no_node;  // children are stored next to each other
    bool selected = false;     // member of the explored set
    bool dormant = false;      // empty region, B = E = -inf until items arrive
    bool virtual_unit = false; // padding storage unit, B = E = 0, never split

    bool has_children() const { return left != no_node; }
    NodeIndex right() const { return left == no_node ? no_node : left + 1; }
};

/// Constants of the optimistic bound, resolved once per engine.
struct BoundParams {
    double k2 = 2.0;
    double ln_horizon = 1.0;
    double k1 = 1.0;
    double m = 0.5;
    double context_gap = 0.0;

    BoundParams() = default;
    BoundParams(double k2_, double ln_horizon_, double k1_, double m_, double context_gap_)
        : k2(k2_), ln_horizon(ln_horizon_), k1(k1_), m(m_), context_gap(context_gap_)
    {
        // Paths through long single-item chains touch thousands of depths per
        // round, so k1 m^h is tabulated (same std::pow values) until it
        // underflows or the table is full.
        constexpr std::size_t max_table = std::size_t{1} << 16;
        region_terms_.reserve(64);
        for (std::size_t h = 0; h < max_table; ++h) {
            const double term = k1 * std::pow(m, static_cast<double>(h));
            region_terms_.push_back(term);
            if (term == 0.0) {
                break;
            }
        }
    }

    /// k1 * m^depth.
    double region_term(int depth) const
    {
        const auto h = static_cast<std::size_t>(depth);
        if (h < region_terms_.size()) {
            return region_terms_[h];
        }
        if (!region_terms_.empty() && region_terms_.back() == 0.0) {
            return 0.0;
        }
        return k1 * std::pow(m, static_cast<double>(depth));
    }

private:
    std::vector<double> region_terms_;
};

/// mean + sqrt(k2 ln T / pulls) + k1 m^h + context gap, or +inf before the
/// first pull.
inline double bound_value(std::uint64_t pulls, double mean, int depth, const BoundParams& p)
{
    if (pulls == 0) {
        return infinity;
    }
    return mean + std::sqrt(p.k2 * p.ln_horizon / static_cast<double>(pulls)) + p.region_term(depth) +
           p.context_gap;
}

inline double bound_value(const TreeNode& node, const BoundParams& p)
{
    if (node.virtual_unit) {
        return 0.0;
    }
    if (node.dormant) {
        return -infinity;
    }
    return bound_value(node.pulls, node.mean, node.depth, p);
}

/// min(B, max(E_left, E_right)) for internal nodes, B for leaves.
inline double estimation_value(double bound, const double* left_e, const double* right_e)
{
    if (left_e == nullptr || right_e == nullptr) {
        return bound;
    }
    return std::min(bound, std::max(*left_e, *right_e));
}

inline void update_mean(TreeNode& node, double reward)
{
    if (!(reward >= 0.0 && reward <= 1.0)) {
        throw Error(ErrorCode::invalid_reward, "reward " + std::to_string(reward) + " outside [0,1]");
    }
    if (node.pulls == 0) {
        throw Error(ErrorCode::protocol_error, "mean update before the pull count was incremented");
    }
    const double n = static_cast<double>(node.pulls);
    node.mean = node.pulls == 1 ? reward : ((n - 1.0) * node.mean + reward) / n;
}

/// The materialized nodes of one context cell. `tops` are the nodes the
/// descent may start from: the single root for a plain tree, or the 2^z
/// storage-unit nodes of a distributed forest.
struct CellForest {
    CellId cell;
    int top_depth = 0;
    std::vector<TreeNode> nodes;
    std::vector<Region> regions; // parallel to nodes
    std::vector<NodeIndex> tops;
    std::vector<NodeIndex> explored;
    std::uint64_t rounds = 0;

    TreeNode& at(NodeIndex i) { return nodes[static_cast<std::size_t>(i)]; }
    const TreeNode& at(NodeIndex i) const { return nodes[static_cast<std::size_t>(i)]; }
    Region& region(NodeIndex i) { return regions[static_cast<std::size_t>(i)]; }
    const Region& region(NodeIndex i) const { return regions[static_cast<std::size_t>(i)]; }
    std::size_t node_count() const { return nodes.size(); }

    /// Appends a node for `region`; depth and rank are taken from the region.
    /// An empty region makes the node dormant.
    NodeIndex add_node(Region r, NodeIndex parent = no_node)
    {
        TreeNode n;
        n.depth = r.depth;
        n.parent = parent;
        if (r.empty()) {
            n.dormant = true;
            n.bound = n.estimation = -infinity;
        }
        nodes.push_back(n);
        regions.push_back(std::move(r));
        return static_cast<NodeIndex>(nodes.size() - 1);
    }

    double estimation_of(NodeIndex i) const
    {
        const TreeNode& n = at(i);
        if (n.virtual_unit) {
            return 0.0;
        }
        if (n.dormant) {
            return -infinity;
        }
        if (!n.has_children()) {
            return n.bound;
        }
        return estimation_value(n.bound, &at(n.left).estimation, &at(n.right()).estimation);
    }
};

/// Single-root cell tree over the whole item universe.
inline CellForest make_cell_tree(const CellId& cell, const ItemStore& store)
{
    CellForest forest;
    forest.cell = cell;
    Region root;
    root.depth = 0;
    root.rank = 1;
    root.items.reserve(store.size());
    for (const CourseItem& item : store.items()) {
        root.items.push_back(item.id);
    }
    std::sort(root.items.begin(), root.items.end());
    forest.tops.push_back(forest.add_node(std::move(root)));
    return forest;
}

/// A dormant node that has since received items becomes a fresh, unvisited
/// node. Returns true if it was activated.
inline bool activate_if_filled(CellForest& forest, NodeIndex i)
{
    TreeNode& node = forest.at(i);
    if (node.dormant && !forest.region(i).empty()) {
        node.dormant = false;
        node.bound = node.estimation = infinity;
        return true;
    }
    return false;
}

/// Splits `parent`'s region and appends both children with T = 0 and
/// E = B = +inf (an empty child is dormant instead).
inline void materialize_children(CellForest& forest, NodeIndex parent, const ItemStore& store)
{
    RegionSplit split = split_region(forest.region(parent), store);
    const NodeIndex left = forest.add_node(std::move(split.left), parent);
    forest.add_node(std::move(split.right), parent);
    forest.at(parent).left = left;
    Region& r = forest.region(parent);
    r.split_dim = split.dim;
    r.split_threshold = split.threshold;
}

/// Descends from `start` towards the child with the larger estimation
/// (fair coin on ties) until it reaches a node without materialized
/// children, materializes that node's children and adds it to the explored
/// set. Returns the root-to-node path.
template <class Urbg>
std::vector<NodeIndex> explore(CellForest& forest, NodeIndex start, const ItemStore& store, Urbg& rng)
{
    if (forest.region(start).empty() || forest.at(start).virtual_unit) {
        throw Error(ErrorCode::no_items, "exploration start node has no items");
    }
    std::vector<NodeIndex> path{start};
    NodeIndex current = start;
    while (forest.at(current).has_children()) {
        const NodeIndex l = forest.at(current).left;
        const NodeIndex r = l + 1;
        if (forest.at(l).dormant) {
            activate_if_filled(forest, l);
        }
        if (forest.at(r).dormant) {
            activate_if_filled(forest, r);
        }
        const double el = forest.at(l).estimation;
        const double er = forest.at(r).estimation;
        NodeIndex next;
        if (el > er) {
            next = l;
        } else if (el < er) {
            next = r;
        } else {
            next = bernoulli_half(rng) ? l : r;
        }
        // Skip-empty: never stop on a region without items. Only dormant
        // nodes have empty regions.
        if (forest.at(next).dormant) {
            next = next == l ? r : l;
        }
        current = next;
        path.push_back(current);
    }
    materialize_children(forest, current, store);
    forest.at(current).selected = true;
    forest.explored.push_back(current);
    return path;
}

/// Refreshes pull count, mean and bound of every path node, then its
/// estimation from the children. Walking the path bottom-up does both in one
/// pass, because B only depends on the node's own statistics.
inline void update_path(CellForest& forest, std::span<const NodeIndex> path, double reward, const BoundParams& params)
{
    if (!(reward >= 0.0 && reward <= 1.0)) {
        throw Error(ErrorCode::invalid_reward, "reward " + std::to_string(reward) + " outside [0,1]");
    }
    // The reached node's children were created with E = +inf at exploration.
    for (std::size_t k = path.size(); k-- > 0;) {
        TreeNode& n = forest.at(path[k]);
        ++n.pulls;
        const double count = static_cast<double>(n.pulls);
        n.mean = n.pulls == 1 ? reward : ((count - 1.0) * n.mean + reward) / count;
        n.bound = bound_value(n, params);
        n.estimation = forest.estimation_of(path[k]);
    }
    ++forest.rounds;
}

/// Appends `id` to every materialized region on its routing path below `top`.
inline void route_item(CellForest& forest, NodeIndex top, ItemId id, const ItemStore& store)
{
    NodeIndex current = top;
    for (;;) {
        Region& r = forest.region(current);
        r.insert(id);
        const TreeNode& n = forest.at(current);
        if (!n.has_children()) {
            return;
        }
        const bool go_left = store.feature(id, r.split_dim) <= r.split_threshold;
        current = go_left ? n.left : n.right();
    }
}

} // namespace rht
