#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rht/error.hpp"

namespace rht {

using ItemId = std::int64_t;

struct CourseItem {
    ItemId id = 0;
    std::vector<double> features;
};

/// Euclidean distance between feature vectors, optionally weighted per
/// dimension. An empty weight vector means unit weights.
inline double dissimilarity(const CourseItem& a, const CourseItem& b, const std::vector<double>& weights = {})
{
    if (a.features.size() != b.features.size()) {
        throw Error(ErrorCode::invalid_item, "items " + std::to_string(a.id) + " and " + std::to_string(b.id) +
                                                 " have different feature dimensions");
    }
    if (!weights.empty() && weights.size() != a.features.size()) {
        throw Error(ErrorCode::invalid_item, "weight vector does not match feature dimension");
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < a.features.size(); ++k) {
        const double diff = a.features[k] - b.features[k];
        sum += (weights.empty() ? 1.0 : weights[k]) * diff * diff;
    }
    return std::sqrt(sum);
}

/// The item universe. Items keep their arrival order; lookups by id are O(1).
/// Each item carries the storage unit (1-based) it was ingested into.
class ItemStore {
public:
    explicit ItemStore(int d_c = 1, std::vector<double> weights = {})
        : d_c_(d_c), weights_(std::move(weights))
    {
        if (d_c_ < 1) {
            throw Error(ErrorCode::invalid_config, "d_c must be positive");
        }
        if (!weights_.empty() && static_cast<int>(weights_.size()) != d_c_) {
            throw Error(ErrorCode::invalid_config, "dissimilarity weights must have d_c entries");
        }
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw Error(ErrorCode::invalid_config, "dissimilarity weights must be finite and nonnegative");
            }
        }
    }

    /// Missing trailing feature dimensions are filled with 0.
    const CourseItem& add(CourseItem item, int unit = 1)
    {
        if (index_.count(item.id) != 0) {
            throw Error(ErrorCode::duplicate_item, "item id " + std::to_string(item.id) + " already present");
        }
        if (static_cast<int>(item.features.size()) > d_c_) {
            throw Error(ErrorCode::invalid_item, "item " + std::to_string(item.id) + " has " +
                                                     std::to_string(item.features.size()) + " features, d_c is " +
                                                     std::to_string(d_c_));
        }
        item.features.resize(static_cast<std::size_t>(d_c_), 0.0);
        for (double v : item.features) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw Error(ErrorCode::invalid_item,
                            "item " + std::to_string(item.id) + " has feature " + std::to_string(v) + " outside [0,1]");
            }
        }
        if (unit < 1) {
            throw Error(ErrorCode::invalid_item, "unit ids are 1-based");
        }
        index_.emplace(item.id, items_.size());
        items_.push_back(std::move(item));
        units_.push_back(unit);
        return items_.back();
    }

    bool contains(ItemId id) const { return index_.count(id) != 0; }

    const CourseItem& get(ItemId id) const { return items_[position(id)]; }

    int unit_of(ItemId id) const { return units_[position(id)]; }

    double feature(ItemId id, int dim) const { return items_[position(id)].features[static_cast<std::size_t>(dim)]; }

    double distance(ItemId a, ItemId b) const { return dissimilarity(get(a), get(b), weights_); }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    int d_c() const { return d_c_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<CourseItem>& items() const { return items_; }
    const std::vector<int>& units() const { return units_; }

private:
    std::size_t position(ItemId id) const
    {
        auto it = index_.find(id);
        if (it == index_.end()) {
            throw Error(ErrorCode::invalid_item, "unknown item id " + std::to_string(id));
        }
        return it->second;
    }

    int d_c_;
    std::vector<double> weights_;
    std::vector<CourseItem> items_;
    std::vector<int> units_;
    std::unordered_map<ItemId, std::size_t> index_;
};

/// Item subset owned by the tree node at (depth, rank). Ids are kept sorted.
/// A region that has been split records the rule that produced its children:
/// items with feature[split_dim] <= split_threshold went left.
struct Region {
    std::vector<ItemId> items;
    int depth = 0;
    std::uint64_t rank = 1; // wraps modulo 2^64 below depth 63
    int split_dim = -1;
    double split_threshold = 0.0;

    bool empty() const { return items.empty(); }
    bool is_split() const { return split_dim >= 0; }

    /// Inserts keeping ids sorted; returns false if already present.
    bool insert(ItemId id)
    {
        auto it = std::lower_bound(items.begin(), items.end(), id);
        if (it != items.end() && *it == id) {
            return false;
        }
        items.insert(it, id);
        return true;
    }
};

struct DiamBoundConfig {
    double k1 = 1.0;
    double m = 0.5;

    void validate() const
    {
        if (!(k1 > 0.0) || !std::isfinite(k1)) {
            throw Error(ErrorCode::invalid_config, "k1 must be a positive real");
        }
        if (!(m > 0.0 && m < 1.0)) {
            throw Error(ErrorCode::invalid_config, "m must lie in (0,1)");
        }
    }

    double at_depth(int h) const { return k1 * std::pow(m, h); }
};

struct RegionSplit {
    Region left;
    Region right;
    int dim = 0;
    double threshold = 0.0;
};

/// Median split on feature dimension (depth mod d_C). The threshold is the
/// lower median; ties go left, so a singleton or an all-identical region
/// yields an empty right child.
inline RegionSplit split_region(const Region& r, const ItemStore& store)
{
    if (r.empty()) {
        throw Error(ErrorCode::empty_region,
                    "cannot split empty region (" + std::to_string(r.depth) + "," + std::to_string(r.rank) + ")");
    }
    RegionSplit out;
    out.dim = r.depth % store.d_c();

    std::vector<double> values;
    values.reserve(r.items.size());
    for (ItemId id : r.items) {
        values.push_back(store.feature(id, out.dim));
    }
    std::vector<double> sorted = values;
    const auto median = sorted.begin() + static_cast<std::ptrdiff_t>((sorted.size() - 1) / 2);
    std::nth_element(sorted.begin(), median, sorted.end());
    out.threshold = *median;

    out.left.depth = out.right.depth = r.depth + 1;
    out.left.rank = 2 * r.rank - 1;
    out.right.rank = 2 * r.rank;
    for (std::size_t k = 0; k < r.items.size(); ++k) {
        (values[k] <= out.threshold ? out.left : out.right).items.push_back(r.items[k]);
    }
    return out;
}

/// Maximum pairwise dissimilarity inside the region (0 for a singleton).
inline double region_diam(const Region& r, const ItemStore& store)
{
    if (r.empty()) {
        throw Error(ErrorCode::empty_region, "diameter of empty region");
    }
    double best = 0.0;
    for (std::size_t a = 0; a < r.items.size(); ++a) {
        for (std::size_t b = a + 1; b < r.items.size(); ++b) {
            best = std::max(best, store.distance(r.items[a], r.items[b]));
        }
    }
    return best;
}

} // namespace rht
