#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "rht/error.hpp"

namespace rht {

/// A normalized context in [0,1]^{d_X}.
struct ContextPoint {
    std::vector<double> coords;

    std::size_t dim() const { return coords.size(); }
};

/// Index of one sub-hypercube of the uniform grid: one interval index per
/// context dimension, each in [0, n_T).
struct CellId {
    std::vector<int> indices;

    auto operator<=>(const CellId&) const = default;
    bool operator==(const CellId&) const = default;

    std::string to_string() const
    {
        std::string out = "(";
        for (std::size_t k = 0; k < indices.size(); ++k) {
            if (k != 0) {
                out += ',';
            }
            out += std::to_string(indices[k]);
        }
        return out + ")";
    }
};

struct PartitionConfig {
    int d_x = 1;
    int n_t = 1;
    double alpha = 1.0;
    double l_x = 1.0;

    void validate() const
    {
        if (d_x < 1) {
            throw Error(ErrorCode::invalid_config, "d_x must be positive");
        }
        if (n_t < 1) {
            throw Error(ErrorCode::invalid_config, "n_t must be at least 1");
        }
        if (!(alpha > 0.0 && alpha <= 1.0)) {
            throw Error(ErrorCode::invalid_config, "alpha must lie in (0,1]");
        }
        if (!(l_x >= 0.0) || !std::isfinite(l_x)) {
            throw Error(ErrorCode::invalid_config, "l_x must be a finite nonnegative real");
        }
    }

    std::uint64_t cell_count() const
    {
        std::uint64_t n = 1;
        for (int k = 0; k < d_x; ++k) {
            n *= static_cast<std::uint64_t>(n_t);
        }
        return n;
    }
};

/// (T / ln T) raised to `exponent`. Shared by the slicing-number and
/// storage-unit helpers.
inline double horizon_power(std::uint64_t horizon, double exponent)
{
    if (horizon < 3) {
        throw Error(ErrorCode::horizon_too_small,
                    "horizon " + std::to_string(horizon) + " < 3 (ln T must exceed 1)");
    }
    const double t = static_cast<double>(horizon);
    return std::pow(t / std::log(t), exponent);
}

/// Grid resolution per context dimension that balances the context gap
/// against the item-region terms: max(1, floor((T/ln T)^{α/(d_X+α(d_C+3))})).
inline int compute_slicing_number(std::uint64_t horizon, double alpha, int d_x, int d_c)
{
    if (!(alpha > 0.0 && alpha <= 1.0) || d_x < 1 || d_c < 1) {
        throw Error(ErrorCode::invalid_config, "slicing number needs alpha in (0,1], d_x >= 1, d_c >= 1");
    }
    const double exponent = alpha / (d_x + alpha * (d_c + 3));
    const double raw = horizon_power(horizon, exponent);
    return std::max(1, static_cast<int>(std::floor(raw)));
}

inline void validate_context(const ContextPoint& x, const PartitionConfig& cfg)
{
    if (static_cast<int>(x.dim()) != cfg.d_x) {
        throw Error(ErrorCode::invalid_context, "context has " + std::to_string(x.dim()) +
                                                    " coordinates, expected " + std::to_string(cfg.d_x));
    }
    for (double v : x.coords) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw Error(ErrorCode::invalid_context, "coordinate " + std::to_string(v) + " outside [0,1]");
        }
    }
}

/// Half-open intervals [k/n_T, (k+1)/n_T); the top boundary 1.0 belongs to
/// the last interval.
inline CellId locate_cell(const ContextPoint& x, const PartitionConfig& cfg)
{
    validate_context(x, cfg);
    CellId cell;
    cell.indices.reserve(x.dim());
    for (double v : x.coords) {
        const int idx = static_cast<int>(std::floor(v * cfg.n_t));
        cell.indices.push_back(std::min(idx, cfg.n_t - 1));
    }
    return cell;
}

inline ContextPoint cell_center(const CellId& cell, const PartitionConfig& cfg)
{
    ContextPoint center;
    center.coords.reserve(cell.indices.size());
    for (int idx : cell.indices) {
        center.coords.push_back((idx + 0.5) / cfg.n_t);
    }
    return center;
}

/// Largest reward deviation between two contexts of the same cell:
/// L_X * (sqrt(d_X) / n_T)^alpha.
inline double context_gap(const PartitionConfig& cfg)
{
    return cfg.l_x * std::pow(std::sqrt(static_cast<double>(cfg.d_x)) / cfg.n_t, cfg.alpha);
}

/// Enumerates all n_T^{d_X} cells in lexicographic order.
inline std::vector<CellId> all_cells(const PartitionConfig& cfg)
{
    std::vector<CellId> cells;
    CellId current;
    current.indices.assign(static_cast<std::size_t>(cfg.d_x), 0);
    const std::uint64_t total = cfg.cell_count();
    cells.reserve(static_cast<std::size_t>(total));
    for (std::uint64_t n = 0; n < total; ++n) {
        cells.push_back(current);
        for (int k = cfg.d_x - 1; k >= 0; --k) {
            if (++current.indices[static_cast<std::size_t>(k)] < cfg.n_t) {
                break;
            }
            current.indices[static_cast<std::size_t>(k)] = 0;
        }
    }
    return cells;
}

} // namespace rht
