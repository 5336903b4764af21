#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rht/bandit_tree.hpp"
#include "rht/course_space.hpp"
#include "rht/engine.hpp"
#include "rht/error.hpp"
#include "rht/random.hpp"

namespace rht {

inline constexpr int checkpoint_version = 1;

/// Everything needed to continue a run bit-exactly: the engine (config,
/// items, per-cell statistics, ticket counter) plus any named generator
/// states the driver wants to carry along.
struct Checkpoint {
    EngineConfig config;
    ItemStore store;
    std::vector<CellForest> forests;
    std::uint64_t next_ticket = 1;
    std::map<std::string, std::string> rng_states;
};

inline std::string rng_state(const Rng& rng)
{
    std::ostringstream out;
    out << rng;
    return out.str();
}

inline Rng rng_from_state(const std::string& state)
{
    std::istringstream in(state);
    Rng rng;
    in >> rng;
    if (!in) {
        throw Error(ErrorCode::malformed_input, "unreadable generator state");
    }
    return rng;
}

/// Copies the engine state. Refuses while a recommendation is open, since
/// its path would be lost.
inline Checkpoint capture(const Engine& engine)
{
    if (engine.has_pending()) {
        throw Error(ErrorCode::protocol_error, "cannot checkpoint with an open recommendation");
    }
    Checkpoint cp{engine.config(), engine.store(), {}, engine.next_ticket(), {}};
    for (const CellForest* f : engine.forests()) {
        cp.forests.push_back(*f);
    }
    return cp;
}

inline std::unique_ptr<Engine> restore_engine(Checkpoint cp)
{
    return std::make_unique<Engine>(std::move(cp.config), std::move(cp.store), std::move(cp.forests),
                                    cp.next_ticket);
}

namespace detail {

// Doubles are written as C99 hex floats so they round-trip exactly.
inline std::string hex(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next line split into tokens; `expect` must match the first token.
    std::istringstream next(const std::string& expect)
    {
        std::string line;
        if (!std::getline(in_, line)) {
            fail("unexpected end of file, expected '" + expect + "'");
        }
        ++line_no_;
        std::istringstream tokens(line);
        std::string head;
        tokens >> head;
        if (head != expect) {
            fail("expected '" + expect + "', found '" + head + "'");
        }
        return tokens;
    }

    template <class T>
    T read(std::istringstream& tokens, const char* what)
    {
        T value{};
        if (!(tokens >> value)) {
            fail(std::string("missing or malformed ") + what);
        }
        return value;
    }

    double read_double(std::istringstream& tokens, const char* what)
    {
        const auto tok = read<std::string>(tokens, what);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') {
            fail(std::string("malformed ") + what + " '" + tok + "'");
        }
        return v;
    }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw Error(ErrorCode::malformed_input, "checkpoint line " + std::to_string(line_no_) + ": " + what);
    }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

} // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& cp)
{
    using detail::hex;
    const EngineConfig& c = cp.config;
    out << "rht-checkpoint " << checkpoint_version << '\n';
    out << "engine " << c.horizon << ' ' << hex(c.k1) << ' ' << hex(c.m) << ' ' << hex(c.k2) << ' ' << c.units << ' '
        << c.z << ' ' << (c.distributed ? 1 : 0) << '\n';
    out << "partition " << c.partition.d_x << ' ' << c.partition.n_t << ' ' << hex(c.partition.alpha) << ' '
        << hex(c.partition.l_x) << '\n';
    out << "store " << cp.store.d_c() << ' ' << cp.store.weights().size();
    for (double w : cp.store.weights()) {
        out << ' ' << hex(w);
    }
    out << '\n';
    out << "items " << cp.store.size() << '\n';
    for (std::size_t k = 0; k < cp.store.size(); ++k) {
        const CourseItem& item = cp.store.items()[k];
        out << "item " << item.id << ' ' << cp.store.units()[k];
        for (double f : item.features) {
            out << ' ' << hex(f);
        }
        out << '\n';
    }
    out << "tickets " << cp.next_ticket << '\n';
    out << "forests " << cp.forests.size() << '\n';
    for (const CellForest& f : cp.forests) {
        out << "forest " << f.cell.indices.size();
        for (int i : f.cell.indices) {
            out << ' ' << i;
        }
        out << ' ' << f.top_depth << ' ' << f.rounds << ' ' << f.nodes.size() << '\n';
        out << "tops " << f.tops.size();
        for (NodeIndex t : f.tops) {
            out << ' ' << t;
        }
        out << '\n';
        out << "explored " << f.explored.size();
        for (NodeIndex e : f.explored) {
            out << ' ' << e;
        }
        out << '\n';
        for (std::size_t k = 0; k < f.nodes.size(); ++k) {
            const TreeNode& n = f.nodes[k];
            const Region& r = f.regions[k];
            const int flags = (n.selected ? 1 : 0) | (n.dormant ? 2 : 0) | (n.virtual_unit ? 4 : 0);
            out << "node " << n.pulls << ' ' << hex(n.mean) << ' ' << hex(n.bound) << ' ' << hex(n.estimation) << ' '
                << n.depth << ' ' << n.parent << ' ' << n.left << ' ' << flags << ' ' << r.rank << ' ' << r.split_dim
                << ' ' << hex(r.split_threshold) << ' ' << r.items.size();
            for (ItemId id : r.items) {
                out << ' ' << id;
            }
            out << '\n';
        }
    }
    out << "rngs " << cp.rng_states.size() << '\n';
    for (const auto& [name, state] : cp.rng_states) {
        out << "rng " << name << ' ' << state << '\n';
    }
    out << "end\n";
}

inline Checkpoint read_checkpoint(std::istream& in)
{
    detail::LineReader lr(in);
    {
        auto t = lr.next("rht-checkpoint");
        const int version = lr.read<int>(t, "version");
        if (version != checkpoint_version) {
            lr.fail("unsupported checkpoint version " + std::to_string(version));
        }
    }
    EngineConfig c;
    {
        auto t = lr.next("engine");
        c.horizon = lr.read<std::uint64_t>(t, "horizon");
        c.k1 = lr.read_double(t, "k1");
        c.m = lr.read_double(t, "m");
        c.k2 = lr.read_double(t, "k2");
        c.units = lr.read<int>(t, "units");
        c.z = lr.read<int>(t, "z");
        c.distributed = lr.read<int>(t, "distributed flag") != 0;
    }
    {
        auto t = lr.next("partition");
        c.partition.d_x = lr.read<int>(t, "d_x");
        c.partition.n_t = lr.read<int>(t, "n_t");
        c.partition.alpha = lr.read_double(t, "alpha");
        c.partition.l_x = lr.read_double(t, "l_x");
    }
    int d_c = 0;
    std::vector<double> weights;
    {
        auto t = lr.next("store");
        d_c = lr.read<int>(t, "d_c");
        const auto n = lr.read<std::size_t>(t, "weight count");
        for (std::size_t k = 0; k < n; ++k) {
            weights.push_back(lr.read_double(t, "weight"));
        }
    }
    Checkpoint cp{c, ItemStore(d_c, weights), {}, 1, {}};
    std::size_t item_count = 0;
    {
        auto t = lr.next("items");
        item_count = lr.read<std::size_t>(t, "item count");
    }
    for (std::size_t k = 0; k < item_count; ++k) {
        auto t = lr.next("item");
        CourseItem item;
        item.id = lr.read<ItemId>(t, "item id");
        const int unit = lr.read<int>(t, "unit");
        for (int d = 0; d < d_c; ++d) {
            item.features.push_back(lr.read_double(t, "feature"));
        }
        try {
            cp.store.add(std::move(item), unit);
        } catch (const Error& e) {
            lr.fail(e.what());
        }
    }
    {
        auto t = lr.next("tickets");
        cp.next_ticket = lr.read<std::uint64_t>(t, "ticket counter");
    }
    std::size_t forest_count = 0;
    {
        auto t = lr.next("forests");
        forest_count = lr.read<std::size_t>(t, "forest count");
    }
    for (std::size_t fi = 0; fi < forest_count; ++fi) {
        CellForest f;
        std::size_t node_count = 0;
        {
            auto t = lr.next("forest");
            const auto dims = lr.read<std::size_t>(t, "cell dimension");
            for (std::size_t k = 0; k < dims; ++k) {
                f.cell.indices.push_back(lr.read<int>(t, "cell index"));
            }
            f.top_depth = lr.read<int>(t, "top depth");
            f.rounds = lr.read<std::uint64_t>(t, "rounds");
            node_count = lr.read<std::size_t>(t, "node count");
        }
        auto read_indices = [&](const char* head, std::vector<NodeIndex>& into) {
            auto t = lr.next(head);
            const auto n = lr.read<std::size_t>(t, head);
            for (std::size_t k = 0; k < n; ++k) {
                const auto i = lr.read<NodeIndex>(t, "node index");
                if (i < 0 || static_cast<std::size_t>(i) >= node_count) {
                    lr.fail("node index " + std::to_string(i) + " out of range");
                }
                into.push_back(i);
            }
        };
        read_indices("tops", f.tops);
        read_indices("explored", f.explored);
        f.nodes.reserve(node_count);
        f.regions.reserve(node_count);
        for (std::size_t k = 0; k < node_count; ++k) {
            auto t = lr.next("node");
            TreeNode n;
            Region r;
            n.pulls = lr.read<std::uint64_t>(t, "pulls");
            n.mean = lr.read_double(t, "mean");
            n.bound = lr.read_double(t, "bound");
            n.estimation = lr.read_double(t, "estimation");
            n.depth = lr.read<std::int32_t>(t, "depth");
            n.parent = lr.read<NodeIndex>(t, "parent");
            n.left = lr.read<NodeIndex>(t, "left child");
            const int flags = lr.read<int>(t, "flags");
            n.selected = (flags & 1) != 0;
            n.dormant = (flags & 2) != 0;
            n.virtual_unit = (flags & 4) != 0;
            r.depth = n.depth;
            r.rank = lr.read<std::uint64_t>(t, "rank");
            r.split_dim = lr.read<int>(t, "split dimension");
            r.split_threshold = lr.read_double(t, "split threshold");
            const auto n_items = lr.read<std::size_t>(t, "region size");
            r.items.reserve(n_items);
            for (std::size_t j = 0; j < n_items; ++j) {
                const auto id = lr.read<ItemId>(t, "item id");
                if (!cp.store.contains(id)) {
                    lr.fail("region references unknown item " + std::to_string(id));
                }
                r.items.push_back(id);
            }
            if (n.left != no_node && (n.left < 0 || static_cast<std::size_t>(n.left) + 1 >= node_count)) {
                lr.fail("child index out of range");
            }
            if (n.parent != no_node && (n.parent < 0 || static_cast<std::size_t>(n.parent) >= node_count)) {
                lr.fail("parent index out of range");
            }
            if (n.has_children() && (r.split_dim < 0 || r.split_dim >= d_c)) {
                lr.fail("split dimension out of range");
            }
            f.nodes.push_back(n);
            f.regions.push_back(std::move(r));
        }
        cp.forests.push_back(std::move(f));
    }
    std::size_t rng_count = 0;
    {
        auto t = lr.next("rngs");
        rng_count = lr.read<std::size_t>(t, "generator count");
    }
    for (std::size_t k = 0; k < rng_count; ++k) {
        auto t = lr.next("rng");
        const auto name = lr.read<std::string>(t, "generator name");
        std::string state;
        std::getline(t, state);
        if (state.size() > 1) {
            state.erase(0, 1);
        }
        try {
            rng_from_state(state);
        } catch (const Error&) {
            lr.fail("unreadable state for generator '" + name + "'");
        }
        cp.rng_states[name] = state;
    }
    lr.next("end");
    try {
        cp.config.validate();
    } catch (const Error& e) {
        lr.fail(e.what());
    }
    return cp;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& cp)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::malformed_input, "cannot open " + path + " for writing");
    }
    write_checkpoint(out, cp);
    if (!out) {
        throw Error(ErrorCode::malformed_input, "failed writing " + path);
    }
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::malformed_input, "cannot open " + path);
    }
    return read_checkpoint(in);
}

} // namespace rht
