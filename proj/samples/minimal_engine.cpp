// Drives the engine directly: a toy universe of 64 items, contexts drawn
// uniformly from the unit square, and a reward that prefers items whose
// first feature matches the first context coordinate.
#include <cmath>
#include <iostream>

#include "rht/rht.hpp"

int main()
{
    const std::uint64_t horizon = 20000;

    rht::ItemStore store(/*d_c=*/2);
    for (const rht::CourseItem& item : rht::synthetic_items(64, 2, /*seed=*/11)) {
        store.add(item);
    }

    rht::EngineConfig cfg;
    cfg.horizon = horizon;
    cfg.partition.d_x = 2;
    cfg.partition.n_t = rht::compute_slicing_number(horizon, 1.0, 2, 2);
    rht::Engine engine(cfg, std::move(store));

    rht::Rng rng(42);
    double total = 0.0;
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        rht::ContextPoint x{{rht::uniform01(rng), rht::uniform01(rng)}};
        rht::Recommendation rec = engine.recommend(x, rng);
        const double match = 1.0 - std::abs(engine.store().feature(rec.item, 0) - x.coords[0]);
        const double reward = std::clamp(match + rht::uniform_in(rng, -0.05, 0.05), 0.0, 1.0);
        engine.feedback(rec, reward);
        total += reward;
    }

    const rht::StorageCounters counters = engine.storage_counters();
    std::cout << "n_T=" << cfg.partition.n_t << " cells=" << counters.cells.size() << " nodes=" << counters.nodes
              << " mean reward=" << total / static_cast<double>(horizon) << '\n';
    std::cout << (rht::verify_engine(engine).ok() ? "invariants hold" : "invariants violated") << '\n';
}
