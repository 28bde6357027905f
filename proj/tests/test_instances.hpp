#pragma once

#include "survey/allocator.hpp"
#include "survey/rng.hpp"

#include <cstdint>

namespace survey::testing {

// Random but always-feasible two-phase instances for oracle comparisons.
inline DesignInstance random_instance(std::uint64_t seed, std::size_t max_groups = 4,
                                      std::size_t max_regions = 12) {
    Rng rng(seed);
    const std::size_t groups = 1 + rng.below(max_groups);
    const std::size_t regions = rng.below(max_regions + 1);

    DesignInstance inst;
    inst.counts = CountMatrix(groups, regions);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t r = 0; r < regions; ++r) {
            // some empty cells to exercise sparse coverage
            inst.counts.at(g, r) = rng.uniform01() < 0.2
                                       ? 0.0
                                       : static_cast<double>(rng.below(500));
        }
    }
    inst.phase1_failure.resize(groups);
    inst.phase2_failure.resize(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        inst.phase1_failure[g] = 0.3 + 0.6 * rng.uniform01();
        inst.phase2_failure[g] = 0.5 * rng.uniform01();
    }
    inst.contact_cost = 1.0;
    inst.region_cost = 1.0 + static_cast<double>(rng.below(1000));
    inst.region_rate.resize(regions);
    for (std::size_t r = 0; r < regions; ++r) {
        inst.region_rate[r] = 0.05 + 0.25 * rng.uniform01();
    }

    const auto totals = inst.counts.group_totals();
    inst.required.resize(groups);
    for (std::size_t g = 0; g < groups; ++g) {
        double max_cover = 0.0;
        for (std::size_t r = 0; r < regions; ++r) {
            max_cover += inst.region_rate[r] * inst.counts.at(g, r) * (1.0 - inst.phase2_failure[g]);
        }
        const double achievable = totals[g] * (1.0 - inst.phase1_failure[g]) + max_cover;
        // occasionally zero, otherwise a random feasible slice
        inst.required[g] = rng.uniform01() < 0.15 ? 0.0 : 0.9 * rng.uniform01() * achievable;
    }
    return inst;
}

} // namespace survey::testing
