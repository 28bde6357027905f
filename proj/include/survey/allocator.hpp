#pragma once

#include "survey/population.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace survey {

class InfeasibleError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class AllocationMethod : std::uint8_t {
    standard = 1,
    heuristic = 2,
    phase1 = 3,
    two_phase = 4,
    brute_force = 5,
};

const char *to_string(AllocationMethod method) noexcept;

// Everything the design program needs, expressed against the counts the
// designer can see (exact or noised).
struct DesignInstance {
    CountMatrix counts;
    std::vector<double> phase1_failure; // per group, in [0,1)
    std::vector<double> phase2_failure; // per group, in [0,1)
    double contact_cost = 1.0;          // per phase-1 contact
    double region_cost = 500.0;         // per deployed phase-2 region
    std::vector<double> region_rate;    // per region, in (0,1]
    std::vector<double> required;       // minimum expected successes per group

    void validate() const;
    [[nodiscard]] std::size_t group_count() const noexcept { return counts.groups; }
    [[nodiscard]] std::size_t region_count() const noexcept { return counts.regions; }
};

// A survey design: the contacted fraction per group, the selected phase-2
// regions, and the derived bookkeeping. `planned_contacts` is the absolute
// number of phase-1 contacts implied by the designer-visible counts; the
// simulator executes those numbers, which is how count noise reaches the
// field work.
struct Allocation {
    AllocationMethod method = AllocationMethod::standard;
    std::vector<double> contact_fraction;      // p_i in [0,1]
    std::vector<double> planned_contacts;      // p_i * visible group total
    std::vector<std::uint8_t> region_selected; // z_r in {0,1}
    std::vector<double> expected_success;      // per group, designer view
    double cost = 0.0;                         // design-time objective value
    bool optimal_proven = true;

    [[nodiscard]] std::size_t selected_region_count() const;
};

// Expected responding individuals per group for (p, z) under the instance's
// visible counts: p_i N_i (1 - F1_i) + sum_r z_r g_r N_i^r (1 - F2_i).
std::vector<double> expected_successes(const Allocation &alloc, const DesignInstance &inst);

// Design cost: c1 * sum_i p_i N_i + c2 * sum_r z_r.
double evaluate_cost(const Allocation &alloc, const DesignInstance &inst);

// Proportional baseline: contact the same fraction of every group.
Allocation standard_allocation(const DesignInstance &inst, double rate);

// Equal-allocation: the same contact count for every group at the same total
// budget as the standard baseline; fractions clamped at 1 for small groups.
Allocation heuristic_allocation(const DesignInstance &inst, double rate);

// Phase-1-only optimum, available in closed form: p_i = req_i / (N_i (1-F1_i)).
Allocation optimize_phase1(const DesignInstance &inst);

struct TwoPhaseOptions {
    std::uint64_t node_budget = 1'000'000;
};

// Exact optimum of the two-phase program. For fixed region choices the best
// continuous part is analytic, so the search runs over region subsets with
// branch-and-bound; a fractional-region relaxation provides the lower bound.
// If the node budget is exhausted the incumbent is returned with
// optimal_proven = false.
Allocation optimize_two_phase(const DesignInstance &inst, const TwoPhaseOptions &options = {});

// Enumeration oracle over all 2^R region subsets (R <= 20). Ties break toward
// fewer selected regions, then the lexicographically smallest selection.
Allocation brute_force_two_phase(const DesignInstance &inst);

} // namespace survey
