#pragma once

#include "survey/allocator.hpp"
#include "survey/population.hpp"
#include "survey/rng.hpp"

#include <cstdint>
#include <vector>

namespace survey {

// Field parameters needed to execute an allocation: per-group failure rates,
// per-region phase-2 sampling rates, and unit costs for realized-cost
// bookkeeping.
struct SurveyProtocol {
    std::vector<double> phase1_failure;
    std::vector<double> phase2_failure;
    std::vector<double> region_rate;
    double contact_cost = 1.0;
    double region_cost = 500.0;
};

struct SurveyOutcome {
    std::vector<std::uint64_t> successes;
    std::vector<double> estimates; // NaN when a group has zero successes
    double realized_cost = 0.0;
    std::uint64_t seed = 0;
};

// Executes one survey against the true population. Phase 1 contacts the
// planned number of individuals per group (clamped to the group's true size);
// phase 2 samples each selected region at its rate. Individuals reached in
// both phases contribute a single response, the phase-2 one.
SurveyOutcome run_survey(const IndividualIndex &truth, const Allocation &alloc,
                         const SurveyProtocol &protocol, std::uint64_t seed);

// Per-trial, per-group results of repeated surveys plus the truth needed to
// score them. Row-major trials x groups.
struct TrialReport {
    std::size_t trials = 0;
    std::size_t groups = 0;
    std::vector<double> true_means;
    std::vector<std::uint64_t> successes;
    std::vector<double> estimates;
    std::vector<double> errors;          // |estimate - true mean|, NaN when undefined
    std::vector<double> relative_errors; // error / true mean
    std::vector<double> realized_costs;  // per trial

    [[nodiscard]] std::size_t cell(std::size_t trial, std::size_t group) const {
        return trial * groups + group;
    }
    // Error list for one group across trials (NaN entries = undefined).
    [[nodiscard]] std::vector<double> group_errors(std::size_t group) const;
    [[nodiscard]] std::vector<double> group_estimates(std::size_t group) const;
};

// Independent replications with one derived rng stream per trial; per-trial
// results land in fixed slots, so the OpenMP version is bit-identical to the
// serial reference.
TrialReport replicate(const IndividualIndex &truth, const Allocation &alloc,
                      const SurveyProtocol &protocol, std::uint32_t trials, SeedStream seeds);
TrialReport replicate_serial(const IndividualIndex &truth, const Allocation &alloc,
                             const SurveyProtocol &protocol, std::uint32_t trials,
                             SeedStream seeds);

} // namespace survey
