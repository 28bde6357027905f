#include "survey/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace survey {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Reusable per-thread buffers; the epoch trick avoids clearing the stamp
// array between trials.
struct Workspace {
    std::vector<std::uint32_t> stamp;
    std::uint32_t epoch = 0;
    std::vector<double> sums;
    std::vector<std::uint64_t> successes;

    void prepare(std::size_t individuals, std::size_t groups) {
        if (stamp.size() != individuals) {
            stamp.assign(individuals, 0);
            epoch = 0;
        }
        ++epoch;
        if (epoch == 0) { // wrapped
            std::fill(stamp.begin(), stamp.end(), 0);
            epoch = 1;
        }
        sums.assign(groups, 0.0);
        successes.assign(groups, 0);
    }
};

void check_dimensions(const IndividualIndex &truth, const Allocation &alloc,
                      const SurveyProtocol &protocol) {
    const std::size_t groups = truth.group_count();
    const std::size_t regions = truth.region_count();
    if (alloc.contact_fraction.size() != groups || alloc.planned_contacts.size() != groups ||
        alloc.region_selected.size() != regions) {
        throw std::invalid_argument("allocation dimensions do not match population");
    }
    if (protocol.phase1_failure.size() != groups || protocol.phase2_failure.size() != groups ||
        protocol.region_rate.size() != regions) {
        throw std::invalid_argument("protocol dimensions do not match population");
    }
}

SurveyOutcome run_survey_with(const IndividualIndex &truth, const Allocation &alloc,
                              const SurveyProtocol &protocol, std::uint64_t seed,
                              Workspace &ws) {
    const std::size_t groups = truth.group_count();
    const std::size_t regions = truth.region_count();
    Rng rng(seed);
    ws.prepare(truth.total(), groups);

    // Contact sets are drawn up front (phase 1 by group, phase 2 by selected
    // region), then responses are resolved phase 2 first so an individual
    // reached twice keeps the door-to-door outcome.
    std::vector<std::vector<std::uint32_t>> phase1_picks(groups);
    std::uint64_t phase1_contacts = 0;
    for (std::size_t g = 0; g < groups; ++g) {
        const auto &members = truth.members_of_group(g);
        const auto want = round_half_even(alloc.planned_contacts[g]);
        const auto k = static_cast<std::uint32_t>(
            std::clamp<std::int64_t>(want, 0, static_cast<std::int64_t>(members.size())));
        phase1_contacts += k;
        phase1_picks[g] = sample_without_replacement(
            static_cast<std::uint32_t>(members.size()), k, rng);
    }
    std::vector<std::vector<std::uint32_t>> phase2_picks(regions);
    std::size_t deployed = 0;
    for (std::size_t r = 0; r < regions; ++r) {
        if (!alloc.region_selected[r]) {
            continue;
        }
        ++deployed;
        const auto &members = truth.members_of_region(r);
        const auto want = round_half_even(protocol.region_rate[r] *
                                          static_cast<double>(members.size()));
        const auto k = static_cast<std::uint32_t>(
            std::clamp<std::int64_t>(want, 0, static_cast<std::int64_t>(members.size())));
        phase2_picks[r] = sample_without_replacement(
            static_cast<std::uint32_t>(members.size()), k, rng);
    }

    const auto &values = truth.values();
    const auto &group_of = truth.group_of();
    for (std::size_t r = 0; r < regions; ++r) {
        const auto &members = truth.members_of_region(r);
        for (std::uint32_t position : phase2_picks[r]) {
            const std::uint32_t id = members[position];
            ws.stamp[id] = ws.epoch;
            const std::uint32_t g = group_of[id];
            if (rng.uniform01() < 1.0 - protocol.phase2_failure[g]) {
                ws.sums[g] += values[id];
                ++ws.successes[g];
            }
        }
    }
    for (std::size_t g = 0; g < groups; ++g) {
        const auto &members = truth.members_of_group(g);
        const double respond = 1.0 - protocol.phase1_failure[g];
        for (std::uint32_t position : phase1_picks[g]) {
            const std::uint32_t id = members[position];
            if (ws.stamp[id] == ws.epoch) {
                continue; // already reached in phase 2
            }
            if (rng.uniform01() < respond) {
                ws.sums[g] += values[id];
                ++ws.successes[g];
            }
        }
    }

    SurveyOutcome outcome;
    outcome.seed = seed;
    outcome.successes.assign(groups, 0);
    outcome.estimates.assign(groups, kNaN);
    for (std::size_t g = 0; g < groups; ++g) {
        outcome.successes[g] = ws.successes[g];
        if (ws.successes[g] > 0) {
            outcome.estimates[g] = ws.sums[g] / static_cast<double>(ws.successes[g]);
        }
    }
    outcome.realized_cost = protocol.contact_cost * static_cast<double>(phase1_contacts) +
                            protocol.region_cost * static_cast<double>(deployed);
    return outcome;
}

TrialReport replicate_impl(const IndividualIndex &truth, const Allocation &alloc,
                           const SurveyProtocol &protocol, std::uint32_t trials,
                           SeedStream seeds, bool parallel) {
    if (trials < 1) {
        throw std::invalid_argument("replicate requires at least one trial");
    }
    check_dimensions(truth, alloc, protocol);

    TrialReport report;
    report.trials = trials;
    report.groups = truth.group_count();
    report.true_means = truth.group_means();
    report.successes.assign(static_cast<std::size_t>(trials) * report.groups, 0);
    report.estimates.assign(report.successes.size(), kNaN);
    report.errors.assign(report.successes.size(), kNaN);
    report.relative_errors.assign(report.successes.size(), kNaN);
    report.realized_costs.assign(trials, 0.0);

#ifdef _OPENMP
#pragma omp parallel if (parallel)
    {
        Workspace ws;
#pragma omp for schedule(dynamic, 8)
        for (std::int64_t t = 0; t < static_cast<std::int64_t>(trials); ++t) {
            const std::uint64_t seed = derive_seed(seeds.root, static_cast<std::uint64_t>(t));
            const SurveyOutcome outcome = run_survey_with(truth, alloc, protocol, seed, ws);
            const auto trial = static_cast<std::size_t>(t);
            report.realized_costs[trial] = outcome.realized_cost;
            for (std::size_t g = 0; g < report.groups; ++g) {
                const std::size_t cell = report.cell(trial, g);
                report.successes[cell] = outcome.successes[g];
                report.estimates[cell] = outcome.estimates[g];
                if (outcome.successes[g] > 0) {
                    const double err = std::abs(outcome.estimates[g] - report.true_means[g]);
                    report.errors[cell] = err;
                    report.relative_errors[cell] = err / report.true_means[g];
                }
            }
        }
    }
#else
    (void)parallel;
    Workspace ws;
    for (std::uint32_t t = 0; t < trials; ++t) {
        const std::uint64_t seed = derive_seed(seeds.root, t);
        const SurveyOutcome outcome = run_survey_with(truth, alloc, protocol, seed, ws);
        report.realized_costs[t] = outcome.realized_cost;
        for (std::size_t g = 0; g < report.groups; ++g) {
            const std::size_t cell = report.cell(t, g);
            report.successes[cell] = outcome.successes[g];
            report.estimates[cell] = outcome.estimates[g];
            if (outcome.successes[g] > 0) {
                const double err = std::abs(outcome.estimates[g] - report.true_means[g]);
                report.errors[cell] = err;
                report.relative_errors[cell] = err / report.true_means[g];
            }
        }
    }
#endif
    return report;
}

} // namespace

std::vector<double> TrialReport::group_errors(std::size_t group) const {
    std::vector<double> out(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        out[t] = errors[cell(t, group)];
    }
    return out;
}

std::vector<double> TrialReport::group_estimates(std::size_t group) const {
    std::vector<double> out(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        out[t] = estimates[cell(t, group)];
    }
    return out;
}

SurveyOutcome run_survey(const IndividualIndex &truth, const Allocation &alloc,
                         const SurveyProtocol &protocol, std::uint64_t seed) {
    check_dimensions(truth, alloc, protocol);
    Workspace ws;
    return run_survey_with(truth, alloc, protocol, seed, ws);
}

TrialReport replicate(const IndividualIndex &truth, const Allocation &alloc,
                      const SurveyProtocol &protocol, std::uint32_t trials, SeedStream seeds) {
    return replicate_impl(truth, alloc, protocol, trials, seeds, true);
}

TrialReport replicate_serial(const IndividualIndex &truth, const Allocation &alloc,
                             const SurveyProtocol &protocol, std::uint32_t trials,
                             SeedStream seeds) {
    return replicate_impl(truth, alloc, protocol, trials, seeds, false);
}

} // namespace survey
