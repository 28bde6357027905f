#pragma once

#include "survey/population.hpp"
#include "survey/simulator.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace survey {

// Maximum pairwise absolute difference of group estimator variances;
// 0 means perfect fairness.
double fairness_xi(std::span<const double> variances);

struct ComplianceResult {
    double violation_rate = 0.0;
    bool pass = false;
};

// Fraction of trials whose error exceeds gamma; NaN errors (undefined
// estimates) count as violations.
ComplianceResult confidence_compliance(std::span<const double> errors, double gamma, double alpha);
std::vector<ComplianceResult>
confidence_compliance(const std::vector<std::vector<double>> &errors_by_group,
                      std::span<const double> gammas, double alpha);

// Relative standard error (sigma / sqrt(n)) / mu.
double rse(double sigma, double mu, std::uint64_t n);

// sigma / mu per group; means must be positive.
std::vector<double> coefficient_of_variation(std::span<const GroupStats> stats);

// Simpson's index of diversity: 1 - sum((N_i / N)^2).
double diversity_index(std::span<const double> counts);

struct GroupReport {
    std::string group;
    double variance = 0.0;          // across trials, defined estimates only
    double relative_variance = 0.0; // variance of estimate / true mean
    double mean_estimate = 0.0;
    double mean_successes = 0.0;
    std::uint64_t defined_trials = 0;
    double gamma = 0.0;
    double violation_rate = 0.0;
    bool compliant = false;
};

struct FairnessReport {
    std::vector<GroupReport> groups;
    double xi_variance = 0.0;
    double xi_relative_variance = 0.0;
    double alpha = 0.0;
    double design_cost = 0.0;
    double mean_realized_cost = 0.0;
    double cost_pct_of_baseline = 0.0; // NaN when no baseline was supplied
};

// Scores a trial report against per-group error tolerances. `design_cost` is
// the allocation's objective value; `baseline_cost` (when > 0) is the
// standard-allocation reference for relative cost reporting.
FairnessReport evaluate_trials(const TrialReport &report, std::span<const std::string> labels,
                               std::span<const double> gammas, double alpha, double design_cost,
                               double baseline_cost);

} // namespace survey
