#pragma once

#include "survey/allocator.hpp"
#include "survey/metrics.hpp"
#include "survey/population.hpp"
#include "survey/privacy.hpp"
#include "survey/simulator.hpp"
#include "survey/variance_proxy.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace survey {

struct DesignParams {
    double alpha = 0.1;
    double gamma_fraction = 0.1; // gamma_i = fraction * prior group mean
    double phase1_failure = 0.6;
    double phase2_failure = 0.2;
    double contact_cost = 1.0;
    double region_cost = 500.0;
    double region_sampling_rate = 0.1;
    double contact_rate = 0.01; // rho for the baseline allocations
};

struct ProxyOptions {
    double max_rate = 0.1;
    std::size_t grid_points = 20;
    std::uint32_t trials = 200;
};

struct ExperimentConfig {
    // Input data: file paths, or a synthetic population when paths are empty.
    std::string prior_path;
    std::string truth_path;
    std::vector<SyntheticGroup> synthetic_groups;
    std::uint64_t region_size = 4000;
    double mixing = 1.0;

    std::vector<std::optional<double>> epsilons{std::nullopt};
    std::vector<AllocationMethod> methods{AllocationMethod::standard,
                                          AllocationMethod::heuristic, AllocationMethod::phase1,
                                          AllocationMethod::two_phase};
    DesignParams design;
    ProxyOptions proxy;
    std::uint32_t trials = 1000;
    std::uint64_t seed = 1;
    std::uint64_t node_budget = 1'000'000;
    std::string output_dir = "out";
};

// "inf" / "none" denote the no-privacy sentinel.
std::optional<double> parse_epsilon(const std::string &text);
std::string format_epsilon(const std::optional<double> &epsilon);
AllocationMethod parse_method(const std::string &name);

// Raw variance measurements for one group: the sample sizes actually drawn
// and the measured estimator variances. Kept in absolute sample sizes so the
// points can be re-expressed against whatever group size the designer sees.
struct GroupProxyMeasurement {
    std::vector<std::uint64_t> sample_sizes;
    std::vector<double> variances;
};

std::vector<GroupProxyMeasurement> measure_proxies(const IndividualIndex &prior,
                                                   const ProxyOptions &options, SeedStream seeds);

// Designer-side fit: rates are sample sizes divided by the visible (possibly
// noised) group totals. With noise the fitted coefficient shifts but the
// product a_i * N_i stays put, which is what keeps the phase-1 optimum stable
// across privacy budgets.
std::vector<ProxyCurve> fit_proxies(std::span<const GroupProxyMeasurement> measurements,
                                    std::span<const double> visible_totals);

// Everything the optimizers need for one privacy level.
struct DesignOutput {
    DesignInstance instance;
    std::vector<ProxyCurve> curves;
    std::vector<double> gammas;
};

DesignOutput build_design(const CountMatrix &visible,
                          std::span<const GroupProxyMeasurement> measurements,
                          std::span<const double> prior_means, std::size_t regions,
                          const DesignParams &params);

SurveyProtocol make_protocol(const DesignParams &params, std::size_t groups, std::size_t regions);

Allocation make_allocation(AllocationMethod method, const DesignInstance &inst,
                           const DesignParams &params, std::uint64_t node_budget);

struct CellResult {
    std::optional<double> epsilon;
    AllocationMethod method = AllocationMethod::standard;
    bool ok = false;
    std::string error;
    Allocation allocation;
    FairnessReport report;
    std::vector<double> visible_totals; // designer-visible group sizes
};

struct RunOutput {
    std::vector<CellResult> cells;
    std::vector<std::string> group_labels;
    int exit_code = 0; // 0 all cells ok, 2 some cells failed
};

// The full grid: for each (epsilon, method), privatize counts, fit proxies,
// compute requirements, allocate, and replicate on the truth frame.
RunOutput run_grid(const ExperimentConfig &config, const PopulationFrame &prior,
                   const PopulationFrame &truth);

// Loads the configured frames, generating synthetics when no paths are set.
std::pair<PopulationFrame, PopulationFrame> load_or_generate(const ExperimentConfig &config);

// Subcommand entry points; all write CSV/JSON into config.output_dir and
// return a process exit code (0 ok, 2 partial failure).
int cmd_generate(const ExperimentConfig &config);
int cmd_run(const ExperimentConfig &config);
int cmd_ablate(const ExperimentConfig &config, const std::string &parameter,
               std::span<const double> grid);
int cmd_sparsity(const ExperimentConfig &config, std::span<const std::uint64_t> region_sizes);

// Serialization shared by subcommands and tests.
void write_text_atomic(const std::string &path, const std::string &content);
std::string counts_to_csv(const CountMatrix &m, std::span<const std::string> group_labels,
                          std::span<const std::string> region_labels);
CountMatrix counts_from_csv(std::istream &in, std::vector<std::string> &group_labels,
                            std::vector<std::string> &region_labels);
std::string proxies_to_csv(std::span<const ProxyCurve> curves,
                           std::span<const std::string> group_labels);
std::string allocation_to_json(const Allocation &alloc, std::span<const std::string> group_labels,
                               std::span<const std::string> region_labels);
Allocation allocation_from_json(std::istream &in, std::vector<std::string> &group_labels,
                                std::vector<std::string> &region_labels);
std::string trial_report_to_csv(const TrialReport &report,
                                std::span<const std::string> group_labels);
std::string fairness_to_csv(const FairnessReport &report);
std::string fairness_to_json(const FairnessReport &report);
std::string plot_csv_header();
void append_plot_rows(std::string &csv, const CellResult &cell);

} // namespace survey
