// Command-line front end: config-driven survey design experiments.

#include "survey/csv.hpp"
#include "survey/experiment.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace survey;

std::vector<std::string> split(const std::string &text, char sep) {
    std::vector<std::string> out;
    std::string current;
    for (char c : text) {
        if (c == sep) {
            if (!current.empty()) {
                out.push_back(current);
            }
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        out.push_back(current);
    }
    return out;
}

// "label:size:mean:sd"
SyntheticGroup parse_group(const std::string &text) {
    const auto parts = split(text, ':');
    if (parts.size() != 4) {
        throw CLI::ValidationError("--groups", "expected label:size:mean:sd, got '" + text + "'");
    }
    SyntheticGroup g;
    g.label = parts[0];
    g.size = std::stoull(parts[1]);
    g.mean_value = std::stod(parts[2]);
    g.value_sd = std::stod(parts[3]);
    return g;
}

struct RawOptions {
    std::string epsilons = "inf";
    std::string methods = "standard,heuristic,phase1,two_phase";
    std::string groups;
};

void finalize_config(ExperimentConfig &config, const RawOptions &raw) {
    config.epsilons.clear();
    for (const auto &token : split(raw.epsilons, ',')) {
        config.epsilons.push_back(parse_epsilon(token));
    }
    config.methods.clear();
    for (const auto &token : split(raw.methods, ',')) {
        config.methods.push_back(parse_method(token));
    }
    config.synthetic_groups.clear();
    for (const auto &token : split(raw.groups, ';')) {
        config.synthetic_groups.push_back(parse_group(token));
    }
}

void require_path(const std::string &path, const char *what) {
    if (path.empty()) {
        throw std::runtime_error(std::string(what) + " is required");
    }
}

CountMatrix load_counts(const std::string &path, const PopulationFrame &prior,
                        std::vector<std::string> &region_labels) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    std::vector<std::string> groups;
    const CountMatrix m = counts_from_csv(in, groups, region_labels);
    if (groups != prior.group_labels) {
        throw std::runtime_error("counts file groups do not match the prior frame");
    }
    return m;
}

int run_privatize(const ExperimentConfig &config, const std::string &epsilon_text,
                  double sensitivity, const std::string &output) {
    require_path(config.prior_path, "--prior");
    const auto frame = load_microdata_file(config.prior_path);
    const CountMatrix exact = count_matrix(frame);
    std::optional<PrivacyParams> params;
    const auto epsilon = parse_epsilon(epsilon_text);
    if (epsilon.has_value()) {
        params = PrivacyParams{*epsilon, sensitivity, config.seed};
    }
    const CountMatrix noised = privatize_counts(exact, params);
    write_text_atomic(output, counts_to_csv(noised, frame.group_labels, frame.region_labels));
    std::printf("wrote %s (epsilon=%s)\n", output.c_str(), format_epsilon(epsilon).c_str());
    return 0;
}

int run_fit_proxy(const ExperimentConfig &config, const std::string &counts_path,
                  const std::string &output) {
    require_path(config.prior_path, "--prior");
    const auto prior = load_microdata_file(config.prior_path);
    const IndividualIndex index(prior);
    const auto measurements =
        measure_proxies(index, config.proxy, SeedStream{config.seed}.substream(0x21));
    CountMatrix visible = count_matrix(prior);
    if (!counts_path.empty()) {
        std::vector<std::string> region_labels;
        visible = load_counts(counts_path, prior, region_labels);
    }
    const auto curves = fit_proxies(measurements, visible.group_totals());
    write_text_atomic(output, proxies_to_csv(curves, prior.group_labels));
    std::printf("wrote %s\n", output.c_str());
    return 0;
}

// Cached curves from fit-proxy; must have been fitted against the same
// visible counts that optimize is given.
std::vector<ProxyCurve> load_proxies(const std::string &path, const PopulationFrame &prior) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    const CsvTable table = CsvTable::read(in);
    const std::size_t gcol = table.column("group_id");
    const std::size_t acol = table.column("a");
    const std::size_t rcol = table.column("rss");
    const std::size_t ncol = table.column("n_points");
    std::vector<ProxyCurve> curves(prior.group_count());
    std::vector<bool> seen(prior.group_count(), false);
    for (const auto &row : table.rows) {
        const auto it =
            std::find(prior.group_labels.begin(), prior.group_labels.end(), row[gcol]);
        if (it == prior.group_labels.end()) {
            throw std::runtime_error("proxy file names unknown group '" + row[gcol] + "'");
        }
        const auto g = static_cast<std::size_t>(it - prior.group_labels.begin());
        curves[g].coefficient = std::stod(row[acol]);
        curves[g].rss = std::stod(row[rcol]);
        curves[g].points = std::stoull(row[ncol]);
        seen[g] = true;
    }
    for (std::size_t g = 0; g < seen.size(); ++g) {
        if (!seen[g]) {
            throw std::runtime_error("proxy file misses group '" + prior.group_labels[g] + "'");
        }
    }
    return curves;
}

int run_optimize(const ExperimentConfig &config, const std::string &counts_path,
                 const std::string &proxies_path, const std::string &method_name,
                 const std::string &out_prefix) {
    require_path(config.prior_path, "--prior");
    const auto prior = load_microdata_file(config.prior_path);
    const auto stats = group_stats(prior);
    std::vector<double> means(stats.size());
    for (std::size_t g = 0; g < stats.size(); ++g) {
        means[g] = stats[g].mean;
    }
    CountMatrix visible = count_matrix(prior);
    std::vector<std::string> region_labels = prior.region_labels;
    if (!counts_path.empty()) {
        visible = load_counts(counts_path, prior, region_labels);
    }

    DesignInstance instance;
    if (proxies_path.empty()) {
        const IndividualIndex index(prior);
        const auto measurements =
            measure_proxies(index, config.proxy, SeedStream{config.seed}.substream(0x21));
        instance = build_design(visible, measurements, means, visible.regions, config.design)
                       .instance;
    } else {
        const auto curves = load_proxies(proxies_path, prior);
        const auto totals = visible.group_totals();
        std::vector<double> required(totals.size());
        for (std::size_t g = 0; g < totals.size(); ++g) {
            required[g] = required_samples(curves[g], totals[g], config.design.alpha,
                                           config.design.gamma_fraction * means[g]);
        }
        instance.counts = visible;
        instance.phase1_failure.assign(totals.size(), config.design.phase1_failure);
        instance.phase2_failure.assign(totals.size(), config.design.phase2_failure);
        instance.contact_cost = config.design.contact_cost;
        instance.region_cost = config.design.region_cost;
        instance.region_rate.assign(visible.regions, config.design.region_sampling_rate);
        instance.required = std::move(required);
    }
    const auto alloc =
        make_allocation(parse_method(method_name), instance, config.design, config.node_budget);

    std::string groups_csv = "group_id,p\n";
    std::string regions_csv = "region_id,z\n";
    for (std::size_t g = 0; g < prior.group_labels.size(); ++g) {
        groups_csv +=
            prior.group_labels[g] + ',' + std::to_string(alloc.contact_fraction[g]) + '\n';
    }
    for (std::size_t r = 0; r < region_labels.size(); ++r) {
        regions_csv +=
            region_labels[r] + ',' + std::to_string(int(alloc.region_selected[r])) + '\n';
    }
    write_text_atomic(out_prefix + "_groups.csv", groups_csv);
    write_text_atomic(out_prefix + "_regions.csv", regions_csv);
    write_text_atomic(out_prefix + ".json",
                      allocation_to_json(alloc, prior.group_labels, region_labels));
    std::printf("wrote %s.json (cost %.6g, %zu regions)\n", out_prefix.c_str(), alloc.cost,
                alloc.selected_region_count());
    return 0;
}

int run_simulate(const ExperimentConfig &config, const std::string &allocation_path,
                 const std::string &out_prefix) {
    require_path(config.truth_path, "--truth");
    const auto truth = load_microdata_file(config.truth_path);
    const IndividualIndex index(truth);
    std::ifstream in(allocation_path);
    if (!in) {
        throw std::runtime_error("cannot open '" + allocation_path + "'");
    }
    std::vector<std::string> groups;
    std::vector<std::string> regions;
    const Allocation alloc = allocation_from_json(in, groups, regions);
    if (groups != truth.group_labels) {
        throw std::runtime_error("allocation groups do not match the truth frame");
    }

    // error tolerances come from the prior frame when given, else from truth
    std::vector<double> gammas(truth.group_count());
    const auto stats = group_stats(
        config.prior_path.empty() ? truth : load_microdata_file(config.prior_path));
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        gammas[g] = config.design.gamma_fraction * stats[g].mean;
    }

    const auto protocol =
        make_protocol(config.design, truth.group_count(), truth.region_count());
    const auto report = replicate(index, alloc, protocol, config.trials,
                                  SeedStream{config.seed}.substream(0x41));
    const auto fairness = evaluate_trials(report, truth.group_labels, gammas,
                                          config.design.alpha, alloc.cost, 0.0);
    write_text_atomic(out_prefix + "_trials.csv",
                      trial_report_to_csv(report, truth.group_labels));
    write_text_atomic(out_prefix + "_report.csv", fairness_to_csv(fairness));
    write_text_atomic(out_prefix + "_report.json", fairness_to_json(fairness));
    std::printf("wrote %s_report.json (%u trials)\n", out_prefix.c_str(), config.trials);
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Fair two-phase survey design under per-group confidence constraints"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; command-line flags override it");

    ExperimentConfig config;
    RawOptions raw;

    // global options, also valid after any subcommand name
    app.add_option("--seed", config.seed, "Root rng seed");
    app.add_option("--trials", config.trials, "Simulation replications");
    app.add_option("--output-dir", config.output_dir, "Output directory");
    app.add_option("--prior", config.prior_path, "Prior-year microdata CSV");
    app.add_option("--truth", config.truth_path, "Ground-truth microdata CSV");
    app.add_option("--groups", raw.groups,
                   "Synthetic groups as label:size:mean:sd[;...] (used when no paths given)");
    app.add_option("--region-size", config.region_size, "Target region size for synthetics");
    app.add_option("--mixing", config.mixing, "Spatial mixing in [0,1]");
    app.add_option("--epsilons", raw.epsilons, "Comma list of budgets; 'inf' = no privacy");
    app.add_option("--methods", raw.methods, "Comma list of allocation methods");
    app.add_option("--alpha", config.design.alpha, "Confidence violation budget");
    app.add_option("--gamma-fraction", config.design.gamma_fraction,
                   "Error tolerance as a fraction of each prior group mean");
    app.add_option("--phase1-failure", config.design.phase1_failure, "Phase-1 failure rate");
    app.add_option("--phase2-failure", config.design.phase2_failure, "Phase-2 failure rate");
    app.add_option("--contact-cost", config.design.contact_cost, "Cost per phase-1 contact");
    app.add_option("--region-cost", config.design.region_cost, "Cost per deployed region");
    app.add_option("--region-rate", config.design.region_sampling_rate,
                   "Phase-2 sampling rate per deployed region");
    app.add_option("--contact-rate", config.design.contact_rate,
                   "Contact rate for the baseline allocations");
    app.add_option("--node-budget", config.node_budget, "Branch-and-bound node budget");
    app.add_option("--proxy-max-rate", config.proxy.max_rate, "Largest measured sampling rate");
    app.add_option("--proxy-points", config.proxy.grid_points, "Number of measured rates");
    app.add_option("--proxy-trials", config.proxy.trials, "Trials per measured rate");

    auto *generate = app.add_subcommand("generate", "Write synthetic prior/truth microdata");

    auto *privatize = app.add_subcommand("privatize", "Release noisy group-by-region counts");
    std::string privatize_epsilon = "1";
    double privatize_sensitivity = 1.0;
    std::string privatize_output = "noised_counts.csv";
    privatize->add_option("--input", config.prior_path, "Microdata CSV");
    privatize->add_option("--epsilon", privatize_epsilon, "Privacy loss, or 'inf'");
    privatize->add_option("--sensitivity", privatize_sensitivity, "Count query sensitivity");
    privatize->add_option("--output", privatize_output, "Output counts CSV");

    auto *fit_proxy = app.add_subcommand("fit-proxy", "Fit per-group variance proxy curves");
    std::string fit_counts;
    std::string fit_output = "proxies.csv";
    fit_proxy->add_option("--counts", fit_counts, "Designer-visible counts CSV (optional)");
    fit_proxy->add_option("--output", fit_output, "Output proxy CSV");

    auto *optimize = app.add_subcommand("optimize", "Compute one survey allocation");
    std::string opt_counts;
    std::string opt_method = "two_phase";
    std::string opt_prefix = "allocation";
    std::string opt_proxies;
    optimize->add_option("--counts", opt_counts, "Designer-visible counts CSV (optional)");
    optimize->add_option("--proxies", opt_proxies,
                         "Cached proxy CSV from fit-proxy; skips re-measurement");
    optimize->add_option("--method", opt_method, "standard|heuristic|phase1|two_phase");
    optimize->add_option("--out-prefix", opt_prefix, "Output file prefix");

    auto *simulate = app.add_subcommand("simulate", "Replicate one allocation on ground truth");
    std::string sim_alloc;
    std::string sim_prefix = "simulation";
    simulate->add_option("--allocation", sim_alloc, "Allocation JSON")->required();
    simulate->add_option("--out-prefix", sim_prefix, "Output file prefix");

    auto *run = app.add_subcommand("run", "Full (epsilon x method) experiment grid");

    auto *ablate = app.add_subcommand("ablate", "Optimal cost curve over one parameter");
    std::string ablate_parameter;
    std::string ablate_grid;
    ablate->add_option("--parameter", ablate_parameter, "One of F1,F2,c2,alpha,gamma")
        ->required();
    ablate->add_option("--grid", ablate_grid, "Comma list of parameter values")->required();

    auto *sparsity = app.add_subcommand("sparsity", "Vary region size at fixed budgets");
    std::string sparsity_sizes;
    sparsity->add_option("--sizes", sparsity_sizes, "Comma list of region sizes")->required();

    for (auto *sub : {generate, privatize, fit_proxy, optimize, simulate, run, ablate, sparsity}) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            finalize_config(config, raw);
            return cmd_generate(config);
        }
        if (privatize->parsed()) {
            return run_privatize(config, privatize_epsilon, privatize_sensitivity,
                                 privatize_output);
        }
        if (fit_proxy->parsed()) {
            return run_fit_proxy(config, fit_counts, fit_output);
        }
        if (optimize->parsed()) {
            return run_optimize(config, opt_counts, opt_proxies, opt_method, opt_prefix);
        }
        if (simulate->parsed()) {
            return run_simulate(config, sim_alloc, sim_prefix);
        }
        if (run->parsed()) {
            finalize_config(config, raw);
            return cmd_run(config);
        }
        if (ablate->parsed()) {
            finalize_config(config, raw);
            std::vector<double> grid;
            for (const auto &token : split(ablate_grid, ',')) {
                grid.push_back(std::stod(token));
            }
            return cmd_ablate(config, ablate_parameter, grid);
        }
        if (sparsity->parsed()) {
            finalize_config(config, raw);
            std::vector<std::uint64_t> sizes;
            for (const auto &token : split(sparsity_sizes, ',')) {
                sizes.push_back(std::stoull(token));
            }
            return cmd_sparsity(config, sizes);
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
