#include "survey/experiment.hpp"

#include "survey/csv.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace survey {

namespace {

using json = nlohmann::json;

// Stream tags: one fixed branch of the seed tree per pipeline stage, so
// adding methods or privacy levels never shifts another cell's randomness.
constexpr std::uint64_t kTagGeneratePrior = 0x11;
constexpr std::uint64_t kTagGenerateTruth = 0x12;
constexpr std::uint64_t kTagProxy = 0x21;
constexpr std::uint64_t kTagPrivatize = 0x31;
constexpr std::uint64_t kTagTrials = 0x41;

std::uint64_t epsilon_key(const std::optional<double> &epsilon) {
    return epsilon.has_value() ? std::bit_cast<std::uint64_t>(*epsilon) : 0ULL;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

std::optional<double> parse_epsilon(const std::string &text) {
    if (text == "inf" || text == "none" || text == "no-privacy") {
        return std::nullopt;
    }
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v > 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("invalid epsilon '" + text + "'");
    }
    return v;
}

std::string format_epsilon(const std::optional<double> &epsilon) {
    return epsilon.has_value() ? fmt(*epsilon) : "inf";
}

AllocationMethod parse_method(const std::string &name) {
    if (name == "standard") {
        return AllocationMethod::standard;
    }
    if (name == "heuristic") {
        return AllocationMethod::heuristic;
    }
    if (name == "phase1") {
        return AllocationMethod::phase1;
    }
    if (name == "two_phase") {
        return AllocationMethod::two_phase;
    }
    throw std::invalid_argument("unknown method '" + name + "'");
}

std::vector<GroupProxyMeasurement> measure_proxies(const IndividualIndex &prior,
                                                   const ProxyOptions &options, SeedStream seeds) {
    const auto grid = proxy_rate_grid(options.max_rate, options.grid_points);
    std::vector<GroupProxyMeasurement> out(prior.group_count());
    for (std::size_t g = 0; g < prior.group_count(); ++g) {
        const auto size = static_cast<double>(prior.members_of_group(g).size());
        // Keep only rates the group is large enough to measure.
        std::vector<double> usable;
        for (double x : grid) {
            if (round_half_even(x * size) >= 2) {
                usable.push_back(x);
            }
        }
        if (usable.empty()) {
            throw std::invalid_argument("group too small for any variance measurement");
        }
        const auto points =
            measure_variance(prior, g, usable, options.trials, seeds.substream(g));
        auto &m = out[g];
        m.sample_sizes.reserve(points.size());
        m.variances.reserve(points.size());
        for (const auto &p : points) {
            m.sample_sizes.push_back(static_cast<std::uint64_t>(round_half_even(p.rate * size)));
            m.variances.push_back(p.variance);
        }
    }
    return out;
}

std::vector<ProxyCurve> fit_proxies(std::span<const GroupProxyMeasurement> measurements,
                                    std::span<const double> visible_totals) {
    if (measurements.size() != visible_totals.size()) {
        throw std::invalid_argument("measurement/group count mismatch");
    }
    std::vector<ProxyCurve> curves(measurements.size());
    for (std::size_t g = 0; g < measurements.size(); ++g) {
        const double visible = visible_totals[g];
        if (!(visible > 0.0)) {
            curves[g] = ProxyCurve{}; // designer believes the group is empty
            continue;
        }
        std::vector<VariancePoint> points;
        points.reserve(measurements[g].sample_sizes.size());
        for (std::size_t j = 0; j < measurements[g].sample_sizes.size(); ++j) {
            points.push_back({static_cast<double>(measurements[g].sample_sizes[j]) / visible,
                              measurements[g].variances[j]});
        }
        curves[g] = fit_inverse_curve(points);
    }
    return curves;
}

DesignOutput build_design(const CountMatrix &visible,
                          std::span<const GroupProxyMeasurement> measurements,
                          std::span<const double> prior_means, std::size_t regions,
                          const DesignParams &params) {
    if (visible.regions != regions) {
        throw std::invalid_argument("region count mismatch");
    }
    DesignOutput out;
    const auto totals = visible.group_totals();
    out.curves = fit_proxies(measurements, totals);
    out.gammas.resize(totals.size());
    std::vector<double> requirements(totals.size());
    for (std::size_t g = 0; g < totals.size(); ++g) {
        if (!(prior_means[g] > 0.0)) {
            throw std::invalid_argument("prior group means must be positive");
        }
        out.gammas[g] = params.gamma_fraction * prior_means[g];
        requirements[g] = required_samples(out.curves[g], totals[g], params.alpha, out.gammas[g]);
    }
    out.instance.counts = visible;
    out.instance.phase1_failure.assign(totals.size(), params.phase1_failure);
    out.instance.phase2_failure.assign(totals.size(), params.phase2_failure);
    out.instance.contact_cost = params.contact_cost;
    out.instance.region_cost = params.region_cost;
    out.instance.region_rate.assign(regions, params.region_sampling_rate);
    out.instance.required = std::move(requirements);
    return out;
}

SurveyProtocol make_protocol(const DesignParams &params, std::size_t groups,
                             std::size_t regions) {
    SurveyProtocol protocol;
    protocol.phase1_failure.assign(groups, params.phase1_failure);
    protocol.phase2_failure.assign(groups, params.phase2_failure);
    protocol.region_rate.assign(regions, params.region_sampling_rate);
    protocol.contact_cost = params.contact_cost;
    protocol.region_cost = params.region_cost;
    return protocol;
}

Allocation make_allocation(AllocationMethod method, const DesignInstance &inst,
                           const DesignParams &params, std::uint64_t node_budget) {
    switch (method) {
    case AllocationMethod::standard:
        return standard_allocation(inst, params.contact_rate);
    case AllocationMethod::heuristic:
        return heuristic_allocation(inst, params.contact_rate);
    case AllocationMethod::phase1:
        return optimize_phase1(inst);
    case AllocationMethod::two_phase:
        return optimize_two_phase(inst, TwoPhaseOptions{node_budget});
    case AllocationMethod::brute_force:
        return brute_force_two_phase(inst);
    }
    throw std::invalid_argument("unknown allocation method");
}

RunOutput run_grid(const ExperimentConfig &config, const PopulationFrame &prior,
                   const PopulationFrame &truth) {
    if (prior.group_labels != truth.group_labels) {
        throw std::invalid_argument("prior and truth frames must share group labels");
    }
    if (prior.region_count() != truth.region_count()) {
        throw std::invalid_argument("prior and truth frames must have corresponding regions");
    }
    if (config.methods.empty()) {
        throw std::invalid_argument("at least one method is required");
    }
    const SeedStream seeds{config.seed};
    const IndividualIndex prior_index(prior);
    const IndividualIndex truth_index(truth);
    const auto prior_stats = group_stats(prior);
    std::vector<double> prior_means(prior_stats.size());
    for (std::size_t g = 0; g < prior_stats.size(); ++g) {
        prior_means[g] = prior_stats[g].mean;
    }
    const CountMatrix exact = count_matrix(prior);
    const auto measurements =
        measure_proxies(prior_index, config.proxy, seeds.substream(kTagProxy));
    const auto protocol =
        make_protocol(config.design, prior.group_count(), truth.region_count());

    RunOutput out;
    out.group_labels = prior.group_labels;
    for (const auto &epsilon : config.epsilons) {
        std::optional<PrivacyParams> privacy;
        if (epsilon.has_value()) {
            privacy = PrivacyParams{
                *epsilon, 1.0,
                derive_seed(seeds.substream(kTagPrivatize).root, epsilon_key(epsilon))};
        }
        const CountMatrix visible = privatize_counts(exact, privacy);
        const DesignOutput design =
            build_design(visible, measurements, prior_means, prior.region_count(), config.design);
        const double baseline_cost =
            standard_allocation(design.instance, config.design.contact_rate).cost;

        const auto visible_totals = visible.group_totals();
        for (const auto method : config.methods) {
            CellResult cell;
            cell.epsilon = epsilon;
            cell.method = method;
            cell.visible_totals = visible_totals;
            try {
                cell.allocation =
                    make_allocation(method, design.instance, config.design, config.node_budget);
                const SeedStream trial_seeds = seeds.substream(kTagTrials)
                                                   .substream(epsilon_key(epsilon))
                                                   .substream(static_cast<std::uint64_t>(method));
                const TrialReport trial_report =
                    replicate(truth_index, cell.allocation, protocol, config.trials, trial_seeds);
                cell.report =
                    evaluate_trials(trial_report, prior.group_labels, design.gammas,
                                    config.design.alpha, cell.allocation.cost, baseline_cost);
                cell.ok = true;
            } catch (const std::exception &e) {
                cell.ok = false;
                cell.error = e.what();
                out.exit_code = 2;
            }
            out.cells.push_back(std::move(cell));
        }
    }
    return out;
}

std::pair<PopulationFrame, PopulationFrame> load_or_generate(const ExperimentConfig &config) {
    if (!config.prior_path.empty() || !config.truth_path.empty()) {
        if (config.prior_path.empty() || config.truth_path.empty()) {
            throw std::invalid_argument("both prior and truth paths are required");
        }
        return {load_microdata_file(config.prior_path), load_microdata_file(config.truth_path)};
    }
    if (config.synthetic_groups.empty()) {
        throw std::invalid_argument("either frame paths or synthetic groups must be configured");
    }
    std::uint64_t total = 0;
    for (const auto &g : config.synthetic_groups) {
        total += g.size;
    }
    SyntheticSpec spec;
    spec.groups = config.synthetic_groups;
    spec.regions = static_cast<std::uint32_t>(
        std::max<std::uint64_t>(1, (total + config.region_size - 1) / config.region_size));
    spec.mixing = config.mixing;
    const SeedStream seeds{config.seed};
    spec.seed = seeds.substream(kTagGeneratePrior).root;
    PopulationFrame prior = generate_synthetic(spec);
    spec.seed = seeds.substream(kTagGenerateTruth).root;
    PopulationFrame truth = generate_synthetic(spec);
    return {std::move(prior), std::move(truth)};
}

void write_text_atomic(const std::string &path, const std::string &content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        fs::create_directories(target.parent_path());
    }
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        }
        out << content;
    }
    fs::rename(tmp, target);
}

std::string counts_to_csv(const CountMatrix &m, std::span<const std::string> group_labels,
                          std::span<const std::string> region_labels) {
    std::string out = "group_id,region_id,count\n";
    for (std::size_t g = 0; g < m.groups; ++g) {
        for (std::size_t r = 0; r < m.regions; ++r) {
            out += group_labels[g];
            out += ',';
            out += region_labels[r];
            out += ',';
            out += fmt(m.at(g, r));
            out += '\n';
        }
    }
    return out;
}

CountMatrix counts_from_csv(std::istream &in, std::vector<std::string> &group_labels,
                            std::vector<std::string> &region_labels) {
    const CsvTable table = CsvTable::read(in);
    const std::size_t gcol = table.column("group_id");
    const std::size_t rcol = table.column("region_id");
    const std::size_t ccol = table.column("count");
    group_labels.clear();
    region_labels.clear();
    std::unordered_map<std::string, std::size_t> gids;
    std::unordered_map<std::string, std::size_t> rids;
    std::vector<std::tuple<std::size_t, std::size_t, double>> entries;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &row = table.rows[i];
        const auto [git, gnew] = gids.try_emplace(row[gcol], group_labels.size());
        if (gnew) {
            group_labels.push_back(row[gcol]);
        }
        const auto [rit, rnew] = rids.try_emplace(row[rcol], region_labels.size());
        if (rnew) {
            region_labels.push_back(row[rcol]);
        }
        entries.emplace_back(git->second, rit->second, std::stod(row[ccol]));
    }
    CountMatrix m(group_labels.size(), region_labels.size());
    for (const auto &[g, r, c] : entries) {
        m.at(g, r) = c;
    }
    return m;
}

std::string proxies_to_csv(std::span<const ProxyCurve> curves,
                           std::span<const std::string> group_labels) {
    std::string out = "group_id,a,rss,n_points\n";
    for (std::size_t g = 0; g < curves.size(); ++g) {
        out += group_labels[g];
        out += ',';
        out += fmt(curves[g].coefficient);
        out += ',';
        out += fmt(curves[g].rss);
        out += ',';
        out += std::to_string(curves[g].points);
        out += '\n';
    }
    return out;
}

std::string allocation_to_json(const Allocation &alloc, std::span<const std::string> group_labels,
                               std::span<const std::string> region_labels) {
    json j;
    j["method"] = to_string(alloc.method);
    j["cost"] = alloc.cost;
    j["optimal_proven"] = alloc.optimal_proven;
    j["group_labels"] = std::vector<std::string>(group_labels.begin(), group_labels.end());
    j["region_labels"] = std::vector<std::string>(region_labels.begin(), region_labels.end());
    j["p"] = alloc.contact_fraction;
    j["planned_contacts"] = alloc.planned_contacts;
    j["z"] = alloc.region_selected;
    j["expected_successes"] = alloc.expected_success;
    return j.dump(2) + "\n";
}

Allocation allocation_from_json(std::istream &in, std::vector<std::string> &group_labels,
                                std::vector<std::string> &region_labels) {
    json j;
    in >> j;
    Allocation alloc;
    const std::string method = j.at("method").get<std::string>();
    if (method == "standard") {
        alloc.method = AllocationMethod::standard;
    } else if (method == "heuristic") {
        alloc.method = AllocationMethod::heuristic;
    } else if (method == "phase1") {
        alloc.method = AllocationMethod::phase1;
    } else if (method == "two_phase") {
        alloc.method = AllocationMethod::two_phase;
    } else {
        alloc.method = AllocationMethod::brute_force;
    }
    alloc.cost = j.at("cost").get<double>();
    alloc.optimal_proven = j.at("optimal_proven").get<bool>();
    group_labels = j.at("group_labels").get<std::vector<std::string>>();
    region_labels = j.at("region_labels").get<std::vector<std::string>>();
    alloc.contact_fraction = j.at("p").get<std::vector<double>>();
    alloc.planned_contacts = j.at("planned_contacts").get<std::vector<double>>();
    alloc.region_selected = j.at("z").get<std::vector<std::uint8_t>>();
    alloc.expected_success = j.at("expected_successes").get<std::vector<double>>();
    return alloc;
}

std::string trial_report_to_csv(const TrialReport &report,
                                std::span<const std::string> group_labels) {
    std::string out = "trial,group_id,successes,estimate,error,relative_error\n";
    for (std::size_t t = 0; t < report.trials; ++t) {
        for (std::size_t g = 0; g < report.groups; ++g) {
            const std::size_t cell = report.cell(t, g);
            out += std::to_string(t);
            out += ',';
            out += group_labels[g];
            out += ',';
            out += std::to_string(report.successes[cell]);
            out += ',';
            out += fmt(report.estimates[cell]);
            out += ',';
            out += fmt(report.errors[cell]);
            out += ',';
            out += fmt(report.relative_errors[cell]);
            out += '\n';
        }
    }
    return out;
}

std::string fairness_to_csv(const FairnessReport &report) {
    std::string out = "row_type,group_id,variance,relative_variance,violation_rate,compliant,"
                      "mean_successes,defined_trials,gamma,xi_variance,xi_relative_variance,"
                      "design_cost,mean_realized_cost,cost_pct_of_baseline\n";
    for (const auto &g : report.groups) {
        out += "group," + g.group + ',' + fmt(g.variance) + ',' + fmt(g.relative_variance) + ',' +
               fmt(g.violation_rate) + ',' + (g.compliant ? "1" : "0") + ',' +
               fmt(g.mean_successes) + ',' + std::to_string(g.defined_trials) + ',' +
               fmt(g.gamma) + ",,,,,\n";
    }
    out += "aggregate,__all__,,,,,,,," + fmt(report.xi_variance) + ',' +
           fmt(report.xi_relative_variance) + ',' + fmt(report.design_cost) + ',' +
           fmt(report.mean_realized_cost) + ',' + fmt(report.cost_pct_of_baseline) + '\n';
    return out;
}

std::string fairness_to_json(const FairnessReport &report) {
    json j;
    j["alpha"] = report.alpha;
    j["xi_variance"] = report.xi_variance;
    j["xi_relative_variance"] = report.xi_relative_variance;
    j["design_cost"] = report.design_cost;
    j["mean_realized_cost"] = report.mean_realized_cost;
    if (std::isfinite(report.cost_pct_of_baseline)) {
        j["cost_pct_of_baseline"] = report.cost_pct_of_baseline;
    }
    j["groups"] = json::array();
    for (const auto &g : report.groups) {
        j["groups"].push_back({{"group", g.group},
                               {"variance", g.variance},
                               {"relative_variance", g.relative_variance},
                               {"mean_estimate", g.mean_estimate},
                               {"mean_successes", g.mean_successes},
                               {"defined_trials", g.defined_trials},
                               {"gamma", g.gamma},
                               {"violation_rate", g.violation_rate},
                               {"compliant", g.compliant}});
    }
    return j.dump(2) + "\n";
}

std::string plot_csv_header() { return "epsilon,method,group,metric,value\n"; }

void append_plot_rows(std::string &csv, const CellResult &cell) {
    if (!cell.ok) {
        return;
    }
    const std::string prefix =
        format_epsilon(cell.epsilon) + ',' + to_string(cell.method) + ',';
    for (std::size_t g = 0; g < cell.report.groups.size(); ++g) {
        const auto &gr = cell.report.groups[g];
        const std::string row = prefix + gr.group + ',';
        csv += row + "planned_contacts," + fmt(cell.allocation.planned_contacts[g]) + '\n';
        csv += row + "mean_successes," + fmt(gr.mean_successes) + '\n';
        csv += row + "variance," + fmt(gr.variance) + '\n';
        csv += row + "relative_variance," + fmt(gr.relative_variance) + '\n';
        csv += row + "violation_rate," + fmt(gr.violation_rate) + '\n';
        csv += row + "compliant," + (gr.compliant ? std::string("1") : std::string("0")) + '\n';
    }
    const std::string all = prefix + "__all__,";
    csv += all + "xi_variance," + fmt(cell.report.xi_variance) + '\n';
    csv += all + "xi_relative_variance," + fmt(cell.report.xi_relative_variance) + '\n';
    csv += all + "design_cost," + fmt(cell.report.design_cost) + '\n';
    csv += all + "cost_pct_of_baseline," + fmt(cell.report.cost_pct_of_baseline) + '\n';
    csv += all + "mean_realized_cost," + fmt(cell.report.mean_realized_cost) + '\n';
}

namespace {

std::string cell_basename(const CellResult &cell) {
    return "report_eps-" + format_epsilon(cell.epsilon) + "_" +
           std::string(to_string(cell.method));
}

json config_to_json(const ExperimentConfig &config) {
    json j;
    j["seed"] = config.seed;
    j["trials"] = config.trials;
    j["region_size"] = config.region_size;
    j["mixing"] = config.mixing;
    j["output_dir"] = config.output_dir;
    j["alpha"] = config.design.alpha;
    j["gamma_fraction"] = config.design.gamma_fraction;
    j["phase1_failure"] = config.design.phase1_failure;
    j["phase2_failure"] = config.design.phase2_failure;
    j["contact_cost"] = config.design.contact_cost;
    j["region_cost"] = config.design.region_cost;
    j["region_sampling_rate"] = config.design.region_sampling_rate;
    j["contact_rate"] = config.design.contact_rate;
    j["epsilons"] = json::array();
    for (const auto &e : config.epsilons) {
        j["epsilons"].push_back(format_epsilon(e));
    }
    j["methods"] = json::array();
    for (const auto m : config.methods) {
        j["methods"].push_back(to_string(m));
    }
    return j;
}

} // namespace

int cmd_generate(const ExperimentConfig &config) {
    if (config.synthetic_groups.empty()) {
        throw std::invalid_argument("generate requires synthetic group definitions");
    }
    ExperimentConfig synth = config;
    synth.prior_path.clear();
    synth.truth_path.clear();
    const auto [prior, truth] = load_or_generate(synth);
    std::ostringstream prior_csv;
    save_microdata(prior, prior_csv);
    std::ostringstream truth_csv;
    save_microdata(truth, truth_csv);
    write_text_atomic(config.output_dir + "/prior.csv", prior_csv.str());
    write_text_atomic(config.output_dir + "/truth.csv", truth_csv.str());
    return 0;
}

int cmd_run(const ExperimentConfig &config) {
    const auto [prior, truth] = load_or_generate(config);
    const RunOutput output = run_grid(config, prior, truth);

    std::string plot = plot_csv_header();
    json summary;
    summary["config"] = config_to_json(config);
    summary["cells"] = json::array();
    for (const auto &cell : output.cells) {
        json cj;
        cj["epsilon"] = format_epsilon(cell.epsilon);
        cj["method"] = to_string(cell.method);
        cj["ok"] = cell.ok;
        if (cell.ok) {
            const std::string base = config.output_dir + "/" + cell_basename(cell);
            write_text_atomic(base + ".csv", fairness_to_csv(cell.report));
            write_text_atomic(base + ".json", fairness_to_json(cell.report));
            write_text_atomic(base + "_allocation.json",
                              allocation_to_json(cell.allocation, prior.group_labels,
                                                 prior.region_labels));
            append_plot_rows(plot, cell);
        } else {
            cj["error"] = cell.error;
        }
        summary["cells"].push_back(cj);
    }
    summary["exit_code"] = output.exit_code;
    write_text_atomic(config.output_dir + "/plot_data.csv", plot);
    write_text_atomic(config.output_dir + "/run_summary.json", summary.dump(2) + "\n");
    return output.exit_code;
}

int cmd_ablate(const ExperimentConfig &config, const std::string &parameter,
               std::span<const double> grid) {
    if (grid.empty()) {
        throw std::invalid_argument("ablation grid is empty");
    }
    const auto [prior, truth] = load_or_generate(config);
    (void)truth; // cost curves need the design stage only
    const SeedStream seeds{config.seed};
    const IndividualIndex prior_index(prior);
    const auto prior_stats = group_stats(prior);
    std::vector<double> prior_means(prior_stats.size());
    for (std::size_t g = 0; g < prior_stats.size(); ++g) {
        prior_means[g] = prior_stats[g].mean;
    }
    const CountMatrix exact = count_matrix(prior);
    const auto measurements =
        measure_proxies(prior_index, config.proxy, seeds.substream(kTagProxy));

    std::string csv = "parameter,value,total_cost,feasible,optimal_proven,regions_selected\n";
    for (const double value : grid) {
        DesignParams params = config.design;
        if (parameter == "F1") {
            params.phase1_failure = value;
        } else if (parameter == "F2") {
            params.phase2_failure = value;
        } else if (parameter == "c2") {
            params.region_cost = value;
        } else if (parameter == "alpha") {
            params.alpha = value;
        } else if (parameter == "gamma") {
            params.gamma_fraction = value;
        } else {
            throw std::invalid_argument("unknown ablation parameter '" + parameter + "'");
        }
        std::string row = parameter + ',' + fmt(value) + ',';
        try {
            const DesignOutput design =
                build_design(exact, measurements, prior_means, prior.region_count(), params);
            const Allocation alloc =
                optimize_two_phase(design.instance, TwoPhaseOptions{config.node_budget});
            row += fmt(alloc.cost) + ",1," + (alloc.optimal_proven ? "1" : "0") + ',' +
                   std::to_string(alloc.selected_region_count());
        } catch (const InfeasibleError &) {
            row += ",0,,";
        }
        csv += row + '\n';
    }
    write_text_atomic(config.output_dir + "/ablate_" + parameter + ".csv", csv);
    return 0;
}

int cmd_sparsity(const ExperimentConfig &config, std::span<const std::uint64_t> region_sizes) {
    if (region_sizes.empty()) {
        throw std::invalid_argument("no region sizes given");
    }
    const auto [prior, truth] = load_or_generate(config);
    std::string csv = "region_size,epsilon,method,group,variance,relative_variance,"
                      "violation_rate,aggregate_bias,visible_count,true_count\n";
    int exit_code = 0;
    for (const std::uint64_t size : region_sizes) {
        if (size < 1) {
            throw std::invalid_argument("region sizes must be >= 1");
        }
        const PopulationFrame prior_s = repartition_regions(prior, size);
        const PopulationFrame truth_s = repartition_regions(truth, size);
        ExperimentConfig cell_config = config;
        cell_config.region_size = size;
        const RunOutput output = run_grid(cell_config, prior_s, truth_s);
        exit_code = std::max(exit_code, output.exit_code);

        const CountMatrix exact = count_matrix(prior_s);
        const auto true_totals = exact.group_totals();
        for (const auto &cell : output.cells) {
            if (!cell.ok) {
                continue;
            }
            for (std::size_t g = 0; g < cell.report.groups.size(); ++g) {
                double bias = 0.0;
                if (cell.epsilon.has_value()) {
                    std::vector<double> row(exact.regions);
                    for (std::size_t r = 0; r < exact.regions; ++r) {
                        row[r] = exact.at(g, r);
                    }
                    bias = aggregate_bias(row, PrivacyParams{*cell.epsilon, 1.0, 0});
                }
                const auto &gr = cell.report.groups[g];
                csv += std::to_string(size) + ',' + format_epsilon(cell.epsilon) + ',' +
                       to_string(cell.method) + ',' + gr.group + ',' + fmt(gr.variance) + ',' +
                       fmt(gr.relative_variance) + ',' + fmt(gr.violation_rate) + ',' +
                       fmt(bias) + ',' + fmt(cell.visible_totals[g]) + ',' +
                       fmt(true_totals[g]) + '\n';
            }
        }
    }
    write_text_atomic(config.output_dir + "/sparsity.csv", csv);
    return exit_code;
}

} // namespace survey
