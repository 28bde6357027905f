#include "survey/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace survey {

double fairness_xi(std::span<const double> variances) {
    if (variances.size() < 2) {
        throw std::invalid_argument("fairness_xi requires at least two groups");
    }
    const auto [lo, hi] = std::minmax_element(variances.begin(), variances.end());
    return *hi - *lo;
}

ComplianceResult confidence_compliance(std::span<const double> errors, double gamma,
                                       double alpha) {
    if (errors.empty()) {
        throw std::invalid_argument("confidence_compliance requires a nonempty error list");
    }
    std::size_t violations = 0;
    for (double e : errors) {
        if (std::isnan(e) || e > gamma) {
            ++violations;
        }
    }
    ComplianceResult result;
    result.violation_rate = static_cast<double>(violations) / static_cast<double>(errors.size());
    result.pass = result.violation_rate <= alpha;
    return result;
}

std::vector<ComplianceResult>
confidence_compliance(const std::vector<std::vector<double>> &errors_by_group,
                      std::span<const double> gammas, double alpha) {
    if (errors_by_group.size() != gammas.size()) {
        throw std::invalid_argument("one gamma per group is required");
    }
    std::vector<ComplianceResult> out(errors_by_group.size());
    for (std::size_t g = 0; g < errors_by_group.size(); ++g) {
        out[g] = confidence_compliance(errors_by_group[g], gammas[g], alpha);
    }
    return out;
}

double rse(double sigma, double mu, std::uint64_t n) {
    if (sigma < 0.0) {
        throw std::invalid_argument("sigma must be >= 0");
    }
    if (mu == 0.0) {
        throw std::invalid_argument("rse undefined for zero mean");
    }
    if (n == 0) {
        throw std::invalid_argument("sample size must be positive");
    }
    return (sigma / std::sqrt(static_cast<double>(n))) / mu;
}

std::vector<double> coefficient_of_variation(std::span<const GroupStats> stats) {
    std::vector<double> out;
    out.reserve(stats.size());
    for (const auto &s : stats) {
        if (!(s.mean > 0.0)) {
            throw std::invalid_argument("coefficient of variation requires positive means");
        }
        out.push_back(std::sqrt(s.variance) / s.mean);
    }
    return out;
}

double diversity_index(std::span<const double> counts) {
    double total = 0.0;
    for (double c : counts) {
        if (c < 0.0) {
            throw std::invalid_argument("counts must be >= 0");
        }
        total += c;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("diversity index requires a positive total");
    }
    double sum_sq = 0.0;
    for (double c : counts) {
        const double share = c / total;
        sum_sq += share * share;
    }
    return 1.0 - sum_sq;
}

FairnessReport evaluate_trials(const TrialReport &report, std::span<const std::string> labels,
                               std::span<const double> gammas, double alpha, double design_cost,
                               double baseline_cost) {
    if (labels.size() != report.groups || gammas.size() != report.groups) {
        throw std::invalid_argument("labels and gammas must match the report's groups");
    }
    FairnessReport out;
    out.alpha = alpha;
    out.design_cost = design_cost;
    double cost_sum = 0.0;
    for (double c : report.realized_costs) {
        cost_sum += c;
    }
    out.mean_realized_cost = report.trials > 0 ? cost_sum / report.trials : 0.0;
    out.cost_pct_of_baseline = baseline_cost > 0.0
                                   ? 100.0 * design_cost / baseline_cost
                                   : std::numeric_limits<double>::quiet_NaN();

    std::vector<double> variances(report.groups, 0.0);
    std::vector<double> relative(report.groups, 0.0);
    out.groups.resize(report.groups);
    for (std::size_t g = 0; g < report.groups; ++g) {
        GroupReport &gr = out.groups[g];
        gr.group = labels[g];
        gr.gamma = gammas[g];

        double sum = 0.0;
        std::uint64_t defined = 0;
        double success_sum = 0.0;
        for (std::size_t t = 0; t < report.trials; ++t) {
            const std::size_t cell = report.cell(t, g);
            success_sum += static_cast<double>(report.successes[cell]);
            const double est = report.estimates[cell];
            if (!std::isnan(est)) {
                sum += est;
                ++defined;
            }
        }
        gr.defined_trials = defined;
        gr.mean_successes = report.trials > 0 ? success_sum / report.trials : 0.0;
        gr.mean_estimate = defined > 0 ? sum / static_cast<double>(defined) : 0.0;
        double sq = 0.0;
        if (defined > 0) {
            for (std::size_t t = 0; t < report.trials; ++t) {
                const double est = report.estimates[report.cell(t, g)];
                if (!std::isnan(est)) {
                    const double d = est - gr.mean_estimate;
                    sq += d * d;
                }
            }
            gr.variance = sq / static_cast<double>(defined);
        }
        const double mean = report.true_means[g];
        gr.relative_variance = mean != 0.0 ? gr.variance / (mean * mean) : 0.0;
        variances[g] = gr.variance;
        relative[g] = gr.relative_variance;

        const auto compliance = confidence_compliance(report.group_errors(g), gammas[g], alpha);
        gr.violation_rate = compliance.violation_rate;
        gr.compliant = compliance.pass;
    }
    if (report.groups >= 2) {
        out.xi_variance = fairness_xi(variances);
        out.xi_relative_variance = fairness_xi(relative);
    }
    return out;
}

} // namespace survey
