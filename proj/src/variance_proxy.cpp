#include "survey/variance_proxy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace survey {

std::vector<double> proxy_rate_grid(double max_rate, std::size_t points) {
    if (!(max_rate > 0.0 && max_rate <= 1.0) || points == 0) {
        throw std::invalid_argument("invalid proxy rate grid");
    }
    std::vector<double> rates(points);
    for (std::size_t j = 0; j < points; ++j) {
        rates[j] = max_rate * static_cast<double>(j + 1) / static_cast<double>(points);
    }
    return rates;
}

namespace {

double sample_mean(const std::vector<double> &values, const std::vector<std::uint32_t> &members,
                   std::uint32_t sample_size, Rng &rng) {
    const auto n = static_cast<std::uint32_t>(members.size());
    const auto picks = sample_without_replacement(n, sample_size, rng);
    double sum = 0.0;
    for (std::uint32_t position : picks) {
        sum += values[members[position]];
    }
    return sum / static_cast<double>(sample_size);
}

std::vector<VariancePoint> measure_variance_impl(const IndividualIndex &individuals,
                                                 std::size_t group, std::span<const double> rates,
                                                 std::uint32_t trials, SeedStream seeds,
                                                 bool parallel) {
    if (group >= individuals.group_count()) {
        throw std::invalid_argument("group index out of range");
    }
    if (trials < 2) {
        throw std::invalid_argument("variance measurement requires at least 2 trials");
    }
    const auto &members = individuals.members_of_group(group);
    if (members.empty()) {
        throw std::invalid_argument("group has no members");
    }
    const auto group_size = static_cast<double>(members.size());

    std::vector<std::uint32_t> sample_sizes(rates.size());
    for (std::size_t j = 0; j < rates.size(); ++j) {
        const double x = rates[j];
        if (!(x > 0.0 && x <= 1.0)) {
            throw std::invalid_argument("sampling rate must lie in (0,1]");
        }
        const std::int64_t k = round_half_even(x * group_size);
        if (k < 2) {
            throw std::invalid_argument("rate " + std::to_string(x) +
                                        " yields sample size < 2 for this group");
        }
        sample_sizes[j] = static_cast<std::uint32_t>(
            std::min<std::int64_t>(k, static_cast<std::int64_t>(members.size())));
    }

    // One stream per (rate, trial); means land in fixed slots so the
    // reduction below is scheduling-independent.
    const std::size_t tasks = rates.size() * trials;
    std::vector<double> means(tasks);
    const auto &values = individuals.values();
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
#else
    (void)parallel;
#endif
    for (std::int64_t task = 0; task < static_cast<std::int64_t>(tasks); ++task) {
        const std::size_t j = static_cast<std::size_t>(task) / trials;
        Rng rng = seeds.stream(static_cast<std::uint64_t>(task));
        means[static_cast<std::size_t>(task)] = sample_mean(values, members, sample_sizes[j], rng);
    }

    std::vector<VariancePoint> out(rates.size());
    for (std::size_t j = 0; j < rates.size(); ++j) {
        double sum = 0.0;
        for (std::uint32_t t = 0; t < trials; ++t) {
            sum += means[j * trials + t];
        }
        const double mean_of_means = sum / trials;
        double sq = 0.0;
        for (std::uint32_t t = 0; t < trials; ++t) {
            const double d = means[j * trials + t] - mean_of_means;
            sq += d * d;
        }
        out[j] = {rates[j], sq / trials};
    }
    return out;
}

} // namespace

std::vector<VariancePoint> measure_variance(const IndividualIndex &individuals, std::size_t group,
                                            std::span<const double> rates, std::uint32_t trials,
                                            SeedStream seeds) {
    return measure_variance_impl(individuals, group, rates, trials, seeds, true);
}

std::vector<VariancePoint> measure_variance_serial(const IndividualIndex &individuals,
                                                   std::size_t group,
                                                   std::span<const double> rates,
                                                   std::uint32_t trials, SeedStream seeds) {
    return measure_variance_impl(individuals, group, rates, trials, seeds, false);
}

ProxyCurve fit_inverse_curve(std::span<const VariancePoint> points) {
    if (points.empty()) {
        throw std::invalid_argument("fit_inverse_curve requires at least one point");
    }
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto &p : points) {
        if (!(p.rate > 0.0)) {
            throw std::invalid_argument("variance points require rate > 0");
        }
        numerator += p.variance / p.rate;
        denominator += 1.0 / (p.rate * p.rate);
    }
    ProxyCurve curve;
    curve.coefficient = std::max(0.0, numerator / denominator);
    curve.points = points.size();
    for (const auto &p : points) {
        const double residual = p.variance - curve.coefficient / p.rate;
        curve.rss += residual * residual;
    }
    return curve;
}

double required_samples(const ProxyCurve &curve, double group_size, double alpha, double gamma) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie in (0,1)");
    }
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("gamma must be positive");
    }
    if (!(group_size >= 0.0)) {
        throw std::invalid_argument("group size must be >= 0");
    }
    const double constant = curve.coefficient * group_size;
    return constant / (alpha * gamma * gamma);
}

} // namespace survey
