#pragma once

#include "survey/population.hpp"
#include "survey/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace survey {

// One measured point: sampling rate x in (0,1] and the empirical variance of
// the group-mean estimator at that rate.
struct VariancePoint {
    double rate = 0.0;
    double variance = 0.0;
};

// Least-squares fit of variance = a / rate.
struct ProxyCurve {
    double coefficient = 0.0; // a, clamped at 0
    double rss = 0.0;
    std::size_t points = 0;
};

// Default measurement grid: `points` evenly spaced rates in (0, max_rate].
std::vector<double> proxy_rate_grid(double max_rate = 0.1, std::size_t points = 20);

// For each rate, draws `trials` simple random samples (without replacement)
// of size round(rate * group size) from the group's values and records the
// variance of the sample mean across trials. Stream per (rate, trial) pair;
// the OpenMP version is bit-identical to the serial reference.
std::vector<VariancePoint> measure_variance(const IndividualIndex &individuals, std::size_t group,
                                            std::span<const double> rates, std::uint32_t trials,
                                            SeedStream seeds);
std::vector<VariancePoint> measure_variance_serial(const IndividualIndex &individuals,
                                                   std::size_t group,
                                                   std::span<const double> rates,
                                                   std::uint32_t trials, SeedStream seeds);

// Closed-form least squares for a/x: a = sum(v/x) / sum(1/x^2).
ProxyCurve fit_inverse_curve(std::span<const VariancePoint> points);

// Minimum expected successful samples enforcing variance <= alpha * gamma^2:
// (a * group_size) / (alpha * gamma^2).
double required_samples(const ProxyCurve &curve, double group_size, double alpha, double gamma);

} // namespace survey
