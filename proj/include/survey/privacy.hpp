#pragma once

#include "survey/population.hpp"
#include "survey/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>

namespace survey {

// Pure epsilon-DP Laplace mechanism parameters; scale b = sensitivity/epsilon.
struct PrivacyParams {
    double epsilon = 1.0;
    double sensitivity = 1.0;
    std::uint64_t seed = 0;

    [[nodiscard]] double scale() const noexcept { return sensitivity / epsilon; }
    void validate() const;
};

// Inverse-CDF map from u in (-1/2, 1/2) to Laplace(0, scale); u = 0 maps to 0.
double laplace_quantile(double scale, double u);
double laplace_sample(double scale, Rng &rng);

// Independent Laplace noise per cell, clamped at zero. Entry (g, r) uses the
// derived stream g*regions + r, so the result is reproducible and independent
// of any parallel split. Passing no params (the no-privacy sentinel) returns
// an exact copy. Noising an already-noised matrix is an error.
CountMatrix privatize_counts(const CountMatrix &m, const std::optional<PrivacyParams> &params);

// Expected overshoot of the clamped noisy count: (b/2) * exp(-count/b).
double bias_closed_form(double count, const PrivacyParams &params);

// Bias of a sum of independently noised counts; equals the per-count sum.
double aggregate_bias(std::span<const double> counts, const PrivacyParams &params);

struct BiasEstimate {
    double estimate = 0.0;
    double standard_error = 0.0;
};

// Monte Carlo estimate of the clamping bias, the independent check on the
// closed form. Trials are processed in fixed-size blocks, one derived rng
// stream per block, and block partials are reduced in index order, so the
// OpenMP version is bit-identical to the serial reference.
BiasEstimate monte_carlo_bias(double count, const PrivacyParams &params, std::uint64_t trials,
                              SeedStream seeds);
BiasEstimate monte_carlo_bias_serial(double count, const PrivacyParams &params,
                                     std::uint64_t trials, SeedStream seeds);

} // namespace survey
