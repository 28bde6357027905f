#include "survey/privacy.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace survey {

void PrivacyParams::validate() const {
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("epsilon must be positive");
    }
    if (!(sensitivity > 0.0)) {
        throw std::invalid_argument("sensitivity must be positive");
    }
}

double laplace_quantile(double scale, double u) {
    if (u == 0.0) {
        return 0.0;
    }
    const double sign = u > 0.0 ? 1.0 : -1.0;
    return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

double laplace_sample(double scale, Rng &rng) {
    if (!(scale > 0.0)) {
        throw std::invalid_argument("laplace scale must be positive");
    }
    return laplace_quantile(scale, rng.uniform_open() - 0.5);
}

CountMatrix privatize_counts(const CountMatrix &m, const std::optional<PrivacyParams> &params) {
    if (m.noised) {
        throw std::invalid_argument("count matrix is already noised");
    }
    CountMatrix out = m;
    if (!params.has_value()) {
        return out; // no-privacy sentinel
    }
    params->validate();
    const double scale = params->scale();
    for (std::size_t cell = 0; cell < out.counts.size(); ++cell) {
        Rng rng(derive_seed(params->seed, cell));
        out.counts[cell] = std::max(0.0, out.counts[cell] + laplace_sample(scale, rng));
    }
    out.noised = true;
    out.epsilon = params->epsilon;
    return out;
}

double bias_closed_form(double count, const PrivacyParams &params) {
    params.validate();
    if (count < 0.0) {
        throw std::invalid_argument("count must be >= 0");
    }
    const double scale = params.scale();
    return 0.5 * scale * std::exp(-count / scale);
}

double aggregate_bias(std::span<const double> counts, const PrivacyParams &params) {
    if (counts.empty()) {
        throw std::invalid_argument("aggregate_bias requires a nonempty count list");
    }
    double total = 0.0;
    for (double c : counts) {
        total += bias_closed_form(c, params);
    }
    return total;
}

namespace {

constexpr std::uint64_t kBiasBlock = 8192;

struct BlockSums {
    double sum = 0.0;
    double sum_sq = 0.0;
};

BlockSums bias_block(double count, double scale, std::uint64_t block_trials, Rng rng) {
    BlockSums acc;
    for (std::uint64_t t = 0; t < block_trials; ++t) {
        const double overshoot = std::max(0.0, count + laplace_quantile(scale, rng.uniform_open() - 0.5)) - count;
        acc.sum += overshoot;
        acc.sum_sq += overshoot * overshoot;
    }
    return acc;
}

BiasEstimate reduce_blocks(const std::vector<BlockSums> &blocks, std::uint64_t trials) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto &b : blocks) {
        sum += b.sum;
        sum_sq += b.sum_sq;
    }
    const auto n = static_cast<double>(trials);
    const double mean = sum / n;
    const double variance = std::max(0.0, sum_sq / n - mean * mean);
    return {mean, std::sqrt(variance / n)};
}

} // namespace

BiasEstimate monte_carlo_bias_serial(double count, const PrivacyParams &params,
                                     std::uint64_t trials, SeedStream seeds) {
    params.validate();
    if (trials < 1000) {
        throw std::invalid_argument("monte_carlo_bias requires at least 1000 trials");
    }
    const double scale = params.scale();
    const std::uint64_t blocks = (trials + kBiasBlock - 1) / kBiasBlock;
    std::vector<BlockSums> partials(blocks);
    for (std::uint64_t b = 0; b < blocks; ++b) {
        const std::uint64_t lo = b * kBiasBlock;
        const std::uint64_t len = std::min(kBiasBlock, trials - lo);
        partials[b] = bias_block(count, scale, len, seeds.stream(b));
    }
    return reduce_blocks(partials, trials);
}

BiasEstimate monte_carlo_bias(double count, const PrivacyParams &params, std::uint64_t trials,
                              SeedStream seeds) {
    params.validate();
    if (trials < 1000) {
        throw std::invalid_argument("monte_carlo_bias requires at least 1000 trials");
    }
    const double scale = params.scale();
    const std::uint64_t blocks = (trials + kBiasBlock - 1) / kBiasBlock;
    std::vector<BlockSums> partials(blocks);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
        const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBiasBlock;
        const std::uint64_t len = std::min(kBiasBlock, trials - lo);
        partials[static_cast<std::size_t>(b)] =
            bias_block(count, scale, len, seeds.stream(static_cast<std::uint64_t>(b)));
    }
    return reduce_blocks(partials, trials);
}

} // namespace survey
