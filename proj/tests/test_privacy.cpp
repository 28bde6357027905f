#include "survey/privacy.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace survey;

TEST_CASE("laplace quantile maps the median to zero") {
    CHECK(laplace_quantile(1.0, 0.0) == 0.0);
    CHECK(laplace_quantile(2.0, 0.25) == doctest::Approx(-2.0 * std::log(0.5)));
    CHECK(laplace_quantile(2.0, -0.25) == doctest::Approx(2.0 * std::log(0.5)));
}

TEST_CASE("laplace draws have the right mean and variance") {
    Rng rng(101);
    const int n = 1000000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        sum += laplace_sample(1.0, rng);
    }
    CHECK(std::abs(sum / n) < 0.005); // 3 sigma of sqrt(2)/sqrt(n) is ~0.0042

    Rng rng2(102);
    double sq = 0.0;
    double mean_acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = laplace_sample(2.0, rng2);
        mean_acc += d;
        sq += d * d;
    }
    const double mean = mean_acc / n;
    const double var = sq / n - mean * mean;
    CHECK(var == doctest::Approx(8.0).epsilon(0.02));
}

TEST_CASE("privatize: sentinel returns an exact copy") {
    CountMatrix m(2, 2);
    m.at(0, 0) = 10;
    m.at(0, 1) = 0;
    m.at(1, 0) = 3;
    m.at(1, 1) = 7;
    const auto out = privatize_counts(m, std::nullopt);
    CHECK(out.counts == m.counts);
    CHECK_FALSE(out.noised);
    CHECK_FALSE(out.epsilon.has_value());
}

TEST_CASE("privatize: clamped, reproducible, and single-shot") {
    CountMatrix m(3, 4);
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t r = 0; r < 4; ++r) {
            m.at(g, r) = static_cast<double>(g + r);
        }
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto out = privatize_counts(m, PrivacyParams{0.5, 1.0, seed});
        CHECK(out.noised);
        CHECK(out.epsilon == 0.5);
        for (double c : out.counts) {
            CHECK(c >= 0.0);
        }
    }
    const auto a = privatize_counts(m, PrivacyParams{0.5, 1.0, 7});
    const auto b = privatize_counts(m, PrivacyParams{0.5, 1.0, 7});
    CHECK(a.counts == b.counts); // bit-reproducible
    CHECK_THROWS_AS(static_cast<void>(privatize_counts(a, PrivacyParams{0.5, 1.0, 8})),
                    std::invalid_argument);
}

TEST_CASE("privatized zero count averages to the theoretical bias") {
    CountMatrix zero(1, 1);
    const PrivacyParams params{0.1, 1.0, 0};
    double sum = 0.0;
    const int seeds = 100000;
    for (int s = 0; s < seeds; ++s) {
        sum += privatize_counts(zero, PrivacyParams{0.1, 1.0, static_cast<std::uint64_t>(s)})
                   .at(0, 0);
    }
    CHECK(sum / seeds == doctest::Approx(bias_closed_form(0.0, params)).epsilon(0.02));
    CHECK(std::abs(sum / seeds - 5.0) < 0.1);
}

TEST_CASE("closed-form bias values") {
    CHECK(bias_closed_form(0.0, {0.1, 1.0, 0}) == 5.0);
    CHECK(bias_closed_form(1000.0, {1.0, 1.0, 0}) == 0.0); // exponent underflows
    CHECK(bias_closed_form(10.0, {0.1, 1.0, 0}) == doctest::Approx(5.0 * std::exp(-1.0)));
}

TEST_CASE("bias positivity and monotonicity") {
    const double counts[] = {0.0, 0.5, 1.0, 10.0, 100.0};
    const double epsilons[] = {0.01, 0.1, 1.0, 10.0};
    for (double n : counts) {
        for (double e : epsilons) {
            if (n * e < 700.0) { // beyond this exp() underflows to exactly 0
                CHECK(bias_closed_form(n, {e, 1.0, 0}) > 0.0);
            } else {
                CHECK(bias_closed_form(n, {e, 1.0, 0}) == 0.0);
            }
        }
    }
    for (double e : epsilons) {
        for (std::size_t i = 1; i < 5; ++i) {
            CHECK(bias_closed_form(counts[i], {e, 1.0, 0}) <
                  bias_closed_form(counts[i - 1], {e, 1.0, 0}));
        }
    }
    for (double n : counts) {
        for (std::size_t i = 1; i < 4; ++i) {
            CHECK(bias_closed_form(n, {epsilons[i], 1.0, 0}) <
                  bias_closed_form(n, {epsilons[i - 1], 1.0, 0}));
        }
    }
    // no-privacy limit
    CHECK(bias_closed_form(10.0, {1e9, 1.0, 0}) < 1e-12);
}

TEST_CASE("aggregate bias adds per-region biases") {
    const PrivacyParams params{0.1, 1.0, 0};
    const std::vector<double> three_zero{0.0, 0.0, 0.0};
    CHECK(aggregate_bias(three_zero, params) == doctest::Approx(15.0));

    const std::vector<double> one{42.0};
    CHECK(aggregate_bias(one, params) == bias_closed_form(42.0, params));

    const PrivacyParams small_eps{0.01, 1.0, 0};
    const std::vector<double> whole{100.0};
    const std::vector<double> split{50.0, 50.0};
    CHECK(aggregate_bias(split, small_eps) > aggregate_bias(whole, small_eps));

    CHECK_THROWS_AS(static_cast<void>(aggregate_bias(std::vector<double>{}, params)),
                    std::invalid_argument);
}

TEST_CASE("refining any partition strictly increases aggregate bias") {
    Rng rng(77);
    const PrivacyParams params{0.05, 1.0, 0};
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<double> parts;
        const int n = 2 + static_cast<int>(rng.below(6));
        for (int i = 0; i < n; ++i) {
            parts.push_back(static_cast<double>(rng.below(200)));
        }
        // split one positive part in two
        std::vector<double> refined = parts;
        bool split_done = false;
        for (auto &p : refined) {
            if (p > 1.0) {
                const double cut = 1.0 + static_cast<double>(rng.below(static_cast<std::uint64_t>(p - 1.0)));
                const double rest = p - cut;
                p = cut;
                refined.push_back(rest);
                split_done = true;
                break;
            }
        }
        if (!split_done) {
            continue;
        }
        CHECK(aggregate_bias(refined, params) > aggregate_bias(parts, params));
    }
}

TEST_CASE("monte carlo oracle agrees with the closed form") {
    const SeedStream seeds{2024};
    const PrivacyParams p1{0.1, 1.0, 0};
    const auto est = monte_carlo_bias(0.0, p1, 1000000, seeds);
    CHECK(std::abs(est.estimate - 5.0) < 3.0 * est.standard_error);

    const PrivacyParams p2{1.0, 1.0, 0};
    const auto est2 = monte_carlo_bias(10.0, p2, 1000000, seeds.substream(1));
    CHECK(std::abs(est2.estimate - 0.5 * std::exp(-10.0)) < 3.0 * est2.standard_error);
}

TEST_CASE("monte carlo grid check at 2e5 trials") {
    const SeedStream seeds{515};
    const double grid_n[] = {0.0, 1.0, 10.0, 100.0};
    const double grid_e[] = {0.01, 0.1, 1.0, 10.0};
    std::uint64_t stream = 0;
    for (double n : grid_n) {
        for (double e : grid_e) {
            const PrivacyParams params{e, 1.0, 0};
            const auto est = monte_carlo_bias(n, params, 200000, seeds.substream(stream++));
            const double expected = bias_closed_form(n, params);
            CHECK(std::abs(est.estimate - expected) <= 3.0 * est.standard_error + 1e-12);
        }
    }
}

TEST_CASE("standard error shrinks as 1/sqrt(trials)") {
    const SeedStream seeds{99};
    const PrivacyParams params{0.1, 1.0, 0};
    const auto small = monte_carlo_bias(5.0, params, 250000, seeds);
    const auto large = monte_carlo_bias(5.0, params, 1000000, seeds);
    CHECK(large.standard_error / small.standard_error == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("parallel and serial oracles are bit-identical") {
    const SeedStream seeds{314};
    const PrivacyParams params{0.5, 1.0, 0};
    const auto a = monte_carlo_bias(3.0, params, 123457, seeds);
    const auto b = monte_carlo_bias_serial(3.0, params, 123457, seeds);
    CHECK(a.estimate == b.estimate);
    CHECK(a.standard_error == b.standard_error);
}

TEST_CASE("monte carlo rejects tiny trial counts") {
    CHECK_THROWS_AS(static_cast<void>(monte_carlo_bias(0.0, {1.0, 1.0, 0}, 10, SeedStream{1})),
                    std::invalid_argument);
}
