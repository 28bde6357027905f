// Times the OpenMP kernels against their serial reference implementations and
// checks that both produce identical results.

#include "survey/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace survey;

namespace {

template <typename F> double time_seconds(F &&fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool all_identical = true;

void report(const char *name, double serial, double parallel, bool identical) {
    all_identical = all_identical && identical;
    std::printf("%-24s serial %8.3fs   openmp %8.3fs   speedup %5.2fx   results %s\n", name,
                serial, parallel, serial / parallel, identical ? "identical" : "DIFFER");
}

} // namespace

int main(int argc, char **argv) {
    double scale = 1.0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0) {
            scale = 0.02;
        }
    }
#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; both columns run serially\n");
#endif

    // clamping-bias oracle
    {
        const auto trials = static_cast<std::uint64_t>(20'000'000 * scale);
        const PrivacyParams params{0.1, 1.0, 0};
        BiasEstimate serial_result;
        BiasEstimate parallel_result;
        const double serial = time_seconds(
            [&] { serial_result = monte_carlo_bias_serial(5.0, params, trials, SeedStream{1}); });
        const double parallel = time_seconds(
            [&] { parallel_result = monte_carlo_bias(5.0, params, trials, SeedStream{1}); });
        report("monte_carlo_bias", serial, parallel,
               serial_result.estimate == parallel_result.estimate &&
                   serial_result.standard_error == parallel_result.standard_error);
    }

    // variance measurement and survey replication share one synthetic world
    SyntheticSpec spec;
    spec.groups = {{"a", 60000, 50000.0, 25000.0}, {"b", 20000, 40000.0, 12000.0}};
    spec.regions = 20;
    spec.seed = 2;
    const auto frame = generate_synthetic(spec);
    const IndividualIndex index(frame);

    {
        const auto trials = static_cast<std::uint32_t>(400 * scale + 2);
        const auto rates = proxy_rate_grid();
        std::vector<VariancePoint> a;
        std::vector<VariancePoint> b;
        const double serial = time_seconds(
            [&] { a = measure_variance_serial(index, 0, rates, trials, SeedStream{3}); });
        const double parallel =
            time_seconds([&] { b = measure_variance(index, 0, rates, trials, SeedStream{3}); });
        bool identical = a.size() == b.size();
        for (std::size_t i = 0; identical && i < a.size(); ++i) {
            identical = a[i].variance == b[i].variance;
        }
        report("measure_variance", serial, parallel, identical);
    }

    {
        DesignInstance inst;
        inst.counts = count_matrix(frame);
        inst.phase1_failure.assign(2, 0.6);
        inst.phase2_failure.assign(2, 0.2);
        inst.region_rate.assign(20, 0.1);
        inst.required.assign(2, 0.0);
        Allocation alloc = standard_allocation(inst, 0.05);
        for (std::size_t r = 0; r < 6; ++r) {
            alloc.region_selected[r] = 1;
        }
        SurveyProtocol protocol;
        protocol.phase1_failure.assign(2, 0.6);
        protocol.phase2_failure.assign(2, 0.2);
        protocol.region_rate.assign(20, 0.1);

        const auto trials = static_cast<std::uint32_t>(2000 * scale + 2);
        TrialReport a;
        TrialReport b;
        const double serial = time_seconds(
            [&] { a = replicate_serial(index, alloc, protocol, trials, SeedStream{4}); });
        const double parallel =
            time_seconds([&] { b = replicate(index, alloc, protocol, trials, SeedStream{4}); });
        report("replicate", serial, parallel,
               a.estimates == b.estimates && a.successes == b.successes);
    }
    return all_identical ? 0 : 1;
}
