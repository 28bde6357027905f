#include "survey/csv.hpp"
#include "survey/population.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace survey;

namespace {

PopulationFrame frame_from(const std::string &csv) {
    std::istringstream in(csv);
    return load_microdata(in);
}

} // namespace

TEST_CASE("weighted records expand to individuals") {
    const auto frame = frame_from("region_id,group_id,value,weight\n"
                                  "r1,gA,100,2\n"
                                  "r1,gB,50,1\n");
    CHECK(frame.total_population() == 3);
    const auto sizes = frame.group_sizes();
    REQUIRE(sizes.size() == 2);
    CHECK(sizes[0] == 2); // gA
    CHECK(sizes[1] == 1); // gB
}

TEST_CASE("loader rejects bad input") {
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\nr1,gA,100,0\n"), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\nr1,gA,100,-2\n"), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\nr1,gA,100,1.5\n"), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\nr1,gA,abc,1\n"), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\n"), ParseError);
    CHECK_THROWS_AS(frame_from(""), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,bogus\nr1,gA,1,1\n"), ParseError);
    CHECK_THROWS_AS(frame_from("region_id,group_id,value,weight\nr1,gA,1\n"), ParseError);

    try {
        frame_from("region_id,group_id,value,weight\nr1,gA,100,1\nr1,gB,x,1\n");
        FAIL("expected ParseError");
    } catch (const ParseError &e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("save and load round-trips counts and stats") {
    const auto frame = frame_from("region_id,group_id,value,weight\n"
                                  "r1,gA,100.25,2\n"
                                  "r2,gA,3.5,4\n"
                                  "r1,gB,50,1\n");
    std::ostringstream out;
    save_microdata(frame, out);
    std::istringstream in(out.str());
    const auto again = load_microdata(in);

    CHECK(again.group_labels == frame.group_labels);
    CHECK(again.region_labels == frame.region_labels);
    CHECK(again.total_population() == frame.total_population());
    const auto a = group_stats(frame);
    const auto b = group_stats(again);
    REQUIRE(a.size() == b.size());
    for (std::size_t g = 0; g < a.size(); ++g) {
        CHECK(a[g].mean == b[g].mean);
        CHECK(a[g].variance == b[g].variance);
        CHECK(a[g].count == b[g].count);
    }
}

TEST_CASE("group stats match hand arithmetic") {
    const auto frame = frame_from("region_id,group_id,value,weight\n"
                                  "r1,g,1,1\n"
                                  "r1,g,2,1\n"
                                  "r1,g,3,1\n");
    const auto stats = group_stats(frame);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].mean == doctest::Approx(2.0));
    CHECK(stats[0].variance == doctest::Approx(2.0 / 3.0));
    CHECK(stats[0].count == 3);

    const auto single = frame_from("region_id,group_id,value,weight\nr1,g,10,5\n");
    const auto s = group_stats(single);
    CHECK(s[0].mean == doctest::Approx(10.0));
    CHECK(s[0].variance == doctest::Approx(0.0));
    CHECK(s[0].count == 5);
}

TEST_CASE("group stats are invariant under record permutation") {
    SyntheticSpec spec;
    spec.groups = {{"a", 500, 100.0, 30.0}, {"b", 300, 50.0, 10.0}};
    spec.regions = 4;
    spec.seed = 11;
    auto frame = generate_synthetic(spec);
    const auto before = group_stats(frame);
    std::mt19937 shuffler(99);
    std::shuffle(frame.records.begin(), frame.records.end(), shuffler);
    const auto after = group_stats(frame);
    for (std::size_t g = 0; g < before.size(); ++g) {
        CHECK(after[g].mean == doctest::Approx(before[g].mean).epsilon(1e-12));
        CHECK(after[g].variance == doctest::Approx(before[g].variance).epsilon(1e-12));
        CHECK(after[g].count == before[g].count);
    }
}

TEST_CASE("count matrix matches weighted counts and marginals") {
    const auto frame = frame_from("region_id,group_id,value,weight\n"
                                  "r1,gA,100,2\n"
                                  "r1,gB,50,1\n");
    const auto m = count_matrix(frame);
    REQUIRE(m.groups == 2);
    REQUIRE(m.regions == 1);
    CHECK(m.at(0, 0) == 2.0);
    CHECK(m.at(1, 0) == 1.0);
    CHECK_FALSE(m.noised);

    // a labelled group with no records yields a zero row
    PopulationFrame with_empty = frame;
    with_empty.group_labels.push_back("gC");
    const auto m2 = count_matrix(with_empty);
    CHECK(m2.at(2, 0) == 0.0);
}

TEST_CASE("synthetic generation hits its contract") {
    SUBCASE("degenerate distribution") {
        SyntheticSpec spec;
        spec.groups = {{"only", 1000, 75.0, 0.0}};
        spec.regions = 3;
        spec.seed = 5;
        const auto frame = generate_synthetic(spec);
        CHECK(frame.total_population() == 1000);
        for (const auto &rec : frame.records) {
            CHECK(rec.value == 75.0);
        }
    }

    SUBCASE("mixing zero separates groups") {
        SyntheticSpec spec;
        spec.groups = {{"a", 400, 10.0, 1.0}, {"b", 400, 10.0, 1.0}};
        spec.regions = 2;
        spec.mixing = 0.0;
        spec.seed = 6;
        const auto frame = generate_synthetic(spec);
        const auto m = count_matrix(frame);
        CHECK(m.at(0, 1) == 0.0);
        CHECK(m.at(1, 0) == 0.0);
        CHECK(m.at(0, 0) == 400.0);
        CHECK(m.at(1, 1) == 400.0);
    }

    SUBCASE("mixing one keeps marginals, spreads groups") {
        SyntheticSpec spec;
        spec.groups = {{"a", 2000, 10.0, 1.0}, {"b", 2000, 10.0, 1.0}};
        spec.regions = 2;
        spec.mixing = 1.0;
        spec.seed = 7;
        const auto frame = generate_synthetic(spec);
        const auto m = count_matrix(frame);
        CHECK(m.at(0, 0) + m.at(0, 1) == 2000.0);
        CHECK(m.at(1, 0) + m.at(1, 1) == 2000.0);
        CHECK(m.at(0, 0) > 0.0);
        CHECK(m.at(0, 1) > 0.0);
    }

    SUBCASE("sample mean converges to the target") {
        SyntheticSpec spec;
        spec.groups = {{"big", 100000, 50000.0, 10000.0}};
        spec.regions = 10;
        spec.seed = 8;
        const auto frame = generate_synthetic(spec);
        const auto stats = group_stats(frame);
        const double se = 10000.0 / std::sqrt(100000.0);
        CHECK(std::abs(stats[0].mean - 50000.0) < 3.0 * se);
        // sd of the sample sd is roughly se/sqrt(2); stay loose
        CHECK(std::sqrt(stats[0].variance) == doctest::Approx(10000.0).epsilon(0.05));
    }

    SUBCASE("marginal consistency") {
        SyntheticSpec spec;
        spec.groups = {{"a", 1500, 20.0, 5.0}, {"b", 700, 30.0, 2.0}, {"c", 150, 40.0, 9.0}};
        spec.regions = 6;
        spec.mixing = 0.4;
        spec.seed = 9;
        const auto frame = generate_synthetic(spec);
        const auto m = count_matrix(frame);
        const auto totals = m.group_totals();
        CHECK(totals[0] == 1500.0);
        CHECK(totals[1] == 700.0);
        CHECK(totals[2] == 150.0);
        double sum = 0.0;
        for (const auto t : m.region_totals()) {
            sum += t;
        }
        CHECK(sum == 2350.0);
    }
}

TEST_CASE("lognormal moments match analytic oracle") {
    SyntheticSpec spec;
    spec.groups = {{"ln", 50000, 60000.0, 30000.0}};
    spec.regions = 5;
    spec.seed = 10;
    const auto frame = generate_synthetic(spec);
    const auto stats = group_stats(frame);
    const double se = 30000.0 / std::sqrt(50000.0);
    CHECK(std::abs(stats[0].mean - 60000.0) < 3.0 * se);
}

TEST_CASE("repartition preserves group marginals and region sizes") {
    SyntheticSpec spec;
    spec.groups = {{"a", 900, 10.0, 2.0}, {"b", 300, 20.0, 4.0}};
    spec.regions = 3;
    spec.mixing = 0.5;
    spec.seed = 12;
    const auto frame = generate_synthetic(spec);

    const auto parts = repartition_regions(frame, 100);
    CHECK(parts.region_count() == 12);
    CHECK(parts.total_population() == 1200);
    const auto sizes = parts.group_sizes();
    CHECK(sizes[0] == 900);
    CHECK(sizes[1] == 300);
    for (const double t : count_matrix(parts).region_totals()) {
        CHECK(t == 100.0);
    }

    // group stats unchanged by repartitioning
    const auto a = group_stats(frame);
    const auto b = group_stats(parts);
    for (std::size_t g = 0; g < a.size(); ++g) {
        CHECK(b[g].mean == doctest::Approx(a[g].mean).epsilon(1e-12));
        CHECK(b[g].count == a[g].count);
    }

    const auto one = repartition_regions(frame, 1200);
    CHECK(one.region_count() == 1);
}

TEST_CASE("group stats report empty groups by name") {
    PopulationFrame frame;
    frame.group_labels = {"present", "missing"};
    frame.region_labels = {"r"};
    frame.records.push_back({0, 0, 5.0, 2});
    CHECK_THROWS_WITH_AS(static_cast<void>(group_stats(frame)),
                         doctest::Contains("missing"), std::invalid_argument);
}
