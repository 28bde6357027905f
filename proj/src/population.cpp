#include "survey/population.hpp"

#include "survey/csv.hpp"
#include "survey/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace survey {

std::int64_t round_half_even(double x) {
    const double floor_x = std::floor(x);
    const double frac = x - floor_x;
    auto lo = static_cast<std::int64_t>(floor_x);
    if (frac > 0.5) {
        return lo + 1;
    }
    if (frac < 0.5) {
        return lo;
    }
    return (lo % 2 == 0) ? lo : lo + 1;
}

std::uint64_t PopulationFrame::total_population() const noexcept {
    std::uint64_t total = 0;
    for (const auto &rec : records) {
        total += rec.weight;
    }
    return total;
}

std::vector<std::uint64_t> PopulationFrame::group_sizes() const {
    std::vector<std::uint64_t> sizes(group_labels.size(), 0);
    for (const auto &rec : records) {
        sizes[rec.group] += rec.weight;
    }
    return sizes;
}

void PopulationFrame::validate() const {
    if (group_labels.empty() || region_labels.empty()) {
        throw std::invalid_argument("frame requires at least one group and one region label");
    }
    std::unordered_set<std::string> seen;
    for (const auto &label : group_labels) {
        if (!seen.insert("g:" + label).second) {
            throw std::invalid_argument("duplicate group label '" + label + "'");
        }
    }
    for (const auto &label : region_labels) {
        if (!seen.insert("r:" + label).second) {
            throw std::invalid_argument("duplicate region label '" + label + "'");
        }
    }
    std::uint64_t total = 0;
    for (const auto &rec : records) {
        if (rec.group >= group_labels.size() || rec.region >= region_labels.size()) {
            throw std::invalid_argument("record references unknown group or region index");
        }
        if (rec.weight < 1) {
            throw std::invalid_argument("record weight must be >= 1");
        }
        if (!std::isfinite(rec.value)) {
            throw std::invalid_argument("record value must be finite");
        }
        total += rec.weight;
    }
    if (total == 0) {
        throw std::invalid_argument("frame has zero total population");
    }
}

std::vector<double> CountMatrix::group_totals() const {
    std::vector<double> totals(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t r = 0; r < regions; ++r) {
            totals[g] += at(g, r);
        }
    }
    return totals;
}

std::vector<double> CountMatrix::region_totals() const {
    std::vector<double> totals(regions, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t r = 0; r < regions; ++r) {
            totals[r] += at(g, r);
        }
    }
    return totals;
}

double CountMatrix::total() const {
    double sum = 0.0;
    for (double c : counts) {
        sum += c;
    }
    return sum;
}

void SyntheticSpec::validate() const {
    if (groups.empty()) {
        throw std::invalid_argument("synthetic spec requires at least one group");
    }
    if (regions < 1) {
        throw std::invalid_argument("synthetic spec requires at least one region");
    }
    if (!(mixing >= 0.0 && mixing <= 1.0)) {
        throw std::invalid_argument("mixing must lie in [0,1]");
    }
    for (const auto &g : groups) {
        if (g.size < 1) {
            throw std::invalid_argument("group sizes must be >= 1");
        }
        if (!(g.mean_value > 0.0)) {
            throw std::invalid_argument("group mean value must be positive");
        }
        if (g.value_sd < 0.0) {
            throw std::invalid_argument("group value sd must be >= 0");
        }
    }
}

namespace {

const char *const kMicrodataColumns[4] = {"region_id", "group_id", "value", "weight"};

double parse_value(const std::string &field, std::size_t line) {
    const char *begin = field.c_str();
    char *end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v)) {
        throw ParseError(line, "invalid value '" + field + "'");
    }
    return v;
}

std::uint64_t parse_weight(const std::string &field, std::size_t line) {
    if (field.empty() || field[0] == '-' || field[0] == '+') {
        throw ParseError(line, "weight must be a positive integer, got '" + field + "'");
    }
    const char *begin = field.c_str();
    char *end = nullptr;
    errno = 0;
    const unsigned long long w = std::strtoull(begin, &end, 10);
    if (end == begin || *end != '\0' || errno == ERANGE) {
        throw ParseError(line, "weight must be a positive integer, got '" + field + "'");
    }
    if (w == 0) {
        throw ParseError(line, "weight must be >= 1, got 0");
    }
    return static_cast<std::uint64_t>(w);
}

} // namespace

PopulationFrame load_microdata(std::istream &in) {
    const CsvTable table = CsvTable::read(in);
    for (const auto &name : table.header) {
        if (std::find(std::begin(kMicrodataColumns), std::end(kMicrodataColumns), name) ==
            std::end(kMicrodataColumns)) {
            throw ParseError(1, "unknown column '" + name + "'");
        }
    }
    const std::size_t region_col = table.column("region_id");
    const std::size_t group_col = table.column("group_id");
    const std::size_t value_col = table.column("value");
    const std::size_t weight_col = table.column("weight");

    if (table.rows.empty()) {
        throw ParseError(1, "empty input: no data rows");
    }

    PopulationFrame frame;
    std::unordered_map<std::string, std::uint32_t> group_ids;
    std::unordered_map<std::string, std::uint32_t> region_ids;
    frame.records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto &row = table.rows[i];
        const std::size_t line = table.row_lines[i];
        PopulationFrame::Record rec;
        const auto [rit, rnew] = region_ids.try_emplace(
            row[region_col], static_cast<std::uint32_t>(frame.region_labels.size()));
        if (rnew) {
            frame.region_labels.push_back(row[region_col]);
        }
        rec.region = rit->second;
        const auto [git, gnew] = group_ids.try_emplace(
            row[group_col], static_cast<std::uint32_t>(frame.group_labels.size()));
        if (gnew) {
            frame.group_labels.push_back(row[group_col]);
        }
        rec.group = git->second;
        rec.value = parse_value(row[value_col], line);
        rec.weight = parse_weight(row[weight_col], line);
        frame.records.push_back(rec);
    }
    frame.validate();
    return frame;
}

PopulationFrame load_microdata_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    return load_microdata(in);
}

void save_microdata(const PopulationFrame &frame, std::ostream &out) {
    out << "region_id,group_id,value,weight\n";
    char value_buf[40];
    for (const auto &rec : frame.records) {
        // %.17g round-trips doubles exactly
        std::snprintf(value_buf, sizeof(value_buf), "%.17g", rec.value);
        out << frame.region_labels[rec.region] << ',' << frame.group_labels[rec.group] << ','
            << value_buf << ',' << rec.weight << '\n';
    }
}

void save_microdata_file(const PopulationFrame &frame, const std::string &path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    save_microdata(frame, out);
}

PopulationFrame generate_synthetic(const SyntheticSpec &spec) {
    spec.validate();
    const std::size_t group_count = spec.groups.size();
    const std::uint32_t region_count = spec.regions;

    PopulationFrame frame;
    frame.group_labels.reserve(group_count);
    for (std::size_t g = 0; g < group_count; ++g) {
        if (spec.groups[g].label.empty()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "g%02u", static_cast<unsigned>(g));
            frame.group_labels.emplace_back(buf);
        } else {
            frame.group_labels.push_back(spec.groups[g].label);
        }
    }
    frame.region_labels.reserve(region_count);
    for (std::uint32_t r = 0; r < region_count; ++r) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "r%04u", r);
        frame.region_labels.emplace_back(buf);
    }

    // Home region blocks proportional to group size; they tile [0, R).
    std::uint64_t total = 0;
    for (const auto &g : spec.groups) {
        total += g.size;
    }
    std::vector<std::uint32_t> block_start(group_count), block_end(group_count);
    std::uint64_t cumulative = 0;
    for (std::size_t g = 0; g < group_count; ++g) {
        block_start[g] = static_cast<std::uint32_t>(cumulative * region_count / total);
        cumulative += spec.groups[g].size;
        block_end[g] = static_cast<std::uint32_t>(cumulative * region_count / total);
        if (block_end[g] <= block_start[g]) {
            block_end[g] = std::min<std::uint32_t>(block_start[g] + 1, region_count);
            block_start[g] = block_end[g] - 1;
        }
    }

    frame.records.reserve(total);
    for (std::size_t g = 0; g < group_count; ++g) {
        const auto &gs = spec.groups[g];
        Rng rng(derive_seed(spec.seed, g));
        double mu_log = 0.0;
        double sigma_log = 0.0;
        if (gs.value_sd > 0.0) {
            const double cv2 = (gs.value_sd / gs.mean_value) * (gs.value_sd / gs.mean_value);
            sigma_log = std::sqrt(std::log1p(cv2));
            mu_log = std::log(gs.mean_value) - 0.5 * sigma_log * sigma_log;
        }
        const std::uint32_t span = block_end[g] - block_start[g];
        for (std::uint64_t k = 0; k < gs.size; ++k) {
            PopulationFrame::Record rec;
            const double u = rng.uniform01();
            if (u < spec.mixing) {
                rec.region = static_cast<std::uint32_t>(rng.below(region_count));
            } else {
                rec.region = block_start[g] + static_cast<std::uint32_t>(rng.below(span));
            }
            rec.group = static_cast<std::uint32_t>(g);
            rec.value = (gs.value_sd > 0.0) ? std::exp(mu_log + sigma_log * rng.normal())
                                            : gs.mean_value;
            rec.weight = 1;
            frame.records.push_back(rec);
        }
    }
    return frame;
}

CountMatrix count_matrix(const PopulationFrame &frame) {
    CountMatrix m(frame.group_count(), frame.region_count());
    for (const auto &rec : frame.records) {
        m.at(rec.group, rec.region) += static_cast<double>(rec.weight);
    }
    m.noised = false;
    m.epsilon.reset();
    return m;
}

std::vector<GroupStats> group_stats(const PopulationFrame &frame) {
    const std::size_t group_count = frame.group_count();
    std::vector<GroupStats> stats(group_count);
    std::vector<double> sums(group_count, 0.0);
    for (const auto &rec : frame.records) {
        const auto w = static_cast<double>(rec.weight);
        sums[rec.group] += w * rec.value;
        stats[rec.group].count += rec.weight;
    }
    for (std::size_t g = 0; g < group_count; ++g) {
        if (stats[g].count == 0) {
            throw std::invalid_argument("group '" + frame.group_labels[g] + "' has no records");
        }
        stats[g].mean = sums[g] / static_cast<double>(stats[g].count);
    }
    std::vector<double> sq(group_count, 0.0);
    for (const auto &rec : frame.records) {
        const double d = rec.value - stats[rec.group].mean;
        sq[rec.group] += static_cast<double>(rec.weight) * d * d;
    }
    for (std::size_t g = 0; g < group_count; ++g) {
        stats[g].variance = sq[g] / static_cast<double>(stats[g].count);
    }
    return stats;
}

PopulationFrame repartition_regions(const PopulationFrame &frame, std::uint64_t target_size) {
    if (target_size < 1) {
        throw std::invalid_argument("target region size must be >= 1");
    }
    const std::uint64_t total = frame.total_population();
    const std::uint64_t new_regions = (total + target_size - 1) / target_size;

    // Walk records in (region, original order) so existing clusters stay
    // contiguous, splitting weights across boundaries.
    std::vector<std::vector<const PopulationFrame::Record *>> per_region(frame.region_count());
    for (const auto &rec : frame.records) {
        per_region[rec.region].push_back(&rec);
    }

    PopulationFrame out;
    out.group_labels = frame.group_labels;
    out.region_labels.reserve(new_regions);
    for (std::uint64_t r = 0; r < new_regions; ++r) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "r%05llu", static_cast<unsigned long long>(r));
        out.region_labels.emplace_back(buf);
    }

    std::uint64_t position = 0;
    for (const auto &bucket : per_region) {
        for (const auto *rec : bucket) {
            std::uint64_t remaining = rec->weight;
            while (remaining > 0) {
                const std::uint64_t room = target_size - (position % target_size);
                const std::uint64_t chunk = std::min(remaining, room);
                PopulationFrame::Record copy = *rec;
                copy.region = static_cast<std::uint32_t>(position / target_size);
                copy.weight = chunk;
                out.records.push_back(copy);
                position += chunk;
                remaining -= chunk;
            }
        }
    }
    return out;
}

IndividualIndex::IndividualIndex(const PopulationFrame &frame) {
    frame.validate();
    const std::uint64_t total = frame.total_population();
    value_.reserve(total);
    group_.reserve(total);
    by_group_.resize(frame.group_count());
    by_region_.resize(frame.region_count());
    for (const auto &rec : frame.records) {
        for (std::uint64_t k = 0; k < rec.weight; ++k) {
            const auto id = static_cast<std::uint32_t>(value_.size());
            value_.push_back(rec.value);
            group_.push_back(rec.group);
            by_group_[rec.group].push_back(id);
            by_region_[rec.region].push_back(id);
        }
    }
}

std::vector<double> IndividualIndex::group_means() const {
    std::vector<double> means(by_group_.size(), 0.0);
    for (std::size_t g = 0; g < by_group_.size(); ++g) {
        double sum = 0.0;
        for (std::uint32_t id : by_group_[g]) {
            sum += value_[id];
        }
        means[g] = by_group_[g].empty() ? 0.0 : sum / static_cast<double>(by_group_[g].size());
    }
    return means;
}

} // namespace survey
