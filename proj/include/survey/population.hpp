#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace survey {

// Round half to even, independent of the ambient floating-point rounding mode.
std::int64_t round_half_even(double x);

// Weighted microdata: one record stands for `weight` identical individuals.
// Group/region ids are indices into the label vectors.
struct PopulationFrame {
    struct Record {
        std::uint32_t region = 0;
        std::uint32_t group = 0;
        double value = 0.0;
        std::uint64_t weight = 1;
    };

    std::vector<std::string> group_labels;
    std::vector<std::string> region_labels;
    std::vector<Record> records;

    [[nodiscard]] std::size_t group_count() const noexcept { return group_labels.size(); }
    [[nodiscard]] std::size_t region_count() const noexcept { return region_labels.size(); }
    [[nodiscard]] std::uint64_t total_population() const noexcept;
    [[nodiscard]] std::vector<std::uint64_t> group_sizes() const;

    // Throws std::invalid_argument on any violated invariant.
    void validate() const;
};

// Group-by-region counts. `epsilon` is empty for exact matrices and for the
// explicit no-privacy sentinel; it records the privacy loss once noised.
struct CountMatrix {
    std::size_t groups = 0;
    std::size_t regions = 0;
    std::vector<double> counts; // row-major groups x regions
    bool noised = false;
    std::optional<double> epsilon;

    CountMatrix() = default;
    CountMatrix(std::size_t g, std::size_t r) : groups(g), regions(r), counts(g * r, 0.0) {}

    [[nodiscard]] double at(std::size_t g, std::size_t r) const { return counts[g * regions + r]; }
    double &at(std::size_t g, std::size_t r) { return counts[g * regions + r]; }

    [[nodiscard]] std::vector<double> group_totals() const;
    [[nodiscard]] std::vector<double> region_totals() const;
    [[nodiscard]] double total() const;
};

struct SyntheticGroup {
    std::string label;    // optional; generated as g00, g01, ... when empty
    std::uint64_t size = 0;
    double mean_value = 0.0;
    double value_sd = 0.0;
};

// Log-normal synthetic populations with exact group sizes and a spatial
// mixing knob: 0 concentrates each group in its own block of regions, 1
// spreads every group uniformly.
struct SyntheticSpec {
    std::vector<SyntheticGroup> groups;
    std::uint32_t regions = 1;
    double mixing = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct GroupStats {
    double mean = 0.0;
    double variance = 0.0; // population variance (divide by N)
    std::uint64_t count = 0;
};

PopulationFrame load_microdata(std::istream &in);
PopulationFrame load_microdata_file(const std::string &path);
void save_microdata(const PopulationFrame &frame, std::ostream &out);
void save_microdata_file(const PopulationFrame &frame, const std::string &path);

PopulationFrame generate_synthetic(const SyntheticSpec &spec);
CountMatrix count_matrix(const PopulationFrame &frame);
std::vector<GroupStats> group_stats(const PopulationFrame &frame);

// Reassign individuals to consecutive regions of about `target_size` people,
// preserving the existing region order so spatial clustering survives.
// Records straddling a boundary are split. Smaller target sizes refine larger
// ones whenever the smaller divides the larger.
PopulationFrame repartition_regions(const PopulationFrame &frame, std::uint64_t target_size);

// Per-individual view of a frame (weights expanded). Immutable after
// construction; shared by the variance measurement and the simulator.
class IndividualIndex {
  public:
    explicit IndividualIndex(const PopulationFrame &frame);

    [[nodiscard]] std::uint64_t total() const noexcept { return value_.size(); }
    [[nodiscard]] std::size_t group_count() const noexcept { return by_group_.size(); }
    [[nodiscard]] std::size_t region_count() const noexcept { return by_region_.size(); }
    [[nodiscard]] const std::vector<double> &values() const noexcept { return value_; }
    [[nodiscard]] const std::vector<std::uint32_t> &group_of() const noexcept { return group_; }
    [[nodiscard]] const std::vector<std::uint32_t> &members_of_group(std::size_t g) const {
        return by_group_[g];
    }
    [[nodiscard]] const std::vector<std::uint32_t> &members_of_region(std::size_t r) const {
        return by_region_[r];
    }
    // Weighted population mean per group.
    [[nodiscard]] std::vector<double> group_means() const;

  private:
    std::vector<double> value_;
    std::vector<std::uint32_t> group_;
    std::vector<std::vector<std::uint32_t>> by_group_;
    std::vector<std::vector<std::uint32_t>> by_region_;
};

} // namespace survey
