#include "survey/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace survey {

namespace {

constexpr double kFeasTol = 1e-9;

double cost_tolerance(double reference) {
    if (!std::isfinite(reference)) {
        return 0.0; // any finite candidate beats an unset incumbent
    }
    return kFeasTol * std::max(1.0, std::abs(reference));
}

} // namespace

const char *to_string(AllocationMethod method) noexcept {
    switch (method) {
    case AllocationMethod::standard:
        return "standard";
    case AllocationMethod::heuristic:
        return "heuristic";
    case AllocationMethod::phase1:
        return "phase1";
    case AllocationMethod::two_phase:
        return "two_phase";
    case AllocationMethod::brute_force:
        return "brute_force";
    }
    return "unknown";
}

void DesignInstance::validate() const {
    const std::size_t groups = counts.groups;
    const std::size_t regions = counts.regions;
    if (phase1_failure.size() != groups || phase2_failure.size() != groups ||
        required.size() != groups) {
        throw std::invalid_argument("per-group vectors must match the count matrix");
    }
    if (region_rate.size() != regions) {
        throw std::invalid_argument("region rate vector must match the count matrix");
    }
    for (std::size_t g = 0; g < groups; ++g) {
        if (!(phase1_failure[g] >= 0.0 && phase1_failure[g] < 1.0)) {
            throw std::invalid_argument("phase-1 failure rates must lie in [0,1)");
        }
        if (!(phase2_failure[g] >= 0.0 && phase2_failure[g] < 1.0)) {
            throw std::invalid_argument("phase-2 failure rates must lie in [0,1)");
        }
        if (!(required[g] >= 0.0)) {
            throw std::invalid_argument("requirements must be >= 0");
        }
    }
    for (double g : region_rate) {
        if (!(g > 0.0 && g <= 1.0)) {
            throw std::invalid_argument("region sampling rates must lie in (0,1]");
        }
    }
    if (!(contact_cost > 0.0) || !(region_cost > 0.0)) {
        throw std::invalid_argument("costs must be positive");
    }
    for (double c : counts.counts) {
        if (!(c >= 0.0)) {
            throw std::invalid_argument("counts must be >= 0");
        }
    }
}

std::size_t Allocation::selected_region_count() const {
    return static_cast<std::size_t>(
        std::count(region_selected.begin(), region_selected.end(), std::uint8_t{1}));
}

std::vector<double> expected_successes(const Allocation &alloc, const DesignInstance &inst) {
    const std::size_t groups = inst.group_count();
    const std::size_t regions = inst.region_count();
    if (alloc.contact_fraction.size() != groups || alloc.region_selected.size() != regions) {
        throw std::invalid_argument("allocation dimensions do not match instance");
    }
    const auto totals = inst.counts.group_totals();
    std::vector<double> successes(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        successes[g] = alloc.contact_fraction[g] * totals[g] * (1.0 - inst.phase1_failure[g]);
        for (std::size_t r = 0; r < regions; ++r) {
            if (alloc.region_selected[r]) {
                successes[g] +=
                    inst.region_rate[r] * inst.counts.at(g, r) * (1.0 - inst.phase2_failure[g]);
            }
        }
    }
    return successes;
}

double evaluate_cost(const Allocation &alloc, const DesignInstance &inst) {
    const auto totals = inst.counts.group_totals();
    if (alloc.contact_fraction.size() != totals.size() ||
        alloc.region_selected.size() != inst.region_count()) {
        throw std::invalid_argument("allocation dimensions do not match instance");
    }
    double cost = 0.0;
    for (std::size_t g = 0; g < totals.size(); ++g) {
        cost += inst.contact_cost * alloc.contact_fraction[g] * totals[g];
    }
    for (std::size_t r = 0; r < inst.region_count(); ++r) {
        if (alloc.region_selected[r]) {
            cost += inst.region_cost;
        }
    }
    return cost;
}

namespace {

Allocation finalize(Allocation alloc, const DesignInstance &inst) {
    const auto totals = inst.counts.group_totals();
    alloc.planned_contacts.resize(totals.size());
    for (std::size_t g = 0; g < totals.size(); ++g) {
        alloc.planned_contacts[g] = alloc.contact_fraction[g] * totals[g];
    }
    alloc.expected_success = expected_successes(alloc, inst);
    alloc.cost = evaluate_cost(alloc, inst);
    return alloc;
}

// Shared precomputation for the two-phase solvers.
struct TwoPhaseModel {
    std::size_t groups = 0;
    std::size_t regions = 0;
    std::vector<double> visible;       // N_i as the designer sees them
    std::vector<double> phase1_yield;  // N_i (1 - F1_i): successes at p_i = 1
    std::vector<double> unit_cost;     // c1 / (1 - F1_i): phase-1 cost per success
    std::vector<double> coverage;      // groups x regions: g_r N_i^r (1 - F2_i)
    std::vector<double> max_coverage;  // per group, all regions selected
    double region_cost = 0.0;

    [[nodiscard]] double cover(std::size_t g, std::size_t r) const {
        return coverage[g * regions + r];
    }
};

TwoPhaseModel build_model(const DesignInstance &inst) {
    TwoPhaseModel m;
    m.groups = inst.group_count();
    m.regions = inst.region_count();
    m.visible = inst.counts.group_totals();
    m.region_cost = inst.region_cost;
    m.phase1_yield.resize(m.groups);
    m.unit_cost.resize(m.groups);
    for (std::size_t g = 0; g < m.groups; ++g) {
        m.phase1_yield[g] = m.visible[g] * (1.0 - inst.phase1_failure[g]);
        m.unit_cost[g] = inst.contact_cost / (1.0 - inst.phase1_failure[g]);
    }
    m.coverage.resize(m.groups * m.regions, 0.0);
    m.max_coverage.assign(m.groups, 0.0);
    for (std::size_t g = 0; g < m.groups; ++g) {
        for (std::size_t r = 0; r < m.regions; ++r) {
            const double c =
                inst.region_rate[r] * inst.counts.at(g, r) * (1.0 - inst.phase2_failure[g]);
            m.coverage[g * m.regions + r] = c;
            m.max_coverage[g] += c;
        }
    }
    return m;
}

void require_globally_feasible(const TwoPhaseModel &m, const DesignInstance &inst) {
    std::ostringstream msg;
    bool infeasible = false;
    for (std::size_t g = 0; g < m.groups; ++g) {
        const double achievable = m.phase1_yield[g] + m.max_coverage[g];
        if (inst.required[g] > achievable * (1.0 + kFeasTol) + kFeasTol) {
            if (!infeasible) {
                msg << "infeasible requirements:";
                infeasible = true;
            }
            msg << " group " << g << " needs " << inst.required[g] << " but at most "
                << achievable << " successes are achievable;";
        }
    }
    if (infeasible) {
        throw InfeasibleError(msg.str());
    }
}

// Cost of completing a region choice with phase-1 contacts; quiet NaN when
// some group cannot be completed within p <= 1.
double completion_cost(const TwoPhaseModel &m, const std::vector<double> &required,
                       const std::vector<double> &covered, double &phase1_cost) {
    phase1_cost = 0.0;
    for (std::size_t g = 0; g < m.groups; ++g) {
        const double deficit = required[g] - covered[g];
        if (deficit <= 0.0) {
            continue;
        }
        if (deficit > m.phase1_yield[g] * (1.0 + kFeasTol) + kFeasTol) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        phase1_cost += m.unit_cost[g] * deficit;
    }
    return phase1_cost;
}

Allocation assemble_two_phase(const DesignInstance &inst, const TwoPhaseModel &m,
                              const std::vector<std::uint8_t> &selection,
                              AllocationMethod method) {
    Allocation alloc;
    alloc.method = method;
    alloc.region_selected = selection;
    alloc.contact_fraction.assign(m.groups, 0.0);
    for (std::size_t g = 0; g < m.groups; ++g) {
        double covered = 0.0;
        for (std::size_t r = 0; r < m.regions; ++r) {
            if (selection[r]) {
                covered += m.cover(g, r);
            }
        }
        const double deficit = inst.required[g] - covered;
        if (deficit > 0.0 && m.phase1_yield[g] > 0.0) {
            alloc.contact_fraction[g] = std::min(1.0, deficit / m.phase1_yield[g]);
        }
    }
    return finalize(std::move(alloc), inst);
}

} // namespace

Allocation standard_allocation(const DesignInstance &inst, double rate) {
    inst.validate();
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw std::invalid_argument("sampling rate must lie in (0,1]");
    }
    Allocation alloc;
    alloc.method = AllocationMethod::standard;
    alloc.contact_fraction.assign(inst.group_count(), rate);
    alloc.region_selected.assign(inst.region_count(), 0);
    return finalize(std::move(alloc), inst);
}

Allocation heuristic_allocation(const DesignInstance &inst, double rate) {
    inst.validate();
    if (!(rate > 0.0 && rate <= 1.0)) {
        throw std::invalid_argument("sampling rate must lie in (0,1]");
    }
    const auto totals = inst.counts.group_totals();
    const double population = std::accumulate(totals.begin(), totals.end(), 0.0);
    const double share = rate * population / static_cast<double>(inst.group_count());
    Allocation alloc;
    alloc.method = AllocationMethod::heuristic;
    alloc.contact_fraction.resize(inst.group_count());
    for (std::size_t g = 0; g < inst.group_count(); ++g) {
        alloc.contact_fraction[g] = totals[g] > 0.0 ? std::min(1.0, share / totals[g]) : 0.0;
    }
    alloc.region_selected.assign(inst.region_count(), 0);
    return finalize(std::move(alloc), inst);
}

Allocation optimize_phase1(const DesignInstance &inst) {
    inst.validate();
    const auto totals = inst.counts.group_totals();
    Allocation alloc;
    alloc.method = AllocationMethod::phase1;
    alloc.contact_fraction.assign(inst.group_count(), 0.0);
    alloc.region_selected.assign(inst.region_count(), 0);

    std::ostringstream msg;
    bool infeasible = false;
    for (std::size_t g = 0; g < inst.group_count(); ++g) {
        if (inst.required[g] <= 0.0) {
            continue;
        }
        const double yield = totals[g] * (1.0 - inst.phase1_failure[g]);
        if (inst.required[g] > yield * (1.0 + kFeasTol)) {
            if (!infeasible) {
                msg << "phase-1 infeasible:";
                infeasible = true;
            }
            msg << " group " << g << " short by " << inst.required[g] - yield << " successes;";
            continue;
        }
        alloc.contact_fraction[g] = std::min(1.0, inst.required[g] / yield);
    }
    if (infeasible) {
        throw InfeasibleError(msg.str());
    }
    return finalize(std::move(alloc), inst);
}

Allocation brute_force_two_phase(const DesignInstance &inst) {
    inst.validate();
    const std::size_t regions = inst.region_count();
    if (regions > 20) {
        throw InfeasibleError("brute force enumeration limited to 20 regions");
    }
    const TwoPhaseModel model = build_model(inst);
    require_globally_feasible(model, inst);

    const std::uint64_t combinations = 1ULL << regions;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> best_selection;
    std::vector<double> covered(model.groups);
    std::vector<std::uint8_t> selection(regions, 0);

    for (std::uint64_t mask = 0; mask < combinations; ++mask) {
        std::size_t picked = 0;
        std::fill(covered.begin(), covered.end(), 0.0);
        for (std::size_t r = 0; r < regions; ++r) {
            selection[r] = static_cast<std::uint8_t>((mask >> r) & 1ULL);
            if (selection[r]) {
                ++picked;
                for (std::size_t g = 0; g < model.groups; ++g) {
                    covered[g] += model.cover(g, r);
                }
            }
        }
        double phase1_cost = 0.0;
        const double completion =
            completion_cost(model, inst.required, covered, phase1_cost);
        if (std::isnan(completion)) {
            continue;
        }
        const double cost = model.region_cost * static_cast<double>(picked) + completion;
        const double tol = cost_tolerance(best_cost);
        bool better = cost < best_cost - tol;
        if (!better && cost <= best_cost + tol && !best_selection.empty()) {
            const auto best_picked = static_cast<std::size_t>(
                std::count(best_selection.begin(), best_selection.end(), std::uint8_t{1}));
            better = picked < best_picked ||
                     (picked == best_picked &&
                      std::lexicographical_compare(selection.begin(), selection.end(),
                                                   best_selection.begin(), best_selection.end()));
        }
        if (better) {
            best_cost = cost;
            best_selection = selection;
        }
    }
    if (best_selection.empty() && !std::isfinite(best_cost)) {
        throw InfeasibleError("no feasible region selection exists");
    }
    if (best_selection.empty()) {
        best_selection.assign(regions, 0);
    }
    return assemble_two_phase(inst, model, best_selection, AllocationMethod::brute_force);
}

namespace {

struct BranchState {
    const TwoPhaseModel *model = nullptr;
    const DesignInstance *inst = nullptr;
    std::vector<std::size_t> order;     // regions in descending coverage value
    std::vector<double> suffix_cover;   // (depth, group): coverage of order[depth..]
    std::vector<std::uint8_t> selected; // by region index
    std::vector<double> covered;        // per group
    std::size_t picked = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<std::uint8_t> best_selection;
    std::uint64_t nodes_left = 0;
    bool budget_exhausted = false;

    // scratch for the lower bound
    std::vector<double> rates;

    [[nodiscard]] double remaining_cover(std::size_t depth, std::size_t g) const {
        return suffix_cover[depth * model->groups + g];
    }
};

// Offer the completed-here candidate (select nothing further).
void offer_candidate(BranchState &st) {
    double phase1_cost = 0.0;
    const double completion =
        completion_cost(*st.model, st.inst->required, st.covered, phase1_cost);
    if (std::isnan(completion)) {
        return;
    }
    const double cost =
        st.model->region_cost * static_cast<double>(st.picked) + completion;
    if (cost < st.best_cost - cost_tolerance(st.best_cost)) {
        st.best_cost = cost;
        st.best_selection = st.selected;
    }
}

// Fractional relaxation: remaining regions may be bought in fractions, each
// unit reducing the phase-1 bill at its aggregate rate. Never overestimates
// the true completion cost.
double lower_bound(BranchState &st, std::size_t depth) {
    const TwoPhaseModel &m = *st.model;
    double bill = 0.0;
    for (std::size_t g = 0; g < m.groups; ++g) {
        const double deficit = st.inst->required[g] - st.covered[g];
        if (deficit > 0.0) {
            bill += m.unit_cost[g] * deficit;
        }
    }
    const double base = m.region_cost * static_cast<double>(st.picked);
    if (bill <= 0.0) {
        return base;
    }
    st.rates.clear();
    for (std::size_t d = depth; d < st.order.size(); ++d) {
        const std::size_t r = st.order[d];
        double rate = 0.0;
        for (std::size_t g = 0; g < m.groups; ++g) {
            const double deficit = st.inst->required[g] - st.covered[g];
            if (deficit > 0.0) {
                rate += m.unit_cost[g] * std::min(m.cover(g, r), deficit);
            }
        }
        if (rate > m.region_cost) {
            st.rates.push_back(rate);
        }
    }
    std::sort(st.rates.begin(), st.rates.end(), std::greater<>());
    double extra = 0.0;
    for (double rate : st.rates) {
        if (bill <= 0.0) {
            break;
        }
        const double fraction = std::min(1.0, bill / rate);
        extra += fraction * m.region_cost;
        bill -= fraction * rate;
    }
    return base + extra + std::max(0.0, bill);
}

void branch(BranchState &st, std::size_t depth) {
    if (st.budget_exhausted) {
        return;
    }
    if (st.nodes_left == 0) {
        st.budget_exhausted = true;
        return;
    }
    --st.nodes_left;

    offer_candidate(st);
    if (depth >= st.order.size()) {
        return;
    }
    // Feasibility: even taking every remaining region must leave deficits
    // coverable by phase 1.
    for (std::size_t g = 0; g < st.model->groups; ++g) {
        const double reachable = st.covered[g] + st.remaining_cover(depth, g);
        const double deficit = st.inst->required[g] - reachable;
        if (deficit > st.model->phase1_yield[g] * (1.0 + kFeasTol) + kFeasTol) {
            return;
        }
    }
    if (lower_bound(st, depth) >= st.best_cost - cost_tolerance(st.best_cost)) {
        return;
    }

    const std::size_t region = st.order[depth];
    double include_rate = 0.0;
    double region_total = 0.0;
    for (std::size_t g = 0; g < st.model->groups; ++g) {
        const double deficit = st.inst->required[g] - st.covered[g];
        region_total += st.model->cover(g, region);
        if (deficit > 0.0) {
            include_rate += st.model->unit_cost[g] * std::min(st.model->cover(g, region), deficit);
        }
    }

    const auto do_include = [&] {
        st.selected[region] = 1;
        ++st.picked;
        for (std::size_t g = 0; g < st.model->groups; ++g) {
            st.covered[g] += st.model->cover(g, region);
        }
        branch(st, depth + 1);
        for (std::size_t g = 0; g < st.model->groups; ++g) {
            st.covered[g] -= st.model->cover(g, region);
        }
        --st.picked;
        st.selected[region] = 0;
    };
    const auto do_exclude = [&] { branch(st, depth + 1); };

    if (region_total <= 0.0) {
        do_exclude(); // a region contributing nothing is never worth its cost
    } else if (include_rate > st.model->region_cost) {
        do_include();
        do_exclude();
    } else {
        do_exclude();
        do_include();
    }
}

} // namespace

Allocation optimize_two_phase(const DesignInstance &inst, const TwoPhaseOptions &options) {
    inst.validate();
    const TwoPhaseModel model = build_model(inst);
    require_globally_feasible(model, inst);

    BranchState st;
    st.model = &model;
    st.inst = &inst;
    st.selected.assign(model.regions, 0);
    st.covered.assign(model.groups, 0.0);
    st.nodes_left = options.node_budget;

    // Explore regions by descending aggregate coverage, ties on lower index.
    st.order.resize(model.regions);
    std::iota(st.order.begin(), st.order.end(), std::size_t{0});
    std::vector<double> value(model.regions, 0.0);
    for (std::size_t r = 0; r < model.regions; ++r) {
        for (std::size_t g = 0; g < model.groups; ++g) {
            value[r] += model.cover(g, r);
        }
    }
    std::stable_sort(st.order.begin(), st.order.end(),
                     [&](std::size_t a, std::size_t b) { return value[a] > value[b]; });

    st.suffix_cover.assign((model.regions + 1) * model.groups, 0.0);
    for (std::size_t d = model.regions; d-- > 0;) {
        const std::size_t r = st.order[d];
        for (std::size_t g = 0; g < model.groups; ++g) {
            st.suffix_cover[d * model.groups + g] =
                st.suffix_cover[(d + 1) * model.groups + g] + model.cover(g, r);
        }
    }

    branch(st, 0);

    if (!std::isfinite(st.best_cost)) {
        throw InfeasibleError("no feasible region selection exists");
    }
    Allocation alloc =
        assemble_two_phase(inst, model, st.best_selection, AllocationMethod::two_phase);
    alloc.optimal_proven = !st.budget_exhausted;
    return alloc;
}

} // namespace survey
