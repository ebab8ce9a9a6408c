#include "sipp/allocate.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace sipp {

double group_error(const SensitivityTable& table, std::size_t m, Strategy strategy, const BoundParams& params) {
    if (m > table.size()) throw std::invalid_argument("budget exceeds group size");
    const double det = det_certificate(table, m, params.c);
    if (m == 0 || strategy == Strategy::Det) return det;
    if (table.positive_count() == 0) return det;  // zero either way

    const auto q = sampling_probabilities(table);
    const auto draws = expected_draws(q, std::min(m, table.positive_count()));
    const double rand = rand_certificate(table.total(), draws, params);
    return strategy == Strategy::Rand ? rand : std::min(det, rand);
}

double plan_objective(std::span<const GroupBudget> groups) {
    double sum = 0.0;
    for (const auto& g : groups) sum += g.error;
    return sum;
}

namespace {

struct Candidate {
    double gain;
    double next_sensitivity;
    double next_magnitude;
    std::size_t layer, group, index;  // index of the next weight by rank
    std::size_t slot;                 // position in the table list
};

// Larger gain first, then larger sensitivity, then larger |w|, then the
// lexicographically smallest (layer, group, index).
struct Lower {
    bool operator()(const Candidate& a, const Candidate& b) const {
        if (a.gain != b.gain) return a.gain < b.gain;
        if (a.next_sensitivity != b.next_sensitivity) return a.next_sensitivity < b.next_sensitivity;
        if (a.next_magnitude != b.next_magnitude) return a.next_magnitude < b.next_magnitude;
        return std::tie(a.layer, a.group, a.index) > std::tie(b.layer, b.group, b.index);
    }
};

}  // namespace

AllocationPlan opt_alloc(std::span<const SensitivityTable> tables, std::size_t budget, Strategy strategy,
                         const BoundParams& params, const AllocOptions& options) {
    if (strategy == Strategy::Rand && options.floor == 0) {
        throw std::invalid_argument("sampled allocation needs a floor of at least one weight per group");
    }
    std::vector<std::size_t> m(tables.size());
    std::vector<double> err(tables.size());
    std::size_t used = 0;
    for (std::size_t g = 0; g < tables.size(); ++g) {
        m[g] = std::min(options.floor, tables[g].size());
        used += m[g];
    }
    if (budget < used) {
        throw std::invalid_argument("budget " + std::to_string(budget) + " is below the per-group floor total " +
                                    std::to_string(used));
    }

    auto candidate = [&](std::size_t g) {
        const auto& t = tables[g];
        const auto next = t.order()[m[g]];
        // The det gain is exactly the next sensitivity, so greedy det
        // reproduces global thresholding bit for bit.
        const double gain = strategy == Strategy::Det
                                ? params.c * t[next]
                                : err[g] - group_error(t, m[g] + 1, strategy, params);
        return Candidate{gain, t[next], t.magnitude(next), t.layer(), t.group(), next, g};
    };

    std::priority_queue<Candidate, std::vector<Candidate>, Lower> heap;
    for (std::size_t g = 0; g < tables.size(); ++g) {
        err[g] = group_error(tables[g], m[g], strategy, params);
        if (m[g] < tables[g].size()) heap.push(candidate(g));
    }
    while (used < budget && !heap.empty()) {
        const auto top = heap.top();
        heap.pop();
        const auto g = top.slot;
        ++m[g];
        ++used;
        err[g] = group_error(tables[g], m[g], strategy, params);
        if (m[g] < tables[g].size()) heap.push(candidate(g));
    }

    AllocationPlan plan;
    plan.strategy = strategy;
    for (std::size_t g = 0; g < tables.size(); ++g) {
        plan.groups.push_back({tables[g].layer(), tables[g].group(), m[g], err[g]});
    }
    plan.total = used;
    plan.objective = plan_objective(plan.groups);
    return plan;
}

AllocationPlan sipp_simple(std::span<const SensitivityTable> tables, std::size_t budget, const BoundParams& params) {
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
    struct Entry {
        double s, mag;
        std::size_t layer, group, index, slot;
    };
    std::vector<Entry> all;
    for (std::size_t g = 0; g < tables.size(); ++g) {
        const auto& t = tables[g];
        for (std::size_t j = 0; j < t.size(); ++j) all.push_back({t[j], t.magnitude(j), t.layer(), t.group(), j, g});
    }
    const auto keep = std::min(budget, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                      [](const Entry& a, const Entry& b) {
                          if (a.s != b.s) return a.s > b.s;
                          if (a.mag != b.mag) return a.mag > b.mag;
                          return std::tie(a.layer, a.group, a.index) < std::tie(b.layer, b.group, b.index);
                      });
    std::vector<std::size_t> m(tables.size(), 0);
    for (std::size_t r = 0; r < keep; ++r) ++m[all[r].slot];

    AllocationPlan plan;
    plan.strategy = Strategy::Det;
    for (std::size_t g = 0; g < tables.size(); ++g) {
        plan.groups.push_back({tables[g].layer(), tables[g].group(), m[g],
                               det_certificate(tables[g], m[g], params.c)});
    }
    plan.total = keep;
    plan.objective = plan_objective(plan.groups);
    return plan;
}

}  // namespace sipp
