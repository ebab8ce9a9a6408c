#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sipp/sensitivity.hpp"
#include "sipp/sparsify.hpp"

namespace sipp {

struct GroupBudget {
    std::size_t layer = 0;
    std::size_t group = 0;
    std::size_t m = 0;
    double error = 0.0;  // certificate of this group at budget m
};

/// Per-group budgets, aligned with the table list they were computed from.
struct AllocationPlan {
    std::vector<GroupBudget> groups;
    std::size_t total = 0;
    double objective = 0.0;
    Strategy strategy = Strategy::Det;
};

struct AllocOptions {
    /// Minimum weights kept per group (clamped to the group size).
    std::size_t floor = 1;
};

/// Certificate of one group at budget m. m = 0 means the group is emptied
/// and costs C * S for every strategy. The sampled path caps m at the number
/// of positive sensitivities.
double group_error(const SensitivityTable& table, std::size_t m, Strategy strategy, const BoundParams& params);

/// Greedy marginal allocation of a global budget B, one weight at a time to
/// the group whose certificate drops the most. Exactly optimal when every
/// group's error curve is convex and nonincreasing (always true for det).
AllocationPlan opt_alloc(std::span<const SensitivityTable> tables, std::size_t budget, Strategy strategy,
                         const BoundParams& params, const AllocOptions& options = {});

/// Global thresholding: keep the B largest sensitivities network-wide.
AllocationPlan sipp_simple(std::span<const SensitivityTable> tables, std::size_t budget, const BoundParams& params);

/// Sum of the plan's group errors, recomputed in table order.
double plan_objective(std::span<const GroupBudget> groups);

}  // namespace sipp
