#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sipp/allocate.hpp"
#include "sipp/bounds.hpp"
#include "sipp/network.hpp"
#include "sipp/sensitivity.hpp"
#include "sipp/sparsify.hpp"

namespace sipp {

enum class RunStrategy { Det, Rand, Hybrid, Simple, Wt };

std::string to_string(RunStrategy s);
RunStrategy parse_run_strategy(const std::string& name);

enum class InitKind { UniformNonneg, Gaussian };
InitKind parse_init(const std::string& name);

// --- model / data generation -------------------------------------------------

/// Parses an input shape such as "16" or "1x8x8".
Shape parse_shape(const std::string& text);

/// Builds a network from a comma-separated layer list, e.g.
/// "conv:4:3:3:1:1:relu,dense:10:identity" (conv:OUT:KH:KW[:STRIDE[:PAD]]:ACT,
/// dense:OUT:ACT). Weights are drawn from U[0,1] (uniform_nonneg) or from
/// N(0, 1/fan_in) (gaussian); biases, when requested, from the same law.
Network gen_model(const Shape& input_shape, const std::string& layers, InitKind init, std::uint64_t seed,
                  bool with_bias = false);

/// `count` samples of the given per-sample shape; U[0,1] or N(0,1).
Tensor gen_data(const Shape& sample_shape, InitKind dist, std::size_t count, std::uint64_t seed);

// --- pruning pipeline ----------------------------------------------------------

struct RunConfig {
    std::filesystem::path model;
    std::filesystem::path data;       // sensitivity (validation) split
    std::filesystem::path test_data;  // optional
    RunStrategy strategy = RunStrategy::Det;
    std::optional<std::size_t> budget;
    std::optional<double> ratio;
    BoundParams params;               // eta is filled from the model
    std::uint64_t seed = 0;
    std::filesystem::path out;
    std::optional<std::size_t> sample_size;  // overrides the |S| formula
    std::size_t floor = 1;
    bool export_sensitivity = false;
};

/// Exactly one of budget / ratio; ratio r keeps round((1 - r) * total).
std::size_t resolve_budget(std::optional<std::size_t> budget, std::optional<double> ratio, std::size_t total);

/// Everything derived from the unpruned model and the sample set S; shared
/// by all budgets of a sweep.
struct SensitivityContext {
    Network net;
    Tensor samples;
    ForwardTrace trace;
    std::vector<SensitivityTable> tables;
    BoundParams params;
    std::size_t requested_sample_size = 0;
    std::vector<std::string> flags;
    double elapsed_ms = 0.0;
};

SensitivityContext prepare_sensitivity(const Network& net, const Tensor& validation, BoundParams params,
                                       std::uint64_t seed, std::optional<std::size_t> sample_size = std::nullopt);

/// Plan for any harness strategy. For `wt` the per-group kept sets are
/// returned through `kept_sets` (aligned with the tables).
AllocationPlan make_plan(const SensitivityContext& ctx, RunStrategy strategy, std::size_t budget, std::size_t floor,
                         std::vector<std::vector<std::size_t>>* kept_sets = nullptr);

/// Global magnitude thresholding: kept index sets of the B largest |w|,
/// ties by ascending (layer, group, index).
std::vector<std::vector<std::size_t>> magnitude_keep_sets(const Network& net, std::size_t budget);

struct LayerCount {
    std::size_t kept = 0;
    std::size_t total = 0;
};

struct PruneResult {
    Network pruned;
    AllocationPlan plan;
    PruneCertificate certificate;
    std::vector<PrunedGroup> groups;
    std::vector<LayerCount> per_layer;
    std::size_t budget = 0;
    std::size_t kept = 0;
    std::size_t total = 0;
    double allocation_ms = 0.0;
    double sparsify_ms = 0.0;
    double certificate_ms = 0.0;
};

PruneResult prune_with(const SensitivityContext& ctx, RunStrategy strategy, std::size_t budget, std::uint64_t seed,
                       std::size_t floor = 1);

struct ErrorStats {
    std::size_t count = 0;
    double mean = 0.0;
    double max = 0.0;
    double p50 = 0.0;
    double p90 = 0.0;
    double p99 = 0.0;
    std::optional<double> coverage;  // fraction with error <= eps
    std::vector<double> errors;
};

/// Relative output errors ||f_hat(x) - f(x)|| / ||f(x)|| over a batch.
ErrorStats evaluate_errors(const Network& reference, const Network& pruned, const Tensor& test,
                           std::optional<double> eps = std::nullopt);

struct RunReport {
    std::string strategy;
    std::optional<double> ratio;
    std::size_t budget = 0;
    std::size_t kept = 0;
    std::size_t total = 0;
    std::vector<LayerCount> per_layer;
    PruneCertificate certificate;
    std::optional<ErrorStats> empirical;
    std::size_t sample_size = 0;
    std::size_t requested_sample_size = 0;
    std::vector<std::string> flags;
    double sensitivity_ms = 0.0, allocation_ms = 0.0, sparsify_ms = 0.0, certificate_ms = 0.0, eval_ms = 0.0;
};

std::string report_to_json(const RunReport& report);
std::string stats_to_json(const ErrorStats& stats);

/// Full run from disk: writes the pruned bundle, report.json,
/// certificate.json and plan.csv (plus sensitivity.csv on request) to
/// config.out.
RunReport prune_run(const RunConfig& config);

struct SweepRow {
    double ratio = 0.0;
    std::string strategy;
    std::size_t budget = 0;
    std::size_t kept = 0;
    std::size_t total = 0;
    double certificate_eps = 0.0;
    double mean_rel_err = 0.0;
    double max_rel_err = 0.0;
    double coverage = 0.0;
};

/// One pruning run per (strategy, ratio) sharing a single sensitivity pass.
std::vector<SweepRow> sweep(const SensitivityContext& ctx, const Tensor& test, const std::vector<double>& ratios,
                            const std::vector<RunStrategy>& strategies, std::uint64_t seed, std::size_t floor = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string plan_csv(const AllocationPlan& plan);
std::string sensitivity_csv(const std::vector<SensitivityTable>& tables);

}  // namespace sipp
