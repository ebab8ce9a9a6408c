#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sipp/network.hpp"

namespace sipp {

/// Constants of the regularity assumption plus the failure probability.
/// `eta` is the total output-patch count of the network, used to spread
/// the failure probability over every patch and sign quadrant.
struct BoundParams {
    double c = 2.0;
    double k = 1.0;
    double delta = 0.1;
    std::size_t eta = 1;

    void validate() const;
    /// Per-patch failure probability delta / (8 eta).
    double delta_patch() const { return delta / (8.0 * static_cast<double>(eta)); }
};

/// Sign quadrant: (weight part, activation part).
enum class Quadrant { PlusPlus, PlusMinus, MinusPlus, MinusMinus };
inline constexpr Quadrant kQuadrants[] = {Quadrant::PlusPlus, Quadrant::PlusMinus, Quadrant::MinusPlus,
                                         Quadrant::MinusMinus};

/// Per-index ratios w_j^q a_j^q / sum_k w_k^q a_k^q for one patch and one
/// quadrant. An empty quadrant (zero denominator) yields all zeros.
std::vector<double> quadrant_ratios(std::span<const double> weights, std::span<const double> patch, Quadrant q);

/// Generalized relative importance g_j(x): max over patches and quadrants.
std::vector<double> relative_importance(std::span<const double> weights, const PatchMatrix& patches);

/// Folds g(x) for one input into a running element-wise maximum.
void accumulate_importance(std::span<const double> weights, const PatchMatrix& patches, std::span<double> running_max);

/// Empirical sensitivities of one parameter group.
///
/// Indices are ranked by descending sensitivity, then descending |w_j|,
/// then ascending j. Prefix and suffix sums over that order are kept so the
/// partial sum S(m) and the dropped mass S - S(m) are exact lookups; the
/// dropped mass is accumulated from the tail so it is exactly zero at m = |I|
/// and monotone in m.
class SensitivityTable {
public:
    SensitivityTable() = default;
    SensitivityTable(std::size_t layer, std::size_t group, std::vector<double> s, std::span<const double> weights);

    std::size_t layer() const { return layer_; }
    std::size_t group() const { return group_; }
    std::size_t size() const { return s_.size(); }

    const std::vector<double>& values() const { return s_; }
    double operator[](std::size_t j) const { return s_[j]; }
    double magnitude(std::size_t j) const { return mag_[j]; }

    /// S = sum of all sensitivities.
    double total() const { return prefix_.back(); }
    /// Indices by rank.
    const std::vector<std::size_t>& order() const { return order_; }
    /// Sum of the m largest sensitivities.
    double partial(std::size_t m) const { return prefix_.at(m); }
    /// Sum of all but the m largest sensitivities.
    double dropped(std::size_t m) const { return suffix_.at(m); }
    /// Number of strictly positive sensitivities.
    std::size_t positive_count() const { return positive_; }

private:
    std::size_t layer_ = 0;
    std::size_t group_ = 0;
    std::vector<double> s_;
    std::vector<double> mag_;
    std::vector<std::size_t> order_;
    std::vector<double> prefix_{0.0};
    std::vector<double> suffix_{0.0};
    std::size_t positive_ = 0;
};

/// s_j = max over the sample inputs of g_j(x); one patch matrix per input.
SensitivityTable empirical_sensitivity(const ParameterGroup& group, std::span<const PatchMatrix> per_input_patches);

/// Tables for every group of every layer, computed from the unpruned
/// activations recorded in `trace` (one pass per layer over the batch).
std::vector<SensitivityTable> network_sensitivities(const Network& net, const ForwardTrace& trace);

/// |S| = ceil(K ln(8 eta rho / delta)).
std::size_t sample_set_size(std::size_t eta, std::size_t rho, double delta, double k);

/// Uniform sample of `count` distinct row indices out of `population`
/// (all indices, in sampled order, when count >= population).
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count, std::uint64_t seed);

}  // namespace sipp
