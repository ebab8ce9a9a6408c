#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sipp/network.hpp"
#include "sipp/sensitivity.hpp"

namespace sipp {

enum class Strategy { Det, Rand, Hybrid };

std::string to_string(Strategy s);

struct PrunedGroup {
    std::vector<std::size_t> kept;  // ascending indices retained by the strategy
    std::vector<double> weights;    // same length as the group; zeros where dropped
    Strategy used = Strategy::Det;
    double certificate = 0.0;       // relative error bound of the applied strategy
    double eps_det = 0.0;
    double eps_rand = 0.0;          // +inf when sampling is not possible
    std::size_t unique_kept = 0;
    std::size_t draws = 0;          // N for the sampled path, 0 otherwise
};

/// C * (S - S(m)) for the m top-ranked weights.
double det_certificate(const SensitivityTable& table, std::size_t m, double c);

/// C * (sum of sensitivities outside `kept`); valid for any kept set.
double det_certificate_for(const SensitivityTable& table, std::span<const std::size_t> kept, double c);

/// Relative error bound for N importance-sampling draws:
/// (S~ + sqrt(S~ (S~ + 6N))) / N with S~ = (C S / 3) ln(2 / delta_patch).
double rand_certificate(double total_sensitivity, std::size_t draws, const BoundParams& params);
double rand_certificate_from_stilde(double stilde, std::size_t draws);
double stilde(double total_sensitivity, const BoundParams& params);

/// Expected number of distinct indices after n draws: sum_j 1 - (1 - q_j)^n.
double expected_unique(std::span<const double> q, std::size_t draws);

/// Smallest N whose expected distinct count reaches min(m, P - 0.25), P the
/// number of nonzero probabilities.
std::size_t expected_draws(std::span<const double> q, std::size_t m);

/// Sampling probabilities q_j = s_j / S.
std::vector<double> sampling_probabilities(const SensitivityTable& table);

/// N categorical draws from q, returned as counts.
std::vector<std::size_t> multinomial_counts(std::span<const double> q, std::size_t draws, std::mt19937_64& rng);

/// Reweighted estimator w_j n_j / (N q_j) from N draws; zero where n_j = 0.
std::vector<double> reweighted_sample(std::span<const double> weights, std::span<const double> q, std::size_t draws,
                                      std::mt19937_64& rng, std::vector<std::size_t>* counts = nullptr);

PrunedGroup sipp_det(const ParameterGroup& group, const SensitivityTable& table, std::size_t m,
                     const BoundParams& params);
PrunedGroup sipp_rand(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, std::uint64_t seed,
                      const BoundParams& params);
PrunedGroup sipp_hybrid(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, std::uint64_t seed,
                        const BoundParams& params);

PrunedGroup sparsify(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, Strategy strategy,
                     std::uint64_t seed, const BoundParams& params);

}  // namespace sipp
