#include "sipp/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sipp/random.hpp"

namespace sipp {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Det: return "det";
        case Strategy::Rand: return "rand";
        case Strategy::Hybrid: return "hybrid";
    }
    return "det";
}

double det_certificate(const SensitivityTable& table, std::size_t m, double c) {
    if (m > table.size()) throw std::invalid_argument("budget exceeds group size");
    return c * table.dropped(m);
}

double det_certificate_for(const SensitivityTable& table, std::span<const std::size_t> kept, double c) {
    std::vector<char> keep(table.size(), 0);
    for (auto j : kept) keep.at(j) = 1;
    double dropped = 0.0;
    // Same accumulation order as SensitivityTable::dropped.
    const auto& order = table.order();
    for (std::size_t r = order.size(); r-- > 0;) {
        if (!keep[order[r]]) dropped += table[order[r]];
    }
    return c * dropped;
}

double stilde(double total_sensitivity, const BoundParams& params) {
    return params.c * total_sensitivity / 3.0 * std::log(2.0 / params.delta_patch());
}

double rand_certificate_from_stilde(double st, std::size_t draws) {
    if (draws == 0) throw std::invalid_argument("need at least one draw");
    const double n = static_cast<double>(draws);
    return (st + std::sqrt(st * (st + 6.0 * n))) / n;
}

double rand_certificate(double total_sensitivity, std::size_t draws, const BoundParams& params) {
    return rand_certificate_from_stilde(stilde(total_sensitivity, params), draws);
}

double expected_unique(std::span<const double> q, std::size_t draws) {
    const double n = static_cast<double>(draws);
    double e = 0.0;
    for (double p : q) {
        if (p <= 0.0) continue;
        e += -std::expm1(n * std::log1p(-std::min(p, 1.0)));
    }
    return e;
}

std::size_t expected_draws(std::span<const double> q, std::size_t m) {
    double sum = 0.0;
    std::size_t positive = 0;
    for (double p : q) {
        if (!(p >= 0.0)) throw std::invalid_argument("probabilities must be nonnegative");
        sum += p;
        positive += p > 0.0;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to 1");
    if (m == 0 || m > positive) {
        throw std::invalid_argument("cannot expect " + std::to_string(m) + " distinct draws from " +
                                    std::to_string(positive) + " outcomes");
    }
    // The expectation only approaches the support size asymptotically.
    const double target = std::min(static_cast<double>(m), static_cast<double>(positive) - 0.25);

    std::size_t hi = 1;
    while (expected_unique(q, hi) < target) {
        if (hi > (std::size_t{1} << 52)) throw std::runtime_error("expected draw count does not converge");
        hi *= 2;
    }
    std::size_t lo = hi / 2 + 1;  // E(hi / 2) < target unless hi == 1
    if (hi == 1) return 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (expected_unique(q, mid) >= target) hi = mid;
        else lo = mid + 1;
    }
    return hi;
}

std::vector<double> sampling_probabilities(const SensitivityTable& table) {
    const double total = table.total();
    if (!(total > 0.0)) throw std::invalid_argument("all sensitivities are zero; no sampling distribution");
    std::vector<double> q(table.size());
    for (std::size_t j = 0; j < q.size(); ++j) q[j] = table[j] / total;
    return q;
}

std::vector<std::size_t> multinomial_counts(std::span<const double> q, std::size_t draws, std::mt19937_64& rng) {
    std::vector<double> cum(q.size());
    double acc = 0.0;
    std::size_t last_positive = q.size();
    for (std::size_t j = 0; j < q.size(); ++j) {
        acc += q[j];
        cum[j] = acc;
        if (q[j] > 0.0) last_positive = j;
    }
    if (last_positive == q.size()) throw std::invalid_argument("no positive probability to sample from");

    std::vector<std::size_t> counts(q.size(), 0);
    for (std::size_t d = 0; d < draws; ++d) {
        const double u = uniform01(rng) * acc;
        auto idx = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        if (idx > last_positive) idx = last_positive;
        ++counts[idx];
    }
    return counts;
}

std::vector<double> reweighted_sample(std::span<const double> weights, std::span<const double> q, std::size_t draws,
                                      std::mt19937_64& rng, std::vector<std::size_t>* counts_out) {
    if (weights.size() != q.size()) throw std::invalid_argument("weights and probabilities differ in length");
    if (draws == 0) throw std::invalid_argument("need at least one draw");
    auto counts = multinomial_counts(q, draws, rng);
    std::vector<double> w(weights.size(), 0.0);
    const double n = static_cast<double>(draws);
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (counts[j] > 0) w[j] = static_cast<double>(counts[j]) / (n * q[j]) * weights[j];
    }
    if (counts_out) *counts_out = std::move(counts);
    return w;
}

namespace {

void check_budget(const ParameterGroup& group, const SensitivityTable& table, std::size_t m) {
    if (group.weights.size() != table.size()) throw std::invalid_argument("table does not match group");
    if (m < 1 || m > table.size()) {
        throw std::invalid_argument("budget m=" + std::to_string(m) + " outside [1, " + std::to_string(table.size()) +
                                    "]");
    }
}

PrunedGroup keep_top(const ParameterGroup& group, const SensitivityTable& table, std::size_t m,
                     const BoundParams& params) {
    PrunedGroup out;
    out.used = Strategy::Det;
    out.weights.assign(group.weights.size(), 0.0);
    out.kept.assign(table.order().begin(), table.order().begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(out.kept.begin(), out.kept.end());
    for (auto j : out.kept) out.weights[j] = group.weights[j];
    out.unique_kept = m;
    out.eps_det = det_certificate(table, m, params.c);
    out.certificate = out.eps_det;
    out.eps_rand = std::numeric_limits<double>::infinity();
    return out;
}

PrunedGroup sample_group(const ParameterGroup& group, const SensitivityTable& table, std::size_t m,
                         std::uint64_t seed, const BoundParams& params) {
    const auto q = sampling_probabilities(table);
    const std::size_t target = std::min(m, table.positive_count());
    PrunedGroup out;
    out.used = Strategy::Rand;
    out.draws = expected_draws(q, target);
    auto rng = seeded_engine(seed);
    std::vector<std::size_t> counts;
    out.weights = reweighted_sample(group.weights, q, out.draws, rng, &counts);
    for (std::size_t j = 0; j < counts.size(); ++j) {
        if (counts[j] > 0) out.kept.push_back(j);
    }
    out.unique_kept = out.kept.size();
    out.eps_det = det_certificate(table, m, params.c);
    out.eps_rand = rand_certificate(table.total(), out.draws, params);
    out.certificate = out.eps_rand;
    return out;
}

}  // namespace

PrunedGroup sipp_det(const ParameterGroup& group, const SensitivityTable& table, std::size_t m,
                     const BoundParams& params) {
    check_budget(group, table, m);
    return keep_top(group, table, m, params);
}

PrunedGroup sipp_rand(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, std::uint64_t seed,
                      const BoundParams& params) {
    check_budget(group, table, m);
    return sample_group(group, table, m, seed, params);
}

PrunedGroup sipp_hybrid(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, std::uint64_t seed,
                        const BoundParams& params) {
    check_budget(group, table, m);
    const double eps_det = det_certificate(table, m, params.c);
    double eps_rand = std::numeric_limits<double>::infinity();
    if (table.positive_count() > 0) {
        const auto q = sampling_probabilities(table);
        eps_rand = rand_certificate(table.total(), expected_draws(q, std::min(m, table.positive_count())), params);
    }
    // Ties go to sampling, matching the strict comparison of the selector.
    if (eps_rand > eps_det) {
        auto out = keep_top(group, table, m, params);
        out.eps_rand = eps_rand;
        return out;
    }
    return sample_group(group, table, m, seed, params);
}

PrunedGroup sparsify(const ParameterGroup& group, const SensitivityTable& table, std::size_t m, Strategy strategy,
                     std::uint64_t seed, const BoundParams& params) {
    if (m == 0) {
        // Fully emptied group: every contribution is dropped.
        PrunedGroup out;
        out.weights.assign(group.weights.size(), 0.0);
        out.eps_det = det_certificate(table, 0, params.c);
        out.certificate = out.eps_det;
        out.eps_rand = std::numeric_limits<double>::infinity();
        return out;
    }
    switch (strategy) {
        case Strategy::Det: return sipp_det(group, table, m, params);
        case Strategy::Rand:
            // Without any positive sensitivity there is nothing to sample.
            if (table.positive_count() == 0) return sipp_det(group, table, m, params);
            return sipp_rand(group, table, m, seed, params);
        case Strategy::Hybrid: return sipp_hybrid(group, table, m, seed, params);
    }
    throw std::invalid_argument("unknown strategy");
}

}  // namespace sipp
