#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "sipp/random.hpp"
#include "sipp/sensitivity.hpp"
#include "sipp/sparsify.hpp"

using namespace sipp;

namespace {

BoundParams unit_c() {
    BoundParams p;
    p.c = 1.0;
    return p;
}

struct Instance {
    ParameterGroup group;
    std::vector<PatchMatrix> samples;
    SensitivityTable table;
};

Instance nonneg_instance(std::mt19937_64& rng, std::size_t n, std::size_t rows, std::size_t points) {
    Instance in;
    in.group = ParameterGroup{0, 0, oracle::uniform_vec(rng, n, 0, 1), std::nullopt};
    for (std::size_t x = 0; x < points; ++x)
        in.samples.push_back(PatchMatrix{rows, n, oracle::uniform_vec(rng, rows * n, 0, 1)});
    in.table = empirical_sensitivity(in.group, in.samples);
    return in;
}

double dot(const std::vector<double>& w, std::span<const double> a) {
    double z = 0;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * a[j];
    return z;
}

}  // namespace

TEST_CASE("deterministic pruning") {
    std::vector<double> w{0.4, 0.2, 0.9};
    ParameterGroup g{0, 0, w, std::nullopt};
    SensitivityTable t(0, 0, {0.6, 0.3, 0.1}, w);
    auto all = sipp_det(g, t, 3, unit_c());
    CHECK(all.weights == w);
    CHECK(all.certificate == 0.0);

    auto two = sipp_det(g, t, 2, unit_c());
    CHECK(two.kept == std::vector<std::size_t>{0, 1});
    CHECK(two.weights == std::vector<double>{0.4, 0.2, 0.0});
    CHECK(two.certificate == doctest::Approx(0.1));
    CHECK(two.used == Strategy::Det);
    CHECK(det_certificate_for(t, two.kept, 1.0) == two.certificate);

    CHECK_THROWS_AS(sipp_det(g, t, 0, unit_c()), std::invalid_argument);
    CHECK_THROWS_AS(sipp_det(g, t, 4, unit_c()), std::invalid_argument);
}

TEST_CASE("deterministic error equals the dropped contributions") {
    std::mt19937_64 rng(59);
    for (int trial = 0; trial < 40; ++trial) {
        auto in = nonneg_instance(rng, 2 + rng() % 10, 1 + rng() % 6, 8);
        for (std::size_t m = 1; m <= in.group.weights.size(); ++m) {
            auto pg = sipp_det(in.group, in.table, m, unit_c());
            CHECK(pg.certificate == doctest::Approx(oracle::dropped_sum(in.table.values(), m)).epsilon(1e-12));
            std::size_t nnz = 0;
            for (std::size_t j = 0; j < pg.weights.size(); ++j) {
                if (pg.weights[j] != 0.0) {
                    ++nnz;
                    CHECK(pg.weights[j] == in.group.weights[j]);
                }
            }
            CHECK(nnz <= m);
            for (const auto& pm : in.samples)
                for (std::size_t p = 0; p < pm.rows; ++p) {
                    const double z = dot(in.group.weights, pm.row(p));
                    const double zh = dot(pg.weights, pm.row(p));
                    double dropped = 0;
                    for (std::size_t j = 0; j < pg.weights.size(); ++j)
                        if (pg.weights[j] == 0.0) dropped += in.group.weights[j] * pm.row(p)[j];
                    CHECK(std::abs(zh - z) == doctest::Approx(dropped).epsilon(1e-12));
                    CHECK(std::abs(zh - z) <= pg.certificate * z * (1 + 1e-12));
                }
        }
    }
}

TEST_CASE("expected draws") {
    std::vector<double> one{1.0};
    CHECK(expected_draws(one, 1) == 1);
    std::vector<double> half{0.5, 0.5};
    // E(3) = 1.75 reaches the capped target 2 - 0.25.
    CHECK(expected_unique(half, 2) == doctest::Approx(1.5));
    CHECK(expected_unique(half, 3) == doctest::Approx(1.75));
    CHECK(expected_draws(half, 2) == 3);
    CHECK(expected_draws(half, 1) == 1);
    std::vector<double> point{0.0, 1.0, 0.0};
    CHECK(expected_draws(point, 1) == 1);
    CHECK_THROWS_AS(expected_draws(point, 2), std::invalid_argument);
    std::vector<double> bad{0.5, 0.4};
    CHECK_THROWS_AS(expected_draws(bad, 1), std::invalid_argument);

    std::mt19937_64 rng(61);
    for (int t = 0; t < 30; ++t) {
        auto q = oracle::uniform_vec(rng, 1 + rng() % 20, 0, 1);
        double s = 0;
        for (double v : q) s += v;
        for (auto& v : q) v /= s;
        std::size_t prev = 0;
        for (std::size_t m = 1; m <= q.size(); ++m) {
            const auto n = expected_draws(q, m);
            CHECK(n >= prev);
            prev = n;
            const double target = std::min<double>(m, q.size() - 0.25);
            CHECK(expected_unique(q, n) >= target);
            if (n > 1) CHECK(expected_unique(q, n - 1) < target);
        }
    }
}

TEST_CASE("random pruning") {
    SUBCASE("single weight is reproduced exactly") {
        ParameterGroup g{0, 0, {0.7}, std::nullopt};
        SensitivityTable t(0, 0, {1.0}, g.weights);
        auto pg = sipp_rand(g, t, 1, 5, BoundParams{});
        CHECK(pg.weights[0] == 0.7);
        CHECK(pg.used == Strategy::Rand);
    }
    SUBCASE("certificate formula") {
        CHECK(rand_certificate_from_stilde(1.0, 10) == doctest::Approx((1 + std::sqrt(61.0)) / 10));
        CHECK(rand_certificate_from_stilde(1.0, 10) == doctest::Approx(0.8810).epsilon(1e-4));
        BoundParams p;
        p.c = 3.0;
        p.delta = 0.2;
        p.eta = 4;
        CHECK(stilde(2.0, p) == doctest::Approx(2.0 * std::log(2.0 / (0.2 / 32))));
        double prev = 1e300;
        for (std::size_t n = 1; n < 500; ++n) {
            const double e = rand_certificate(1.3, n, p);
            CHECK(e <= prev);
            prev = e;
        }
    }
    SUBCASE("reweighting and reproducibility") {
        std::mt19937_64 rng(67);
        auto in = nonneg_instance(rng, 8, 3, 4);
        auto a = sipp_rand(in.group, in.table, 4, 99, BoundParams{});
        auto b = sipp_rand(in.group, in.table, 4, 99, BoundParams{});
        CHECK(a.weights == b.weights);
        CHECK(a.draws == expected_draws(sampling_probabilities(in.table), 4));
        auto r2 = seeded_engine(99);
        std::vector<std::size_t> counts;
        auto q = sampling_probabilities(in.table);
        auto w = reweighted_sample(in.group.weights, q, a.draws, r2, &counts);
        CHECK(w == a.weights);
        std::size_t total = 0;
        for (std::size_t j = 0; j < counts.size(); ++j) {
            total += counts[j];
            if (counts[j] > 0)
                CHECK(w[j] == doctest::Approx(counts[j] / (a.draws * q[j]) * in.group.weights[j]).epsilon(1e-15));
        }
        CHECK(total == a.draws);
    }
    SUBCASE("all-zero sensitivities are rejected") {
        ParameterGroup g{0, 0, {0.0, 0.0}, std::nullopt};
        SensitivityTable t(0, 0, {0.0, 0.0}, g.weights);
        CHECK_THROWS_AS(sipp_rand(g, t, 1, 1, BoundParams{}), std::invalid_argument);
        CHECK(sparsify(g, t, 1, Strategy::Rand, 1, BoundParams{}).used == Strategy::Det);
    }
}

TEST_CASE("random pruning is unbiased") {
    std::mt19937_64 rng(71);
    auto in = nonneg_instance(rng, 6, 2, 3);
    const int seeds = 20000;
    const auto& pm = in.samples[0];
    for (std::size_t p = 0; p < pm.rows; ++p) {
        const double z = dot(in.group.weights, pm.row(p));
        double sum = 0, sq = 0;
        for (int s = 0; s < seeds; ++s) {
            const double zh = dot(sipp_rand(in.group, in.table, 3, s, unit_c()).weights, pm.row(p));
            sum += zh;
            sq += zh * zh;
        }
        const double mean = sum / seeds, var = sq / seeds - mean * mean;
        CHECK(std::abs(mean - z) <= 3.0 * std::sqrt(var / seeds));
    }
}

TEST_CASE("unique count expectation") {
    std::mt19937_64 rng(73);
    for (int t = 0; t < 5; ++t) {
        auto in = nonneg_instance(rng, 10, 2, 3);
        for (std::size_t m : {1u, 4u, 8u}) {
            double total = 0;
            const int seeds = 10000;
            for (int s = 0; s < seeds; ++s) total += sipp_rand(in.group, in.table, m, s, unit_c()).unique_kept;
            CHECK(total / seeds >= m - 0.5);
        }
    }
}

TEST_CASE("hybrid selection") {
    std::vector<double> w{0.5, 0.3, 0.2};
    ParameterGroup g{0, 0, w, std::nullopt};
    SensitivityTable t(0, 0, {0.9, 0.05, 0.05}, w);
    BoundParams p;
    auto full = sipp_hybrid(g, t, 3, 1, p);
    CHECK(full.used == Strategy::Det);
    CHECK(full.weights == w);
    CHECK(full.certificate == 0.0);

    auto one = sipp_hybrid(g, t, 1, 1, p);
    const double ed = 0.1 * p.c;
    const double er = rand_certificate(t.total(), expected_draws(sampling_probabilities(t), 1), p);
    CHECK(one.eps_det == doctest::Approx(ed));
    CHECK(one.eps_rand == doctest::Approx(er));
    CHECK(one.certificate == std::min(one.eps_det, one.eps_rand));

    std::mt19937_64 rng(79);
    for (int trial = 0; trial < 10; ++trial) {
        auto in = nonneg_instance(rng, 12, 2, 3);
        for (std::size_t m = 1; m <= 12; ++m) {
            auto h = sipp_hybrid(in.group, in.table, m, 3, p);
            CHECK(h.certificate <= det_certificate(in.table, m, p.c));
            CHECK(h.certificate <= rand_certificate(in.table.total(),
                                                    expected_draws(sampling_probabilities(in.table),
                                                                   std::min(m, in.table.positive_count())),
                                                    p));
        }
    }
}

TEST_CASE("certificates are monotone in the budget") {
    std::mt19937_64 rng(83);
    auto in = nonneg_instance(rng, 15, 2, 4);
    double prev = 1e300;
    for (std::size_t m = 0; m <= 15; ++m) {
        const double e = det_certificate(in.table, m, 2.0);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("emptied group") {
    std::vector<double> w{0.5, 0.3};
    ParameterGroup g{0, 0, w, std::nullopt};
    SensitivityTable t(0, 0, {0.6, 0.4}, w);
    auto pg = sparsify(g, t, 0, Strategy::Hybrid, 1, unit_c());
    CHECK(pg.weights == std::vector<double>{0.0, 0.0});
    CHECK(pg.certificate == doctest::Approx(1.0));
    CHECK(to_string(Strategy::Hybrid) == "hybrid");
}
