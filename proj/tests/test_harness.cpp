#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"
#include "sipp/harness.hpp"
#include "sipp/io.hpp"

using namespace sipp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sipp_harness_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

SensitivityContext small_context(std::uint64_t seed, InitKind init = InitKind::UniformNonneg) {
    auto net = gen_model({8}, "dense:10:relu,dense:6:relu,dense:4:identity", init, seed);
    auto val = gen_data({8}, InitKind::UniformNonneg, 100, seed + 1);
    BoundParams p;
    return prepare_sensitivity(net, val, p, seed);
}

}  // namespace

TEST_CASE("parsers") {
    CHECK(parse_shape("1x8x8") == Shape{1, 8, 8});
    CHECK(parse_shape("16") == Shape{16});
    CHECK_THROWS_AS(parse_shape("0x3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_shape("a"), std::invalid_argument);
    CHECK(parse_run_strategy("wt") == RunStrategy::Wt);
    CHECK(to_string(RunStrategy::Simple) == "simple");
    CHECK_THROWS_AS(parse_run_strategy("snip"), std::invalid_argument);
    CHECK(parse_init("gaussian") == InitKind::Gaussian);
}

TEST_CASE("model generation") {
    auto a = gen_model({4}, "dense:4:relu,dense:2:identity", InitKind::UniformNonneg, 7);
    auto b = gen_model({4}, "dense:4:relu,dense:2:identity", InitKind::UniformNonneg, 7);
    auto da = scratch("gen_a"), db = scratch("gen_b");
    save_model(da, a);
    save_model(db, b);
    CHECK(slurp(da / kWeightsName) == slurp(db / kWeightsName));
    CHECK(slurp(da / kManifestName) == slurp(db / kManifestName));
    for (const auto& l : a.layers())
        for (double w : l.weights.values()) {
            CHECK(w >= 0.0);
            CHECK(w <= 1.0);
        }

    auto conv = gen_model({1, 8, 8}, "conv:4:3:3:1:1:relu,conv:2:2:2:2:relu,dense:5:softmax", InitKind::Gaussian, 3, true);
    CHECK(conv.num_layers() == 3);
    CHECK(conv.layer_output_shape(1) == Shape{2, 4, 4});
    CHECK(conv.layer(0).bias.has_value());
    CHECK_THROWS_AS(gen_model({4}, "conv:2:3:3:relu", InitKind::Gaussian, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_model({4}, "dense:2", InitKind::Gaussian, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_model({4}, "pool:2:relu", InitKind::Gaussian, 1), std::invalid_argument);

    auto g = gen_model({1000}, "dense:10:identity", InitKind::Gaussian, 11);
    const auto& w = g.layer(0).weights.values();
    double mean = 0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(w.size());
    const double sigma = std::sqrt(1.0 / 1000.0);
    CHECK(std::abs(mean) <= 5.0 * sigma / 100.0);
}

TEST_CASE("data generation") {
    CHECK_THROWS_AS(gen_data({3}, InitKind::UniformNonneg, 0, 1), std::invalid_argument);
    auto d = gen_data({2, 3}, InitKind::UniformNonneg, 50, 5);
    CHECK(d.shape() == Shape{50, 2, 3});
    for (double v : d.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    auto pa = scratch("d1.bin"), pb = scratch("d2.bin");
    write_tensor_file(pa, gen_data({4}, InitKind::Gaussian, 20, 9));
    write_tensor_file(pb, gen_data({4}, InitKind::Gaussian, 20, 9));
    CHECK(slurp(pa) == slurp(pb));
    CHECK(gen_data({4}, InitKind::Gaussian, 20, 9) != gen_data({4}, InitKind::Gaussian, 20, 10));
}

TEST_CASE("budget resolution") {
    CHECK(resolve_budget(std::nullopt, 0.0, 640) == 640);
    CHECK(resolve_budget(std::nullopt, 0.5, 640) == 320);
    CHECK(resolve_budget(std::nullopt, 0.25, 10) == 8);  // round(7.5)
    CHECK(resolve_budget(100, std::nullopt, 640) == 100);
    CHECK(resolve_budget(1000, std::nullopt, 640) == 640);
    CHECK_THROWS_AS(resolve_budget(10, 0.5, 640), std::invalid_argument);
    CHECK_THROWS_AS(resolve_budget(std::nullopt, std::nullopt, 640), std::invalid_argument);
    CHECK_THROWS_AS(resolve_budget(std::nullopt, 1.0, 640), std::invalid_argument);
}

TEST_CASE("magnitude baseline keeps the globally largest weights") {
    auto ctx = small_context(21, InitKind::Gaussian);
    const std::size_t budget = 50;
    auto res = prune_with(ctx, RunStrategy::Wt, budget, 1);
    std::vector<std::pair<double, std::size_t>> all;  // (|w|, flat position)
    std::size_t flat = 0;
    for (const auto& l : ctx.net.layers())
        for (double w : l.weights.values()) all.push_back({std::abs(w), flat++});
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<char> expect(flat, 0);
    for (std::size_t r = 0; r < budget; ++r) expect[all[r].second] = 1;
    flat = 0;
    for (const auto& l : res.pruned.layers())
        for (double w : l.weights.values()) CHECK((w != 0.0) == static_cast<bool>(expect[flat++]));
    CHECK(res.kept == budget);
}

TEST_CASE("keeping everything reproduces the model") {
    auto ctx = small_context(31);
    auto test = gen_data({8}, InitKind::UniformNonneg, 50, 99);
    for (auto s : {RunStrategy::Det, RunStrategy::Hybrid, RunStrategy::Simple, RunStrategy::Wt}) {
        auto res = prune_with(ctx, s, ctx.net.prunable_count(), 4);
        CHECK(res.pruned == ctx.net);
        auto st = evaluate_errors(ctx.net, res.pruned, test, res.certificate.network_eps);
        CHECK(st.max == 0.0);
        CHECK(res.certificate.network_eps == 0.0);
        CHECK(*st.coverage == 1.0);
    }
}

TEST_CASE("prune run writes its artifacts") {
    auto dir = scratch("run");
    fs::create_directories(dir);
    save_model(dir / "model", gen_model({8}, "dense:10:relu,dense:4:identity", InitKind::UniformNonneg, 5));
    write_tensor_file(dir / "val.bin", gen_data({8}, InitKind::UniformNonneg, 60, 6));
    write_tensor_file(dir / "test.bin", gen_data({8}, InitKind::UniformNonneg, 40, 7));
    RunConfig cfg;
    cfg.model = dir / "model";
    cfg.data = dir / "val.bin";
    cfg.test_data = dir / "test.bin";
    cfg.strategy = RunStrategy::Hybrid;
    cfg.ratio = 0.4;
    cfg.out = dir / "out";
    cfg.export_sensitivity = true;
    auto rep = prune_run(cfg);
    for (const char* f : {"model.json", "weights.bin", "report.json", "certificate.json", "plan.csv", "sensitivity.csv"})
        CHECK(fs::exists(cfg.out / f));
    auto pruned = load_model(cfg.out);
    CHECK(count_nonzero_weights(pruned) == rep.kept);
    CHECK(rep.kept <= rep.total);
    CHECK(*rep.empirical->coverage >= 0.0);
    CHECK(*rep.empirical->coverage <= 1.0);
    auto j = nlohmann::json::parse(slurp(cfg.out / "report.json"));
    CHECK(j["budget"] == 72);
    auto plan = parse_csv(slurp(cfg.out / "plan.csv"));
    CHECK(plan[0] == std::vector<std::string>{"layer", "group", "allocated_m", "group_error"});
    CHECK(plan.size() == 1 + 14);
    auto sens = parse_csv(slurp(cfg.out / "sensitivity.csv"));
    CHECK(sens.size() == 1 + 120);

    cfg.ratio.reset();
    cfg.budget = 1;
    CHECK_THROWS_AS(prune_run(cfg), std::invalid_argument);
}

TEST_CASE("error statistics") {
    auto ctx = small_context(41);
    auto test = gen_data({8}, InitKind::UniformNonneg, 101, 3);
    auto res = prune_with(ctx, RunStrategy::Det, 60, 0);
    auto st = evaluate_errors(ctx.net, res.pruned, test, 0.5);
    auto sorted = st.errors;
    std::sort(sorted.begin(), sorted.end());
    CHECK(st.count == 101);
    CHECK(st.max == sorted.back());
    CHECK(st.p50 == sorted[50]);
    CHECK(st.p90 == sorted[90]);
    CHECK(st.p99 == sorted[99]);
    const auto hits = std::count_if(sorted.begin(), sorted.end(), [](double e) { return e <= 0.5; });
    CHECK(*st.coverage == static_cast<double>(hits) / 101.0);
}

TEST_CASE("sweep") {
    auto ctx = small_context(51);
    auto test = gen_data({8}, InitKind::UniformNonneg, 40, 52);
    auto zero = sweep(ctx, test, {0.0}, {RunStrategy::Det}, 1);
    REQUIRE(zero.size() == 1);
    CHECK(zero[0].kept == zero[0].total);
    CHECK(zero[0].certificate_eps == 0.0);
    CHECK(zero[0].max_rel_err == 0.0);

    const std::vector<double> ratios{0.0, 0.1, 0.3, 0.5, 0.6, 0.7, 0.8};
    auto rows = sweep(ctx, test, ratios, {RunStrategy::Det, RunStrategy::Wt}, 1);
    REQUIRE(rows.size() == 14);
    for (std::size_t i = 1; i < ratios.size(); ++i) CHECK(rows[i].certificate_eps >= rows[i - 1].certificate_eps);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.certificate_eps));
        CHECK(std::isfinite(r.max_rel_err));
    }
    auto csv = parse_csv(sweep_csv(rows));
    CHECK(csv.size() == 15);
    CHECK(csv[0].size() == 9);
    CHECK(csv[8][1] == "wt");
}

TEST_CASE("sweep up to ninety percent on a wider model") {
    auto net = gen_model({32}, "dense:16:relu,dense:8:identity", InitKind::UniformNonneg, 61);
    BoundParams p;
    auto ctx = prepare_sensitivity(net, gen_data({32}, InitKind::UniformNonneg, 80, 62), p, 61);
    auto rows = sweep(ctx, gen_data({32}, InitKind::UniformNonneg, 40, 63), {0.5, 0.9},
                      {RunStrategy::Det, RunStrategy::Wt}, 1);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.certificate_eps));
        CHECK(std::isfinite(r.mean_rel_err));
        CHECK(std::isfinite(r.max_rel_err));
    }
}
