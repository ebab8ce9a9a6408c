#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "json.hpp"
#include "oracles.hpp"
#include "sipp/io.hpp"

using namespace sipp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sipp_io_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

Network sample_net() {
    std::mt19937_64 rng(41);
    LayerSpec c;
    c.kind = Conv2dShape{2, 1, 2, 2, 2, 1};
    c.activation = Activation::ReLU;
    c.weights = Tensor({2, 1, 2, 2}, oracle::uniform_vec(rng, 8, -1, 1));
    c.bias = Tensor({2}, {0.25, -0.5});
    LayerSpec d;
    d.kind = DenseShape{3, 18};
    d.activation = Activation::Softmax;
    d.weights = Tensor({3, 18}, oracle::uniform_vec(rng, 54, -1, 1));
    d.weights[4] = 0.0;
    return Network({1, 4, 4}, {c, d});
}

}  // namespace

TEST_CASE("model bundle round trip is bitwise") {
    auto dir = scratch("model");
    auto net = sample_net();
    save_model(dir, net);
    auto back = load_model(dir);
    CHECK(back == net);
    CHECK(fs::file_size(dir / kWeightsName) == (8 + 2 + 54) * 8);

    auto manifest = nlohmann::json::parse(slurp(dir / kManifestName));
    CHECK(manifest["nnz"] == 61);
    CHECK(manifest["prunable_weights"] == 62);
    CHECK(manifest["layers"][0]["stride"] == 2);
    CHECK(manifest["layers"][0]["padding"] == 1);
    CHECK(count_nonzero_weights(net) == 61);

    auto dir2 = scratch("model2");
    save_model(dir2, back);
    CHECK(slurp(dir / kWeightsName) == slurp(dir2 / kWeightsName));
    CHECK(slurp(dir / kManifestName) == slurp(dir2 / kManifestName));
}

TEST_CASE("tensor file round trip and layout") {
    auto p = scratch("t.bin");
    Tensor t({2, 3}, {1.5, -2.0, 0.0, 1e-300, 3.25, -7.0});
    write_tensor_file(p, t);
    CHECK(read_tensor_file(p) == t);
    auto bytes = slurp(p);
    CHECK(bytes.size() == 4 + 4 + 4 + 2 * 8 + 6 * 8);
    CHECK(bytes.substr(0, 4) == "SIPT");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[8]) == 2);
    CHECK(static_cast<unsigned char>(bytes[12]) == 2);
    CHECK(static_cast<unsigned char>(bytes[20]) == 3);
}

TEST_CASE("format violations are rejected") {
    auto p = scratch("bad.bin");
    spit(p, "NOPE");
    CHECK_THROWS_AS(read_tensor_file(p), std::runtime_error);

    Tensor t({1, 2}, {1.0, 2.0});
    write_tensor_file(p, t);
    auto bytes = slurp(p);
    spit(p, bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_tensor_file(p), std::runtime_error);
    auto v2 = bytes;
    v2[4] = 2;
    spit(p, v2);
    CHECK_THROWS_AS(read_tensor_file(p), std::runtime_error);
    CHECK_THROWS_AS(read_tensor_file(scratch("missing.bin")), std::runtime_error);

    auto dir = scratch("badmodel");
    save_model(dir, sample_net());
    auto w = slurp(dir / kWeightsName);
    spit(dir / kWeightsName, w.substr(8));
    CHECK_THROWS_AS(load_model(dir), std::runtime_error);
    spit(dir / kWeightsName, w);
    spit(dir / kManifestName, "{not json");
    CHECK_THROWS_AS(load_model(dir), std::runtime_error);
    auto m = nlohmann::json::parse(slurp(scratch("x").parent_path() / "sipp_io_model" / kManifestName));
    m["layers"][1]["in_features"] = 17;
    spit(dir / kManifestName, m.dump());
    CHECK_THROWS_AS(load_model(dir), std::runtime_error);
}
