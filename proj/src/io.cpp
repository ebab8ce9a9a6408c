#include "sipp/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "json.hpp"

namespace sipp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename U>
void put_le(std::string& buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

template <typename U>
U get_le(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(U) > buf.size()) throw std::runtime_error("unexpected end of file");
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += sizeof(U);
    return v;
}

void put_doubles(std::string& buf, std::span<const double> values) {
    for (double v : values) put_le(buf, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_doubles(const std::string& buf, std::size_t pos, std::size_t count) {
    if (pos > buf.size() || count > (buf.size() - pos) / 8) throw std::runtime_error("value block exceeds file size");
    std::vector<double> out(count);
    for (auto& v : out) v = std::bit_cast<double>(get_le<std::uint64_t>(buf, pos));
    return out;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void dump(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::size_t nonzero(std::span<const double> v) {
    std::size_t n = 0;
    for (double x : v) n += x != 0.0;
    return n;
}

std::size_t get_size(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_unsigned()) {
        throw std::runtime_error(std::string("manifest field '") + key + "' missing or not an unsigned integer");
    }
    return j[key].get<std::size_t>();
}

}  // namespace

std::size_t count_nonzero_weights(const Network& net) {
    std::size_t n = 0;
    for (const auto& layer : net.layers()) n += nonzero(layer.weights.data());
    return n;
}

void save_model(const fs::path& dir, const Network& net) {
    fs::create_directories(dir);
    std::string blob;
    json layers = json::array();
    for (const auto& layer : net.layers()) {
        json j;
        if (const auto* d = std::get_if<DenseShape>(&layer.kind)) {
            j["kind"] = "dense";
            j["out_features"] = d->out_features;
            j["in_features"] = d->in_features;
        } else {
            const auto& c = std::get<Conv2dShape>(layer.kind);
            j["kind"] = "conv2d";
            j["out_channels"] = c.out_channels;
            j["in_channels"] = c.in_channels;
            j["kernel_h"] = c.kernel_h;
            j["kernel_w"] = c.kernel_w;
            j["stride"] = c.stride;
            j["padding"] = c.padding;
        }
        j["activation"] = to_string(layer.activation);
        j["weight_offset"] = blob.size();
        j["weight_count"] = layer.weights.size();
        j["nnz"] = nonzero(layer.weights.data());
        put_doubles(blob, layer.weights.data());
        if (layer.bias) {
            j["bias_offset"] = blob.size();
            j["bias_count"] = layer.bias->size();
            put_doubles(blob, layer.bias->data());
        } else {
            j["bias_offset"] = nullptr;
            j["bias_count"] = 0;
        }
        layers.push_back(std::move(j));
    }

    json manifest;
    manifest["format"] = "sipp-model";
    manifest["version"] = 1;
    manifest["input_shape"] = net.input_shape();
    manifest["weights_file"] = kWeightsName;
    manifest["total_bytes"] = blob.size();
    manifest["prunable_weights"] = net.prunable_count();
    manifest["nnz"] = count_nonzero_weights(net);
    manifest["layers"] = std::move(layers);

    dump(dir / kWeightsName, blob);
    dump(dir / kManifestName, manifest.dump(2) + "\n");
}

Network load_model(const fs::path& dir) {
    json manifest;
    try {
        manifest = json::parse(slurp(dir / kManifestName));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "sipp-model" || manifest.value("version", 0) != 1) {
        throw std::runtime_error("unsupported model manifest format/version");
    }
    const std::string blob = slurp(dir / manifest.value("weights_file", std::string(kWeightsName)));
    if (manifest.contains("total_bytes") && get_size(manifest, "total_bytes") != blob.size()) {
        throw std::runtime_error("weights file size does not match manifest");
    }

    Shape input_shape = manifest.at("input_shape").get<Shape>();
    std::vector<LayerSpec> layers;
    for (const auto& j : manifest.at("layers")) {
        LayerSpec layer;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "dense") {
            layer.kind = DenseShape{get_size(j, "out_features"), get_size(j, "in_features")};
        } else if (kind == "conv2d") {
            layer.kind = Conv2dShape{get_size(j, "out_channels"), get_size(j, "in_channels"), get_size(j, "kernel_h"),
                                     get_size(j, "kernel_w"),     get_size(j, "stride"),      get_size(j, "padding")};
        } else {
            throw std::runtime_error("unknown layer kind '" + kind + "'");
        }
        layer.activation = parse_activation(j.at("activation").get<std::string>());

        const auto wshape = layer.weight_shape();
        if (get_size(j, "weight_count") != shape_volume(wshape)) {
            throw std::runtime_error("weight_count inconsistent with layer shape");
        }
        layer.weights = Tensor(wshape, get_doubles(blob, get_size(j, "weight_offset"), shape_volume(wshape)));
        if (j.contains("bias_offset") && !j["bias_offset"].is_null()) {
            const auto n = get_size(j, "bias_count");
            layer.bias = Tensor({n}, get_doubles(blob, get_size(j, "bias_offset"), n));
        }
        layers.push_back(std::move(layer));
    }
    try {
        return Network(std::move(input_shape), std::move(layers));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("invalid model: ") + e.what());
    }
}

void write_tensor_file(const fs::path& path, const Tensor& t) {
    std::string buf = "SIPT";
    put_le<std::uint32_t>(buf, kTensorFileVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put_le<std::uint64_t>(buf, e);
    put_doubles(buf, t.data());
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    dump(path, buf);
}

Tensor read_tensor_file(const fs::path& path) {
    const std::string buf = slurp(path);
    if (buf.size() < 12 || buf.compare(0, 4, "SIPT") != 0) throw std::runtime_error("bad tensor file magic in " + path.string());
    std::size_t pos = 4;
    const auto version = get_le<std::uint32_t>(buf, pos);
    if (version != kTensorFileVersion) throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
    const auto rank = get_le<std::uint32_t>(buf, pos);
    if (rank == 0) throw std::runtime_error("tensor file rank must be positive");
    Shape shape(rank);
    for (auto& e : shape) e = get_le<std::uint64_t>(buf, pos);
    for (auto e : shape) {
        if (e == 0) throw std::runtime_error("tensor file has a zero extent");
    }
    const auto count = shape_volume(shape);
    if (buf.size() - pos != count * 8) throw std::runtime_error("tensor file payload size mismatch");
    return Tensor(std::move(shape), get_doubles(buf, pos, count));
}

}  // namespace sipp
