#include "sipp/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sipp {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Identity: return "identity";
        case Activation::Softmax: return "softmax";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "identity" || name == "linear") return Activation::Identity;
    if (name == "softmax") return Activation::Softmax;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t LayerSpec::group_count() const {
    return std::visit([](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DenseShape>) return k.out_features;
        else return k.out_channels;
    }, kind);
}

std::size_t LayerSpec::group_size() const {
    return std::visit([](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DenseShape>) return k.in_features;
        else return k.in_channels * k.kernel_h * k.kernel_w;
    }, kind);
}

Shape LayerSpec::weight_shape() const {
    return std::visit([](const auto& k) -> Shape {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, DenseShape>) return {k.out_features, k.in_features};
        else return {k.out_channels, k.in_channels, k.kernel_h, k.kernel_w};
    }, kind);
}

namespace {

Shape conv_output_shape(const Conv2dShape& c, const Shape& in) {
    const std::size_t h = in[1] + 2 * c.padding;
    const std::size_t w = in[2] + 2 * c.padding;
    if (h < c.kernel_h || w < c.kernel_w) {
        throw std::invalid_argument("conv kernel larger than padded input " + shape_to_string(in));
    }
    return {c.out_channels, (h - c.kernel_h) / c.stride + 1, (w - c.kernel_w) / c.stride + 1};
}

}  // namespace

Network::Network(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    if (input_shape_.empty() || shape_volume(input_shape_) == 0) {
        throw std::invalid_argument("network input shape must be nonempty with positive extents");
    }
    if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");

    Shape current = input_shape_;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const std::string where = "layer " + std::to_string(l) + ": ";
        if (layer.group_count() == 0 || layer.group_size() == 0) {
            throw std::invalid_argument(where + "zero-sized layer");
        }
        if (layer.weights.shape() != layer.weight_shape()) {
            throw std::invalid_argument(where + "weight shape " + shape_to_string(layer.weights.shape()) +
                                        " inconsistent with kind " + shape_to_string(layer.weight_shape()));
        }
        if (layer.bias && layer.bias->size() != layer.group_count()) {
            throw std::invalid_argument(where + "bias length must equal the number of output units");
        }
        if (layer.activation == Activation::Softmax && l + 1 != layers_.size()) {
            throw std::invalid_argument(where + "softmax is only allowed on the final layer");
        }

        Shape out;
        if (const auto* d = std::get_if<DenseShape>(&layer.kind)) {
            if (shape_volume(current) != d->in_features) {
                throw std::invalid_argument(where + "expects " + std::to_string(d->in_features) +
                                            " inputs, previous output is " + shape_to_string(current));
            }
            out = {d->out_features};
        } else {
            const auto& c = std::get<Conv2dShape>(layer.kind);
            if (c.stride == 0) throw std::invalid_argument(where + "stride must be positive");
            if (current.size() != 3 || current[0] != c.in_channels) {
                throw std::invalid_argument(where + "conv expects (" + std::to_string(c.in_channels) +
                                            ", H, W) input, got " + shape_to_string(current));
            }
            out = conv_output_shape(c, current);
        }
        in_shapes_.push_back(current);
        out_shapes_.push_back(out);
        current = out;
    }
}

std::size_t Network::patches_per_group(std::size_t l) const {
    const auto& out = layer_output_shape(l);
    return layer(l).is_conv() ? out[1] * out[2] : 1;
}

std::size_t Network::layer_patch_count(std::size_t l) const {
    return group_count(l) * patches_per_group(l);
}

std::size_t Network::total_patch_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < num_layers(); ++l) n += layer_patch_count(l);
    return n;
}

std::size_t Network::max_group_size() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n = std::max(n, layer.group_size());
    return n;
}

std::size_t Network::prunable_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size();
    return n;
}

std::span<const double> Network::group_weights(std::size_t l, std::size_t i) const {
    const auto& layer = layers_.at(l);
    if (i >= layer.group_count()) throw std::out_of_range("group index out of range");
    const auto gs = layer.group_size();
    return layer.weights.data().subspan(i * gs, gs);
}

ParameterGroup Network::group(std::size_t l, std::size_t i) const {
    auto w = group_weights(l, i);
    ParameterGroup g;
    g.layer = l;
    g.index = i;
    g.weights.assign(w.begin(), w.end());
    if (layers_[l].bias) g.bias = (*layers_[l].bias)[i];
    return g;
}

void Network::set_group_weights(std::size_t l, std::size_t i, std::span<const double> w) {
    auto& layer = layers_.at(l);
    if (i >= layer.group_count()) throw std::out_of_range("group index out of range");
    const auto gs = layer.group_size();
    if (w.size() != gs) throw std::invalid_argument("group weight vector has wrong length");
    for (double v : w) {
        if (!std::isfinite(v)) throw std::invalid_argument("group weights must be finite");
    }
    std::copy(w.begin(), w.end(), layer.weights.data().begin() + static_cast<std::ptrdiff_t>(i * gs));
}

PatchMatrix extract_patches(const Network& net, std::size_t l, std::span<const double> input) {
    if (l >= net.num_layers()) throw std::out_of_range("layer index out of range");
    const auto& in_shape = net.layer_input_shape(l);
    if (input.size() != shape_volume(in_shape)) {
        throw std::invalid_argument("layer input has " + std::to_string(input.size()) + " values, expected " +
                                    shape_to_string(in_shape));
    }
    const auto& layer = net.layer(l);
    PatchMatrix pm;
    pm.cols = layer.group_size();
    if (!layer.is_conv()) {
        pm.rows = 1;
        pm.data.assign(input.begin(), input.end());
        return pm;
    }

    const auto& c = std::get<Conv2dShape>(layer.kind);
    const auto& out = net.layer_output_shape(l);
    const std::size_t in_h = in_shape[1], in_w = in_shape[2];
    const std::size_t out_h = out[1], out_w = out[2];
    pm.rows = out_h * out_w;
    pm.data.assign(pm.rows * pm.cols, 0.0);

    const auto pad = static_cast<std::ptrdiff_t>(c.padding);
    for (std::size_t oh = 0; oh < out_h; ++oh) {
        for (std::size_t ow = 0; ow < out_w; ++ow) {
            double* dst = pm.data.data() + (oh * out_w + ow) * pm.cols;
            for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
                const double* plane = input.data() + ch * in_h * in_w;
                for (std::size_t r = 0; r < c.kernel_h; ++r) {
                    const auto y = static_cast<std::ptrdiff_t>(oh * c.stride + r) - pad;
                    for (std::size_t t = 0; t < c.kernel_w; ++t, ++dst) {
                        const auto x = static_cast<std::ptrdiff_t>(ow * c.stride + t) - pad;
                        if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(in_h) ||
                            x >= static_cast<std::ptrdiff_t>(in_w)) {
                            continue;
                        }
                        *dst = plane[static_cast<std::size_t>(y) * in_w + static_cast<std::size_t>(x)];
                    }
                }
            }
        }
    }
    return pm;
}

PatchMatrix extract_patches(const Network& net, std::size_t l, std::size_t group, std::span<const double> input) {
    if (l >= net.num_layers()) throw std::out_of_range("layer index out of range");
    if (group >= net.group_count(l)) throw std::out_of_range("group index out of range");
    return extract_patches(net, l, input);
}

namespace {

void linear_from_patches(const PatchMatrix& pm, std::span<const double> weights, std::size_t groups,
                         std::span<double> out) {
    const auto gs = pm.cols;
    for (std::size_t i = 0; i < groups; ++i) {
        const double* w = weights.data() + i * gs;
        for (std::size_t p = 0; p < pm.rows; ++p) {
            const double* a = pm.data.data() + p * gs;
            double acc = 0.0;
            for (std::size_t k = 0; k < gs; ++k) acc += w[k] * a[k];
            out[i * pm.rows + p] = acc;
        }
    }
}

}  // namespace

std::vector<double> apply_linear(const Network& net, std::size_t l, std::span<const double> weights,
                                 std::span<const double> input) {
    const auto& layer = net.layer(l);
    if (weights.size() != layer.weights.size()) throw std::invalid_argument("weight override has wrong length");
    const auto pm = extract_patches(net, l, input);
    std::vector<double> out(net.layer_patch_count(l));
    linear_from_patches(pm, weights, layer.group_count(), out);
    return out;
}

void apply_activation(Activation a, std::span<double> v) {
    switch (a) {
        case Activation::Identity:
            return;
        case Activation::ReLU:
            for (auto& x : v) x = x > 0.0 ? x : 0.0;
            return;
        case Activation::Softmax: {
            if (v.empty()) return;
            const double m = *std::max_element(v.begin(), v.end());
            double sum = 0.0;
            for (auto& x : v) {
                x = std::exp(x - m);
                sum += x;
            }
            for (auto& x : v) x /= sum;
            return;
        }
    }
}

ForwardTrace forward(const Network& net, const Tensor& batch) {
    if (batch.rank() < 2 || batch.trailing_shape() != net.input_shape()) {
        throw std::invalid_argument("batch shape " + shape_to_string(batch.shape()) +
                                    " does not match network input " + shape_to_string(net.input_shape()) +
                                    " with a leading batch dimension");
    }
    const std::size_t n = batch.shape()[0];
    ForwardTrace trace;
    trace.post.push_back(batch);
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
        const auto& layer = net.layer(l);
        Shape out_shape{n};
        const auto& per = net.layer_output_shape(l);
        out_shape.insert(out_shape.end(), per.begin(), per.end());
        Tensor z(out_shape);
        const Tensor& prev = trace.post.back();
        const std::size_t ppg = net.patches_per_group(l);
        for (std::size_t b = 0; b < n; ++b) {
            const auto pm = extract_patches(net, l, prev.slice(b));
            auto zb = z.slice(b);
            linear_from_patches(pm, layer.weights.data(), layer.group_count(), zb);
            if (layer.bias) {
                for (std::size_t i = 0; i < layer.group_count(); ++i) {
                    for (std::size_t p = 0; p < ppg; ++p) zb[i * ppg + p] += (*layer.bias)[i];
                }
            }
        }
        Tensor a = z;
        for (std::size_t b = 0; b < n; ++b) apply_activation(layer.activation, a.slice(b));
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
    }
    return trace;
}

Tensor predict(const Network& net, const Tensor& batch) {
    auto trace = forward(net, batch);
    return std::move(trace.post.back());
}

}  // namespace sipp
