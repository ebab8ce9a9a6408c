#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sipp/tensor.hpp"

namespace sipp {

struct DenseShape {
    std::size_t out_features = 0;
    std::size_t in_features = 0;
    bool operator==(const DenseShape&) const = default;
};

struct Conv2dShape {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;  // zero padding on every side
    bool operator==(const Conv2dShape&) const = default;
};

using LayerKind = std::variant<DenseShape, Conv2dShape>;

// Only 1-Lipschitz activations are representable.
enum class Activation { ReLU, Identity, Softmax };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

struct LayerSpec {
    LayerKind kind;
    Activation activation = Activation::Identity;
    Tensor weights;              // (out, in) or (out, in, kh, kw)
    std::optional<Tensor> bias;  // (out) when present; never pruned

    std::size_t group_count() const;
    std::size_t group_size() const;
    Shape weight_shape() const;
    bool is_conv() const { return std::holds_alternative<Conv2dShape>(kind); }

    bool operator==(const LayerSpec&) const = default;
};

/// One independently prunable block: a dense row or a conv filter.
struct ParameterGroup {
    std::size_t layer = 0;
    std::size_t index = 0;
    std::vector<double> weights;
    std::optional<double> bias;
};

/// Row-major matrix of input patches. Row p is aligned index-for-index with
/// a group's weight vector, so dot(weights, row(p)) is output scalar p of
/// that group (bias excluded).
struct PatchMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    std::span<const double> row(std::size_t p) const {
        return std::span<const double>(data).subspan(p * cols, cols);
    }
};

/// Sequential chain of dense / conv2d layers.
class Network {
public:
    Network() = default;
    Network(Shape input_shape, std::vector<LayerSpec> layers);

    std::size_t num_layers() const { return layers_.size(); }
    const LayerSpec& layer(std::size_t l) const { return layers_.at(l); }
    const std::vector<LayerSpec>& layers() const { return layers_; }

    const Shape& input_shape() const { return input_shape_; }
    /// Per-sample input/output shape of layer l.
    const Shape& layer_input_shape(std::size_t l) const { return in_shapes_.at(l); }
    const Shape& layer_output_shape(std::size_t l) const { return out_shapes_.at(l); }

    std::size_t group_count(std::size_t l) const { return layer(l).group_count(); }
    std::size_t group_size(std::size_t l) const { return layer(l).group_size(); }
    /// Number of patches each group of layer l is applied to.
    std::size_t patches_per_group(std::size_t l) const;
    /// Output scalars of layer l (groups times patches).
    std::size_t layer_patch_count(std::size_t l) const;
    /// Output scalars summed over all layers.
    std::size_t total_patch_count() const;
    /// Largest group size over all layers.
    std::size_t max_group_size() const;
    /// Weights eligible for pruning (biases excluded).
    std::size_t prunable_count() const;

    ParameterGroup group(std::size_t l, std::size_t i) const;
    std::span<const double> group_weights(std::size_t l, std::size_t i) const;
    void set_group_weights(std::size_t l, std::size_t i, std::span<const double> w);

    bool operator==(const Network&) const = default;

private:
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Shape> in_shapes_;
    std::vector<Shape> out_shapes_;
};

/// Pre-activations Z^l and activations A^l for every layer over a batch.
/// post[0] is the input batch; pre[l] / post[l + 1] belong to layer l.
struct ForwardTrace {
    std::vector<Tensor> pre;
    std::vector<Tensor> post;

    std::size_t batch_size() const { return post.empty() ? 0 : post.front().shape()[0]; }
    const Tensor& output() const { return post.back(); }
};

ForwardTrace forward(const Network& net, const Tensor& batch);

/// Network output for a batch (last activation only).
Tensor predict(const Network& net, const Tensor& batch);

/// Unfold one sample's layer input into the patch matrix of layer l.
/// All groups of a layer share the same patches; `group` is range-checked.
PatchMatrix extract_patches(const Network& net, std::size_t l, std::size_t group, std::span<const double> layer_input);
PatchMatrix extract_patches(const Network& net, std::size_t l, std::span<const double> layer_input);

/// Bias-free linear map of layer l applied to one sample, using the given
/// weights in place of the layer's own (same shape).
std::vector<double> apply_linear(const Network& net, std::size_t l, std::span<const double> weights,
                                 std::span<const double> layer_input);

void apply_activation(Activation a, std::span<double> values);

}  // namespace sipp
