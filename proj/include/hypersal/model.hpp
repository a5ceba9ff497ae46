#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hypersal/autodiff.hpp"
#include "hypersal/nn_ops.hpp"
#include "hypersal/ops_core.hpp"
#include "hypersal/tensor.hpp"

namespace hypersal {

/// Fixed architecture: two 3D convolution + max-pool stages feeding two dense
/// layers and a 2-way softmax. Only the input shape is configurable.
namespace arch {
inline constexpr std::size_t kConv1Channels = 2;
inline constexpr std::size_t kConv2Channels = 4;
inline constexpr std::size_t kKernelSpatial = 3;
inline constexpr std::size_t kKernelSpectral = 16;
inline constexpr std::size_t kDense1Nodes = 16;
inline constexpr std::size_t kNumClasses = 2;
inline constexpr double kConv1DropoutRate = 0.25;
inline constexpr double kDense1DropoutRate = 0.5;
inline constexpr Real kConvInitStddev = 0.05;
}  // namespace arch

struct LayerShape {
    std::string name;
    Shape shape;
};

/// Walks the layer chain for a [1,H,W,B] input under valid convolution and
/// floor pooling, throwing a ShapeError that names the first layer whose
/// input is too small.
inline std::vector<LayerShape> infer_shapes(const Shape& input_shape) {
    if (input_shape.size() != 4 || input_shape[0] != 1) {
        throw ShapeError("infer_shapes: expected input shape [1,H,W,B], got " +
                         shape_str(input_shape));
    }
    std::vector<LayerShape> chain;
    chain.push_back({"input", input_shape});

    auto conv = [&](const char* name, const Shape& in, std::size_t channels) -> Shape {
        const std::size_t ks = arch::kKernelSpatial, kb = arch::kKernelSpectral;
        if (in[1] < ks || in[2] < ks || in[3] < kb) {
            throw ShapeError(std::string(name) + ": kernel " + shape_str({ks, ks, kb}) +
                             " exceeds layer input " + shape_str(in));
        }
        return Shape{channels, in[1] - ks + 1, in[2] - ks + 1, in[3] - kb + 1};
    };
    auto pool = [&](const char* name, const Shape& in) -> Shape {
        if (in[1] < 2 || in[2] < 2 || in[3] < 2) {
            throw ShapeError(std::string(name) + ": needs extent >= 2 on every pooled axis, got " +
                             shape_str(in));
        }
        return Shape{in[0], in[1] / 2, in[2] / 2, in[3] / 2};
    };

    Shape s = conv("conv1", input_shape, arch::kConv1Channels);
    chain.push_back({"conv1", s});
    s = pool("pool1", s);
    chain.push_back({"pool1", s});
    s = conv("conv2", s, arch::kConv2Channels);
    chain.push_back({"conv2", s});
    s = pool("pool2", s);
    chain.push_back({"pool2", s});
    chain.push_back({"flatten", Shape{shape_numel(s)}});
    chain.push_back({"dense1", Shape{arch::kDense1Nodes}});
    chain.push_back({"dense2", Shape{arch::kNumClasses}});
    return chain;
}

/// Every learnable parameter of the network, built for one input shape.
struct ModelParams {
    Shape input_shape;
    Conv3dKernel conv1;
    Conv3dKernel conv2;
    Tensor dense1_weights, dense1_bias;
    Tensor dense2_weights, dense2_bias;

    /// Flattened extent between pool2 and dense1.
    std::size_t flatten_dim() const { return dense1_weights.shape()[1]; }

    /// Named views of every parameter tensor, in checkpoint order.
    std::vector<std::pair<std::string, Tensor>> parameters() const {
        return {{"conv1.weights", conv1.weights},   {"conv1.bias", conv1.bias},
                {"conv2.weights", conv2.weights},   {"conv2.bias", conv2.bias},
                {"dense1.weights", dense1_weights}, {"dense1.bias", dense1_bias},
                {"dense2.weights", dense2_weights}, {"dense2.bias", dense2_bias}};
    }

    /// Deep copy with gradients disabled, for read-only concurrent use.
    ModelParams detached_copy() const {
        ModelParams out;
        out.input_shape = input_shape;
        out.conv1 = {conv1.weights.detached(), conv1.bias.detached()};
        out.conv2 = {conv2.weights.detached(), conv2.bias.detached()};
        out.dense1_weights = dense1_weights.detached();
        out.dense1_bias = dense1_bias.detached();
        out.dense2_weights = dense2_weights.detached();
        out.dense2_bias = dense2_bias.detached();
        return out;
    }
};

/// Fresh parameters: convolution kernels ~ Normal(0, 0.05^2), dense weights
/// glorot-uniform, all biases zero. Draw order is fixed so a seed pins every
/// value.
inline ModelParams init_model(const Shape& input_shape, std::uint64_t seed) {
    const auto chain = infer_shapes(input_shape);
    const std::size_t flatten = chain[5].shape[0];
    std::mt19937_64 rng(seed);

    ModelParams p;
    p.input_shape = input_shape;
    const std::size_t ks = arch::kKernelSpatial, kb = arch::kKernelSpectral;
    p.conv1.weights = init_normal(Shape{arch::kConv1Channels, 1, ks, ks, kb},
                                  arch::kConvInitStddev, rng);
    p.conv1.bias = Tensor::zeros(Shape{arch::kConv1Channels});
    p.conv2.weights = init_normal(
        Shape{arch::kConv2Channels, arch::kConv1Channels, ks, ks, kb}, arch::kConvInitStddev, rng);
    p.conv2.bias = Tensor::zeros(Shape{arch::kConv2Channels});
    p.dense1_weights = init_glorot_uniform(flatten, arch::kDense1Nodes, rng);
    p.dense1_bias = Tensor::zeros(Shape{arch::kDense1Nodes});
    p.dense2_weights = init_glorot_uniform(arch::kDense1Nodes, arch::kNumClasses, rng);
    p.dense2_bias = Tensor::zeros(Shape{arch::kNumClasses});

    for (auto& [name, t] : p.parameters()) t.set_requires_grad(true);
    return p;
}

inline std::size_t count_params(const ModelParams& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params.parameters()) n += t.size();
    return n;
}

struct ForwardResult {
    Tensor logits;  // pre-softmax scores, shape [2]
    Tensor probs;   // softmax probabilities, shape [2]
    std::vector<LayerShape> layer_shapes;
};

/// Runs the full layer chain on one [1,H,W,B] patch. Dropout is active in
/// train mode only; eval mode is a deterministic pure function of
/// (params, patch).
inline ForwardResult forward(Tape& tape, const ModelParams& params, const Tensor& patch,
                             ForwardMode mode, std::mt19937_64& rng) {
    if (patch.shape() != params.input_shape) {
        throw ShapeError("forward: patch shape " + shape_str(patch.shape()) +
                         " does not match model input " + shape_str(params.input_shape));
    }

    ForwardResult r;
    auto track = [&r](const char* name, const Tensor& t) {
        r.layer_shapes.push_back({name, t.shape()});
    };
    track("input", patch);

    Tensor t = conv3d(tape, patch, params.conv1);
    track("conv1", t);
    t = relu(tape, t);
    t = maxpool3d(tape, t);
    track("pool1", t);
    t = dropout(tape, t, {arch::kConv1DropoutRate, mode}, rng);
    t = conv3d(tape, t, params.conv2);
    track("conv2", t);
    t = relu(tape, t);
    t = maxpool3d(tape, t);
    track("pool2", t);
    t = reshape(tape, t, Shape{t.size()});
    track("flatten", t);
    t = dense(tape, t, params.dense1_weights, params.dense1_bias);
    track("dense1", t);
    t = relu(tape, t);
    t = dropout(tape, t, {arch::kDense1DropoutRate, mode}, rng);
    r.logits = dense(tape, t, params.dense2_weights, params.dense2_bias);
    track("dense2", r.logits);
    r.probs = softmax(tape, r.logits);
    return r;
}

/// Class with the larger probability; logits and probabilities share the
/// same argmax because softmax is monotone.
inline ClassLabel predicted_class(const Tensor& probs) {
    return probs[1] > probs[0] ? ClassLabel::infected : ClassLabel::healthy;
}

}  // namespace hypersal
