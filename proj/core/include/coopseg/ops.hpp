#pragma once

#include <span>

#include "coopseg/config.hpp"
#include "coopseg/graph.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

// Differentiable ops. Every op validates shapes, rejects non-finite results,
// and records a backward node on `g` when any input requires a gradient.

/// Cross-correlation. input [N,Cin,H,W], weight [Cout,Cin,Kh,Kw], bias [Cout].
Tensor conv2d(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int padding);

/// max(x, 0); the subgradient at 0 is 0.
Tensor relu(Graph& g, const Tensor& input);

/// Non-overlapping k x k max pooling. Ties go to the first element in
/// row-major scan order, both forward and backward.
Tensor max_pool2d(Graph& g, const Tensor& input, int k);

/// Bilinear resize with half-pixel centres:
///   src = (dst + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor upsample_bilinear(Graph& g, const Tensor& input, int out_h, int out_w);

/// Stacks b's channels after a's. Either side may have zero channels.
Tensor concat_channels(Graph& g, const Tensor& a, const Tensor& b);

/// Mean over all N*H*W pixels of -log softmax(logits)[label].
Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, const LabelMap& labels);

/// Sum of all elements, as a scalar.
Tensor sum(Graph& g, const Tensor& input);

/// sum_i input_i * weights_i, as a scalar. `weights` is a constant.
Tensor weighted_sum(Graph& g, const Tensor& input, std::span<const real> weights);

/// Elementwise a + b for equal shapes.
Tensor add(Graph& g, const Tensor& a, const Tensor& b);

/// Per-pixel softmax over the channel axis of [N,K,H,W]. Not differentiable.
Tensor softmax_channels(const Tensor& logits);

/// Output size of a convolution along one axis, or throws ShapeError.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, int stride, int padding);

COOPSEG_NAMESPACE_END
