#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tss/ad/tensor.hpp"

// Differentiable primitives. Feature maps are rank-2 [channels, time],
// row-major; scalars have rank 0.
namespace tss::ad {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
// s * x for a scalar tensor s.
Tensor scale_by(const Tensor& x, const Tensor& s);
// Scalar tensor repeated to `shape`.
Tensor broadcast(const Tensor& s, const Shape& shape);
Tensor clamp(const Tensor& x, double lo, double hi);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor relu(const Tensor& x);
// alpha has one element (shared) or one per channel.
Tensor prelu(const Tensor& x, const Tensor& alpha);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);

// Stack [C_i, T] maps along the channel axis.
Tensor concat_rows(std::span<const Tensor> parts);
// [D] -> [D, count].
Tensor repeat_cols(const Tensor& v, std::size_t count);
// [R, D] -> [D].
Tensor select_row(const Tensor& table, std::size_t row);
// [C, T] -> [C, end - begin].
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// [C, T] -> [C, length]: trailing columns dropped or zero-filled.
Tensor fit_length(const Tensor& x, std::size_t length);

struct Conv1dSpec {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;  // zeros on both sides
  std::size_t groups = 1;
};

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dSpec& spec);

// x [Cin, T], weight [Cout, Cin/groups, K], bias [Cout] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv1dSpec& spec);

// x [Cin, T], weight [Cin, Cout, K], bias [Cout] or undefined.
// Output [Cout, (T - 1) * stride + K].
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride);

// x [in] or [B, in]; weight [out, in]; bias [out] or undefined.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Normalizes x [C, T] with mean/variance taken over all of (C x T), then
// applies per-channel gain and bias.
Tensor global_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-8);

}  // namespace tss::ad
