#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "smgan/autodiff.hpp"
#include "smgan/tensor.hpp"

namespace smgan::ops {

// ---- elementwise -----------------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
/// Elementwise multiply by a scalar Var (differentiable in both arguments).
Var scale(const Var& a, const Var& s);

Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.1);
Var tanh_op(const Var& a);
Var sigmoid_op(const Var& a);
/// log(1 + exp(x)), evaluated in the overflow-safe branch form.
Var softplus_op(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);
Var sqrt_op(const Var& a);
Var rsqrt_op(const Var& a);
Var reciprocal_op(const Var& a);

// ---- shape / linear --------------------------------------------------------
Var reshape(const Var& a, Shape shape);
Var transpose2d(const Var& a);
Var permute(const Var& a, const std::vector<std::size_t>& perm);
Var matmul(const Var& a, const Var& b);

/// Sum over `axes` (removed from the shape). Empty axis list is the identity.
Var reduce_sum(const Var& a, std::vector<std::size_t> axes);
Var reduce_mean(const Var& a, std::vector<std::size_t> axes);
/// Adjoint of reduce_sum: replicate a reduced tensor back to `full`.
Var broadcast_axes(const Var& a, std::vector<std::size_t> axes, Shape full);
Var sum_all(const Var& a);
Var mean_all(const Var& a);

/// v has shape [C]; x has shape [..., C].
Var add_channel(const Var& x, const Var& v);
Var mul_channel(const Var& x, const Var& v);
/// m has shape [N, C]; x has shape [N, ..., C] (per-sample channel broadcast).
Var add_sample_channel(const Var& x, const Var& m);
Var mul_sample_channel(const Var& x, const Var& m);

/// Row lookup: table [K, C] gathered by integer labels into [N, C].
Var gather_rows(const Var& table, const std::vector<std::size_t>& labels);
Var scatter_rows(const Var& x, const std::vector<std::size_t>& labels, std::size_t num_rows);

// ---- convolution family (NHWC) ---------------------------------------------
enum class Padding { kSame, kValid };

struct ConvGeom {
  std::size_t kh, kw, stride;
  std::size_t pad_top, pad_left;
  std::size_t oh, ow;
};
ConvGeom conv_geometry(const Shape& input, std::size_t kh, std::size_t kw, std::size_t stride,
                       Padding padding);

Var im2col(const Var& x, const ConvGeom& g);
Var col2im(const Var& cols, const ConvGeom& g, Shape input_shape);
/// Cross-correlation of NHWC input with [kh, kw, C, C'] kernel.
Var conv2d(const Var& input, const Var& kernel, std::size_t stride, Padding padding);

Var upsample_nearest(const Var& x, std::size_t factor);
Var downsample_sum(const Var& x, std::size_t factor);
Var avg_pool(const Var& x, std::size_t factor);
Var global_sum_pool(const Var& x);

// ---- composites ------------------------------------------------------------
Var linear(const Var& x, const Var& w, const Var& b);
Var dot(const Var& a, const Var& b);
/// Per-feature mean and biased variance over `axes`.
std::pair<Var, Var> batch_moments(const Var& x, std::vector<std::size_t> axes);

}  // namespace smgan::ops
