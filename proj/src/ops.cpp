#include "smgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smgan/errors.hpp"

namespace smgan::ops {

namespace {

std::vector<std::size_t> leading_axes(std::size_t rank) {
  std::vector<std::size_t> axes(rank - 1);
  std::iota(axes.begin(), axes.end(), 0);
  return axes;
}

std::vector<std::size_t> middle_axes(std::size_t rank) {
  std::vector<std::size_t> axes;
  for (std::size_t a = 1; a + 1 < rank; ++a) axes.push_back(a);
  return axes;
}

void validate_axes(const Shape& shape, const std::vector<std::size_t>& axes, const char* op) {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= shape.size()) {
      throw ArgumentError(std::string(op) + ": axis " + std::to_string(axes[i]) +
                          " out of range for " + shape_str(shape));
    }
    if (i > 0 && axes[i] <= axes[i - 1]) {
      throw ArgumentError(std::string(op) + ": axes must be strictly increasing");
    }
  }
}

Shape reduced_shape(const Shape& full, const std::vector<std::size_t>& axes) {
  Shape out;
  std::size_t k = 0;
  for (std::size_t a = 0; a < full.size(); ++a) {
    if (k < axes.size() && axes[k] == a) {
      ++k;
    } else {
      out.push_back(full[a]);
    }
  }
  if (out.empty()) out = {1};
  return out;
}

// Maps each flat index of `full` to the flat index of the reduced tensor.
void for_each_reduced(const Shape& full, const std::vector<std::size_t>& axes,
                      const std::function<void(std::size_t full_i, std::size_t red_i)>& fn) {
  std::size_t rank = full.size();
  std::vector<std::size_t> coord(rank, 0);
  std::size_t n = shape_numel(full);
  std::vector<bool> is_reduced(rank, false);
  for (auto a : axes) is_reduced[a] = true;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t red = 0;
    for (std::size_t a = 0; a < rank; ++a) {
      if (!is_reduced[a]) red = red * full[a] + coord[a];
    }
    fn(i, red);
    for (std::size_t a = rank; a-- > 0;) {
      if (++coord[a] < full[a]) break;
      coord[a] = 0;
    }
  }
}

Var unary(const Var& a, Tensor value, std::function<std::vector<Var>(const Var&)> rule) {
  return Var::make(std::move(value), {a}, std::move(rule));
}

Tensor map(const Tensor& a, double (*f)(double)) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var::make(std::move(out), {a, b},
                   [](const Var& up) { return std::vector<Var>{up, up}; });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var::make(std::move(out), {a, b},
                   [](const Var& up) { return std::vector<Var>{up, neg(up)}; });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::make(std::move(out), {a, b}, [a, b](const Var& up) {
    return std::vector<Var>{mul(up, b), mul(up, a)};
  });
}

Var neg(const Var& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -a.value()[i];
  return unary(a, std::move(out), [](const Var& up) { return std::vector<Var>{neg(up)}; });
}

Var add_scalar(const Var& a, double c) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + c;
  return unary(a, std::move(out), [](const Var& up) { return std::vector<Var>{up}; });
}

Var mul_scalar(const Var& a, double c) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * c;
  return unary(a, std::move(out),
               [c](const Var& up) { return std::vector<Var>{mul_scalar(up, c)}; });
}

Var scale(const Var& a, const Var& s) {
  if (s.value().size() != 1) throw ContractError("scale: scalar Var expected");
  double sv = s.value()[0];
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * sv;
  return Var::make(std::move(out), {a, s}, [a, s](const Var& up) {
    return std::vector<Var>{scale(up, s), sum_all(mul(up, a))};
  });
}

Var relu(const Var& a) {
  Tensor out(a.shape());
  Tensor mask(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool pos = a.value()[i] > 0.0;
    out[i] = pos ? a.value()[i] : 0.0;
    mask[i] = pos ? 1.0 : 0.0;
  }
  return unary(a, std::move(out), [mask](const Var& up) {
    return std::vector<Var>{mul(up, Var::constant(mask))};
  });
}

Var leaky_relu(const Var& a, double slope) {
  Tensor out(a.shape());
  Tensor mask(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool pos = a.value()[i] > 0.0;
    out[i] = pos ? a.value()[i] : slope * a.value()[i];
    mask[i] = pos ? 1.0 : slope;
  }
  return unary(a, std::move(out), [mask](const Var& up) {
    return std::vector<Var>{mul(up, Var::constant(mask))};
  });
}

Var tanh_op(const Var& a) {
  return unary(a, map(a.value(), std::tanh), [a](const Var& up) {
    Var y = tanh_op(a);
    return std::vector<Var>{mul(up, add_scalar(neg(mul(y, y)), 1.0))};
  });
}

namespace {
double sigmoid_scalar(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}
double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
}  // namespace

Var sigmoid_op(const Var& a) {
  return unary(a, map(a.value(), sigmoid_scalar), [a](const Var& up) {
    Var s = sigmoid_op(a);
    return std::vector<Var>{mul(up, mul(s, add_scalar(neg(s), 1.0)))};
  });
}

Var softplus_op(const Var& a) {
  return unary(a, map(a.value(), softplus_scalar), [a](const Var& up) {
    return std::vector<Var>{mul(up, sigmoid_op(a))};
  });
}

Var exp_op(const Var& a) {
  return unary(a, map(a.value(), std::exp), [a](const Var& up) {
    return std::vector<Var>{mul(up, exp_op(a))};
  });
}

Var log_op(const Var& a) {
  return unary(a, map(a.value(), std::log), [a](const Var& up) {
    return std::vector<Var>{mul(up, reciprocal_op(a))};
  });
}

Var sqrt_op(const Var& a) {
  return unary(a, map(a.value(), std::sqrt), [a](const Var& up) {
    return std::vector<Var>{mul_scalar(mul(up, rsqrt_op(a)), 0.5)};
  });
}

Var rsqrt_op(const Var& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / std::sqrt(a.value()[i]);
  return unary(a, std::move(out), [a](const Var& up) {
    Var r = rsqrt_op(a);
    return std::vector<Var>{mul_scalar(mul(up, mul(r, mul(r, r))), -0.5)};
  });
}

Var reciprocal_op(const Var& a) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / a.value()[i];
  return unary(a, std::move(out), [a](const Var& up) {
    Var r = reciprocal_op(a);
    return std::vector<Var>{neg(mul(up, mul(r, r)))};
  });
}

// ---- shape / linear --------------------------------------------------------

Var reshape(const Var& a, Shape shape) {
  if (shape_numel(shape) != a.value().size()) {
    throw ShapeError("reshape: cannot view " + a.value().shape_string() + " as " +
                     shape_str(shape));
  }
  Shape orig = a.shape();
  Tensor out(std::move(shape), a.value().vec());
  return unary(a, std::move(out), [orig](const Var& up) {
    return std::vector<Var>{reshape(up, orig)};
  });
}

Var transpose2d(const Var& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose2d: need 2-D, got " + a.value().shape_string());
  std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.value()[i * n + j];
  return unary(a, std::move(out),
               [](const Var& up) { return std::vector<Var>{transpose2d(up)}; });
}

Var permute(const Var& a, const std::vector<std::size_t>& perm) {
  const Shape& s = a.shape();
  if (perm.size() != s.size()) throw ArgumentError("permute: rank mismatch");
  Shape out_shape(s.size());
  std::vector<bool> seen(s.size(), false);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= s.size() || seen[perm[i]]) throw ArgumentError("permute: invalid permutation");
    seen[perm[i]] = true;
    out_shape[i] = s[perm[i]];
  }
  Tensor out(out_shape);
  std::size_t rank = s.size();
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t a2 = rank - 1; a2-- > 0;) in_strides[a2] = in_strides[a2 + 1] * s[a2 + 1];
  std::vector<std::size_t> coord(rank, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < rank; ++d) src += coord[d] * in_strides[perm[d]];
    out[i] = a.value()[src];
    for (std::size_t d = rank; d-- > 0;) {
      if (++coord[d] < out_shape[d]) break;
      coord[d] = 0;
    }
  }
  std::vector<std::size_t> inv(rank);
  for (std::size_t i = 0; i < rank; ++i) inv[perm[i]] = i;
  return unary(a, std::move(out), [inv](const Var& up) {
    return std::vector<Var>{permute(up, inv)};
  });
}

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
  }
  std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out({m, n});
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      double av = pa[i * k + l];
      if (av == 0.0) continue;
      const double* row = pb + l * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * row[j];
    }
  }
  return Var::make(std::move(out), {a, b}, [a, b](const Var& up) {
    return std::vector<Var>{matmul(up, transpose2d(b)), matmul(transpose2d(a), up)};
  });
}

Var reduce_sum(const Var& a, std::vector<std::size_t> axes) {
  validate_axes(a.shape(), axes, "reduce_sum");
  if (axes.empty()) {
    Tensor out = a.value();
    return unary(a, std::move(out), [](const Var& up) { return std::vector<Var>{up}; });
  }
  Shape full = a.shape();
  Tensor out(reduced_shape(full, axes));
  const Tensor& av = a.value();
  for_each_reduced(full, axes, [&](std::size_t fi, std::size_t ri) { out[ri] += av[fi]; });
  return unary(a, std::move(out), [axes, full](const Var& up) {
    return std::vector<Var>{broadcast_axes(up, axes, full)};
  });
}

Var reduce_mean(const Var& a, std::vector<std::size_t> axes) {
  std::size_t n = 1;
  validate_axes(a.shape(), axes, "reduce_mean");
  for (auto ax : axes) n *= a.shape()[ax];
  return mul_scalar(reduce_sum(a, std::move(axes)), 1.0 / static_cast<double>(n));
}

Var broadcast_axes(const Var& a, std::vector<std::size_t> axes, Shape full) {
  validate_axes(full, axes, "broadcast_axes");
  Shape expect = reduced_shape(full, axes);
  if (shape_numel(expect) != a.value().size()) {
    throw ShapeError("broadcast_axes: source " + a.value().shape_string() +
                     " does not match reduced form " + shape_str(expect) + " of " +
                     shape_str(full));
  }
  Tensor out(full);
  const Tensor& av = a.value();
  for_each_reduced(full, axes, [&](std::size_t fi, std::size_t ri) { out[fi] = av[ri]; });
  return unary(a, std::move(out), [axes](const Var& up) {
    return std::vector<Var>{reduce_sum(up, axes)};
  });
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value()[i];
  Shape full = a.shape();
  return unary(a, Tensor::scalar(s), [full](const Var& up) {
    return std::vector<Var>{scale(Var::constant(Tensor::full(full, 1.0)), up)};
  });
}

Var mean_all(const Var& a) {
  return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a.value().size()));
}

// ---- channel broadcasts ----------------------------------------------------

Var add_channel(const Var& x, const Var& v) {
  std::size_t c = x.shape().back();
  if (v.shape().size() != 1 || v.shape()[0] != c) {
    throw ShapeError("add_channel: vector " + v.value().shape_string() + " vs channels of " +
                     x.value().shape_string());
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] + v.value()[i % c];
  std::size_t rank = x.shape().size();
  return Var::make(std::move(out), {x, v}, [rank](const Var& up) {
    return std::vector<Var>{up, reduce_sum(up, leading_axes(rank))};
  });
}

Var mul_channel(const Var& x, const Var& v) {
  std::size_t c = x.shape().back();
  if (v.shape().size() != 1 || v.shape()[0] != c) {
    throw ShapeError("mul_channel: vector " + v.value().shape_string() + " vs channels of " +
                     x.value().shape_string());
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * v.value()[i % c];
  std::size_t rank = x.shape().size();
  return Var::make(std::move(out), {x, v}, [x, v, rank](const Var& up) {
    return std::vector<Var>{mul_channel(up, v), reduce_sum(mul(up, x), leading_axes(rank))};
  });
}

namespace {
void check_sample_channel(const Var& x, const Var& m, const char* op) {
  const Shape& xs = x.shape();
  const Shape& ms = m.shape();
  if (xs.size() < 2 || ms.size() != 2 || ms[0] != xs.front() || ms[1] != xs.back()) {
    throw ShapeError(std::string(op) + ": modulator " + shape_str(ms) + " vs activations " +
                     shape_str(xs));
  }
}
}  // namespace

Var add_sample_channel(const Var& x, const Var& m) {
  check_sample_channel(x, m, "add_sample_channel");
  std::size_t n = x.shape().front(), c = x.shape().back();
  std::size_t inner = x.value().size() / n;
  Tensor out(x.shape());
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < inner; ++j)
      out[s * inner + j] = x.value()[s * inner + j] + m.value()[s * c + j % c];
  std::size_t rank = x.shape().size();
  return Var::make(std::move(out), {x, m}, [rank](const Var& up) {
    return std::vector<Var>{up, reduce_sum(up, middle_axes(rank))};
  });
}

Var mul_sample_channel(const Var& x, const Var& m) {
  check_sample_channel(x, m, "mul_sample_channel");
  std::size_t n = x.shape().front(), c = x.shape().back();
  std::size_t inner = x.value().size() / n;
  Tensor out(x.shape());
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < inner; ++j)
      out[s * inner + j] = x.value()[s * inner + j] * m.value()[s * c + j % c];
  std::size_t rank = x.shape().size();
  return Var::make(std::move(out), {x, m}, [x, m, rank](const Var& up) {
    return std::vector<Var>{mul_sample_channel(up, m), reduce_sum(mul(up, x), middle_axes(rank))};
  });
}

// ---- gather / scatter ------------------------------------------------------

Var gather_rows(const Var& table, const std::vector<std::size_t>& labels) {
  if (table.shape().size() != 2) throw ShapeError("gather_rows: table must be 2-D");
  std::size_t k = table.shape()[0], c = table.shape()[1];
  for (auto l : labels) {
    if (l >= k) {
      throw ArgumentError("gather_rows: label " + std::to_string(l) + " out of range for " +
                          std::to_string(k) + " rows");
    }
  }
  Tensor out({labels.size(), c});
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = table.value()[labels[i] * c + j];
  return unary(table, std::move(out), [labels, k](const Var& up) {
    return std::vector<Var>{scatter_rows(up, labels, k)};
  });
}

Var scatter_rows(const Var& x, const std::vector<std::size_t>& labels, std::size_t num_rows) {
  if (x.shape().size() != 2 || x.shape()[0] != labels.size()) {
    throw ShapeError("scatter_rows: rows of " + x.value().shape_string() +
                     " vs label count " + std::to_string(labels.size()));
  }
  std::size_t c = x.shape()[1];
  Tensor out({num_rows, c});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_rows) throw ArgumentError("scatter_rows: label out of range");
    for (std::size_t j = 0; j < c; ++j) out[labels[i] * c + j] += x.value()[i * c + j];
  }
  return unary(x, std::move(out), [labels](const Var& up) {
    return std::vector<Var>{gather_rows(up, labels)};
  });
}

// ---- convolution family ----------------------------------------------------

ConvGeom conv_geometry(const Shape& input, std::size_t kh, std::size_t kw, std::size_t stride,
                       Padding padding) {
  if (input.size() != 4) throw ShapeError("conv: input must be NHWC, got " + shape_str(input));
  if (stride == 0) throw ArgumentError("conv: stride must be >= 1");
  std::size_t h = input[1], w = input[2];
  ConvGeom g{kh, kw, stride, 0, 0, 0, 0};
  if (padding == Padding::kValid) {
    if (kh > h || kw > w) {
      throw ShapeError("conv: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                       " larger than input " + shape_str(input));
    }
    g.oh = (h - kh) / stride + 1;
    g.ow = (w - kw) / stride + 1;
  } else {
    g.oh = (h + stride - 1) / stride;
    g.ow = (w + stride - 1) / stride;
    std::size_t need_h = (g.oh - 1) * stride + kh;
    std::size_t need_w = (g.ow - 1) * stride + kw;
    std::size_t pad_h = need_h > h ? need_h - h : 0;
    std::size_t pad_w = need_w > w ? need_w - w : 0;
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

Var im2col(const Var& x, const ConvGeom& g) {
  const Shape& s = x.shape();
  std::size_t n = s[0], h = s[1], w = s[2], c = s[3];
  Tensor out({n * g.oh * g.ow, g.kh * g.kw * c});
  const Tensor& xv = x.value();
  std::size_t row = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++row) {
        double* dst = out.data() + row * g.kh * g.kw * c;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_top);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_left);
            double* cell = dst + (ky * g.kw + kx) * c;
            if (iy >= 0 && iy < static_cast<long>(h) && ix >= 0 && ix < static_cast<long>(w)) {
              const double* src = xv.data() + ((b * h + iy) * w + ix) * c;
              std::copy(src, src + c, cell);
            }
          }
        }
      }
    }
  }
  Shape in_shape = s;
  ConvGeom gg = g;
  return unary(x, std::move(out), [gg, in_shape](const Var& up) {
    return std::vector<Var>{col2im(up, gg, in_shape)};
  });
}

Var col2im(const Var& cols, const ConvGeom& g, Shape input_shape) {
  std::size_t n = input_shape[0], h = input_shape[1], w = input_shape[2], c = input_shape[3];
  if (cols.shape().size() != 2 || cols.shape()[0] != n * g.oh * g.ow ||
      cols.shape()[1] != g.kh * g.kw * c) {
    throw ShapeError("col2im: columns " + cols.value().shape_string() + " vs geometry for " +
                     shape_str(input_shape));
  }
  Tensor out(input_shape);
  const Tensor& cv = cols.value();
  std::size_t row = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
      for (std::size_t ox = 0; ox < g.ow; ++ox, ++row) {
        const double* src_row = cv.data() + row * g.kh * g.kw * c;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad_top);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad_left);
            if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 || ix >= static_cast<long>(w))
              continue;
            const double* cell = src_row + (ky * g.kw + kx) * c;
            double* dst = out.data() + ((b * h + iy) * w + ix) * c;
            for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += cell[ch];
          }
        }
      }
    }
  }
  ConvGeom gg = g;
  return unary(cols, std::move(out), [gg](const Var& up) {
    return std::vector<Var>{im2col(up, gg)};
  });
}

Var conv2d(const Var& input, const Var& kernel, std::size_t stride, Padding padding) {
  const Shape& ks = kernel.shape();
  if (ks.size() != 4) throw ShapeError("conv2d: kernel must be [kh,kw,C,C'], got " + shape_str(ks));
  const Shape& is = input.shape();
  ConvGeom g = conv_geometry(is, ks[0], ks[1], stride, padding);
  if (ks[2] != is[3]) {
    throw ShapeError("conv2d: kernel channels " + shape_str(ks) + " vs input " + shape_str(is));
  }
  Var cols = im2col(input, g);
  Var w2 = reshape(kernel, {ks[0] * ks[1] * ks[2], ks[3]});
  Var out2 = matmul(cols, w2);
  return reshape(out2, {is[0], g.oh, g.ow, ks[3]});
}

Var upsample_nearest(const Var& x, std::size_t factor) {
  if (factor < 1) throw ArgumentError("upsample_nearest: factor must be >= 1");
  const Shape& s = x.shape();
  if (s.size() != 4) throw ShapeError("upsample_nearest: input must be NHWC, got " + shape_str(s));
  std::size_t n = s[0], h = s[1], w = s[2], c = s[3];
  Tensor out({n, h * factor, w * factor, c});
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h * factor; ++y)
      for (std::size_t xx = 0; xx < w * factor; ++xx) {
        const double* src = xv.data() + ((b * h + y / factor) * w + xx / factor) * c;
        double* dst = out.data() + ((b * h * factor + y) * w * factor + xx) * c;
        std::copy(src, src + c, dst);
      }
  return unary(x, std::move(out), [factor](const Var& up) {
    return std::vector<Var>{downsample_sum(up, factor)};
  });
}

Var downsample_sum(const Var& x, std::size_t factor) {
  if (factor < 1) throw ArgumentError("downsample_sum: factor must be >= 1");
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] % factor != 0 || s[2] % factor != 0) {
    throw ShapeError("downsample_sum: spatial extents of " + shape_str(s) +
                     " not divisible by " + std::to_string(factor));
  }
  std::size_t n = s[0], h = s[1], w = s[2], c = s[3];
  Tensor out({n, h / factor, w / factor, c});
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx) {
        const double* src = xv.data() + ((b * h + y) * w + xx) * c;
        double* dst = out.data() + ((b * (h / factor) + y / factor) * (w / factor) + xx / factor) * c;
        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
      }
  return unary(x, std::move(out), [factor](const Var& up) {
    return std::vector<Var>{upsample_nearest(up, factor)};
  });
}

Var avg_pool(const Var& x, std::size_t factor) {
  return mul_scalar(downsample_sum(x, factor), 1.0 / static_cast<double>(factor * factor));
}

Var global_sum_pool(const Var& x) {
  if (x.shape().size() != 4) {
    throw ShapeError("global_sum_pool: input must be NHWC, got " + x.value().shape_string());
  }
  return reduce_sum(x, {1, 2});
}

// ---- composites ------------------------------------------------------------

Var linear(const Var& x, const Var& w, const Var& b) { return add_channel(matmul(x, w), b); }

Var dot(const Var& a, const Var& b) { return sum_all(mul(a, b)); }

std::pair<Var, Var> batch_moments(const Var& x, std::vector<std::size_t> axes) {
  if (axes.empty()) throw ArgumentError("batch_moments: empty reduction");
  validate_axes(x.shape(), axes, "batch_moments");
  Var mean = reduce_mean(x, axes);
  Var diff = sub(x, broadcast_axes(mean, axes, x.shape()));
  Var var = reduce_mean(mul(diff, diff), axes);
  return {mean, var};
}

}  // namespace smgan::ops
