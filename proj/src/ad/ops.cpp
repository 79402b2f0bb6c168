#include "tss/ad/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "tss/errors.hpp"

namespace tss::ad {

using detail::make_result;
using detail::Node;

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DomainError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank)
    throw DomainError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                      shape_string(x.shape()));
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.numel() != 1) throw DomainError(std::string(op) + ": expected a scalar tensor");
}

bool wants(const Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i]->requires_grad;
}

std::vector<double>& grad_of(const Node& self, std::size_t i) { return self.inputs[i]->ensure_grad(); }

// Elementwise op with a local derivative for each input.
template <class Fwd>
std::vector<double> zip(const Tensor& a, const Tensor& b, Fwd f) {
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(av[i], bv[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(a.shape(), zip(a, b, [](double x, double y) { return x + y; }), {a, b},
                     [](Node& self) {
                       for (std::size_t k = 0; k < 2; ++k) {
                         if (!wants(self, k)) continue;
                         auto& g = grad_of(self, k);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(a.shape(), zip(a, b, [](double x, double y) { return x - y; }), {a, b},
                     [](Node& self) {
                       if (wants(self, 0)) {
                         auto& g = grad_of(self, 0);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                       }
                       if (wants(self, 1)) {
                         auto& g = grad_of(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
                       }
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(a.shape(), zip(a, b, [](double x, double y) { return x * y; }), {a, b},
                     [](Node& self) {
                       const auto& av = self.inputs[0]->value;
                       const auto& bv = self.inputs[1]->value;
                       if (wants(self, 0)) {
                         auto& g = grad_of(self, 0);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
                       }
                       if (wants(self, 1)) {
                         auto& g = grad_of(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
                       }
                     });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  for (double v : b.values())
    if (v == 0.0) throw NumericError("div: division by zero");
  return make_result(a.shape(), zip(a, b, [](double x, double y) { return x / y; }), {a, b},
                     [](Node& self) {
                       const auto& av = self.inputs[0]->value;
                       const auto& bv = self.inputs[1]->value;
                       if (wants(self, 0)) {
                         auto& g = grad_of(self, 0);
                         for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / bv[i];
                       }
                       if (wants(self, 1)) {
                         auto& g = grad_of(self, 1);
                         for (std::size_t i = 0; i < g.size(); ++i)
                           g[i] -= self.grad[i] * av[i] / (bv[i] * bv[i]);
                       }
                     });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

Tensor add_scalar(const Tensor& a, double offset) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v += offset;
  return make_result(a.shape(), std::move(out), {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  require_scalar(s, "scale_by");
  const double sv = s.values()[0];
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v *= sv;
  return make_result(x.shape(), std::move(out), {x, s}, [](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const double sv = self.inputs[1]->value[0];
    if (wants(self, 0)) {
      auto& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sv * self.grad[i];
    }
    if (wants(self, 1)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * self.grad[i];
      grad_of(self, 1)[0] += acc;
    }
  });
}

Tensor broadcast(const Tensor& s, const Shape& shape) {
  require_scalar(s, "broadcast");
  return make_result(shape, std::vector<double>(numel(shape), s.values()[0]), {s}, [](Node& self) {
    double acc = 0.0;
    for (double g : self.grad) acc += g;
    grad_of(self, 0)[0] += acc;
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp: lo > hi");
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = std::clamp(v, lo, hi);
  return make_result(x.shape(), std::move(out), {x}, [lo, hi](Node& self) {
    const auto& xv = self.inputs[0]->value;
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > lo && xv[i] < hi) g[i] += self.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({}, {acc}, {x}, [](Node& self) {
    auto& g = grad_of(self, 0);
    const double d = self.grad[0];
    for (double& v : g) v += d;
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DomainError("mean: empty tensor");
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  return make_result({}, {acc / n}, {x}, [n](Node& self) {
    auto& g = grad_of(self, 0);
    const double d = self.grad[0] / n;
    for (double& v : g) v += d;
  });
}

Tensor relu(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xv = self.inputs[0]->value;
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) g[i] += self.grad[i];
  });
}

Tensor prelu(const Tensor& x, const Tensor& alpha) {
  const std::size_t channels = x.rank() >= 1 ? x.dim(0) : 1;
  if (alpha.numel() != 1 && alpha.numel() != channels)
    throw DomainError("prelu: alpha must have 1 or C elements");
  const std::size_t per_row = x.numel() / std::max<std::size_t>(channels, 1);
  const bool shared = alpha.numel() == 1;
  const auto xv = x.values();
  const auto av = alpha.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double a = shared ? av[0] : av[i / per_row];
    out[i] = xv[i] > 0.0 ? xv[i] : a * xv[i];
  }
  return make_result(x.shape(), std::move(out), {x, alpha}, [shared, per_row](Node& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& av = self.inputs[1]->value;
    if (wants(self, 0)) {
      auto& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double a = shared ? av[0] : av[i / per_row];
        g[i] += self.grad[i] * (xv[i] > 0.0 ? 1.0 : a);
      }
    }
    if (wants(self, 1)) {
      auto& g = grad_of(self, 1);
      for (std::size_t i = 0; i < xv.size(); ++i)
        if (xv[i] <= 0.0) g[shared ? 0 : i / per_row] += self.grad[i] * xv[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (double& v : out) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.value[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor log(const Tensor& x) {
  std::vector<double> out(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) throw NumericError("log: non-positive input at index " + std::to_string(i));
    out[i] = std::log(out[i]);
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
    const auto& xv = self.inputs[0]->value;
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / xv[i];
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DomainError("concat_rows: no inputs");
  const std::size_t cols = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != cols)
      throw DomainError("concat_rows: time length mismatch " + shape_string(parts[0].shape()) + " vs " +
                        shape_string(p.shape()));
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  std::vector<Tensor> inputs;
  for (const auto& p : parts) {
    out.insert(out.end(), p.values().begin(), p.values().end());
    inputs.push_back(p);
  }
  return make_result({rows, cols}, std::move(out), std::move(inputs), [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      const std::size_t n = self.inputs[k]->value.size();
      if (wants(self, k)) {
        auto& g = grad_of(self, k);
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor repeat_cols(const Tensor& v, std::size_t count) {
  require_rank(v, 1, "repeat_cols");
  const std::size_t rows = v.dim(0);
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r * count), count, v.values()[r]);
  return make_result({rows, count}, std::move(out), {v}, [rows, count](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < count; ++c) acc += self.grad[r * count + c];
      g[r] += acc;
    }
  });
}

Tensor select_row(const Tensor& table, std::size_t row) {
  require_rank(table, 2, "select_row");
  if (row >= table.dim(0)) throw DomainError("select_row: row out of range");
  const std::size_t d = table.dim(1);
  std::vector<double> out(table.values().begin() + static_cast<std::ptrdiff_t>(row * d),
                          table.values().begin() + static_cast<std::ptrdiff_t>((row + 1) * d));
  return make_result({d}, std::move(out), {table}, [row, d](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < d; ++i) g[row * d + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  if (begin > end || end > cols) throw DomainError("slice_cols: range out of bounds");
  const std::size_t width = end - begin;
  std::vector<double> out(rows * width);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * cols + begin), width,
                out.begin() + static_cast<std::ptrdiff_t>(r * width));
  return make_result({rows, width}, std::move(out), {x}, [rows, cols, begin, width](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) g[r * cols + begin + c] += self.grad[r * width + c];
  });
}

Tensor fit_length(const Tensor& x, std::size_t length) {
  require_rank(x, 2, "fit_length");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const std::size_t keep = std::min(cols, length);
  std::vector<double> out(rows * length, 0.0);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(r * cols), keep,
                out.begin() + static_cast<std::ptrdiff_t>(r * length));
  return make_result({rows, length}, std::move(out), {x}, [rows, cols, length, keep](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < keep; ++c) g[r * cols + c] += self.grad[r * length + c];
  });
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dSpec& spec) {
  if (spec.stride == 0 || spec.dilation == 0 || kernel == 0)
    throw DomainError("conv1d: stride, dilation and kernel must be positive");
  const std::size_t span = spec.dilation * (kernel - 1) + 1;
  const std::size_t padded = length + 2 * spec.padding;
  if (padded < span)
    throw DomainError("conv1d: input of length " + std::to_string(length) +
                      " is shorter than the kernel span " + std::to_string(span));
  return (padded - span) / spec.stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t cin, cout, length, kernel, out_len, cin_g, cout_g;
  Conv1dSpec spec;
  bool pointwise() const { return kernel == 1 && spec.stride == 1 && spec.padding == 0; }
  bool depthwise() const { return spec.groups == cin && cin == cout; }
};

// Column matrix [cin_g * K, out_len] for one group.
void im2col(const double* x, const ConvGeometry& g, std::size_t group, double* cols) {
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    const double* row = x + (group * g.cin_g + c) * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      double* dst = cols + (c * g.kernel + k) * g.out_len;
      const long long offset =
          static_cast<long long>(k * g.spec.dilation) - static_cast<long long>(g.spec.padding);
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const long long idx = static_cast<long long>(t * g.spec.stride) + offset;
        dst[t] = (idx >= 0 && idx < static_cast<long long>(g.length)) ? row[idx] : 0.0;
      }
    }
  }
}

void col2im_add(const double* cols, const ConvGeometry& g, std::size_t group, double* dx) {
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    double* row = dx + (group * g.cin_g + c) * g.length;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const double* src = cols + (c * g.kernel + k) * g.out_len;
      const long long offset =
          static_cast<long long>(k * g.spec.dilation) - static_cast<long long>(g.spec.padding);
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const long long idx = static_cast<long long>(t * g.spec.stride) + offset;
        if (idx >= 0 && idx < static_cast<long long>(g.length)) row[idx] += src[t];
      }
    }
  }
}

void depthwise_forward(const double* x, const double* w, const ConvGeometry& g, double* out) {
  for (std::size_t c = 0; c < g.cin; ++c) {
    const double* row = x + c * g.length;
    const double* wk = w + c * g.kernel;
    double* dst = out + c * g.out_len;
    for (std::size_t k = 0; k < g.kernel; ++k) {
      const long long offset =
          static_cast<long long>(k * g.spec.dilation) - static_cast<long long>(g.spec.padding);
      // Valid t range: 0 <= t*stride + offset < length.
      for (std::size_t t = 0; t < g.out_len; ++t) {
        const long long idx = static_cast<long long>(t * g.spec.stride) + offset;
        if (idx >= 0 && idx < static_cast<long long>(g.length)) dst[t] += wk[k] * row[idx];
      }
    }
  }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, const Conv1dSpec& spec) {
  require_rank(x, 2, "conv1d");
  require_rank(weight, 3, "conv1d");
  ConvGeometry g{};
  g.spec = spec;
  g.cin = x.dim(0);
  g.length = x.dim(1);
  g.cout = weight.dim(0);
  g.kernel = weight.dim(2);
  if (spec.groups == 0 || g.cin % spec.groups != 0 || g.cout % spec.groups != 0)
    throw DomainError("conv1d: channels not divisible by groups");
  g.cin_g = g.cin / spec.groups;
  g.cout_g = g.cout / spec.groups;
  if (weight.dim(1) != g.cin_g)
    throw DomainError("conv1d: weight " + shape_string(weight.shape()) + " incompatible with input " +
                      shape_string(x.shape()) + " and groups=" + std::to_string(spec.groups));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout))
    throw DomainError("conv1d: bias must have shape [Cout]");
  g.out_len = conv1d_output_length(g.length, g.kernel, spec);

  std::vector<double> out(g.cout * g.out_len, 0.0);
  const double* xv = x.values().data();
  const double* wv = weight.values().data();
  if (g.depthwise()) {
    depthwise_forward(xv, wv, g, out.data());
  } else {
    const std::size_t kdim = g.cin_g * g.kernel;
    std::vector<double> cols;
    for (std::size_t grp = 0; grp < spec.groups; ++grp) {
      const double* colp = xv + grp * g.cin_g * g.length;
      if (!g.pointwise()) {
        cols.resize(kdim * g.out_len);
        im2col(xv, g, grp, cols.data());
        colp = cols.data();
      }
      ConstMapMat w_g(wv + grp * g.cout_g * kdim, static_cast<Eigen::Index>(g.cout_g),
                      static_cast<Eigen::Index>(kdim));
      ConstMapMat c_g(colp, static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(g.out_len));
      MapMat o_g(out.data() + grp * g.cout_g * g.out_len, static_cast<Eigen::Index>(g.cout_g),
                 static_cast<Eigen::Index>(g.out_len));
      o_g.noalias() = w_g * c_g;
    }
  }
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t c = 0; c < g.cout; ++c)
      for (std::size_t t = 0; t < g.out_len; ++t) out[c * g.out_len + t] += bv[c];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({g.cout, g.out_len}, std::move(out), std::move(inputs), [g](Node& self) {
    const double* xv = self.inputs[0]->value.data();
    const double* wv = self.inputs[1]->value.data();
    const double* dy = self.grad.data();
    if (wants(self, 2)) {
      auto& gb = grad_of(self, 2);
      for (std::size_t c = 0; c < g.cout; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < g.out_len; ++t) acc += dy[c * g.out_len + t];
        gb[c] += acc;
      }
    }
    const bool need_x = wants(self, 0);
    const bool need_w = wants(self, 1);
    if (g.depthwise()) {
      double* dx = need_x ? grad_of(self, 0).data() : nullptr;
      double* dw = need_w ? grad_of(self, 1).data() : nullptr;
      for (std::size_t c = 0; c < g.cin; ++c) {
        const double* row = xv + c * g.length;
        const double* dyr = dy + c * g.out_len;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const double wk = wv[c * g.kernel + k];
          const long long offset =
              static_cast<long long>(k * g.spec.dilation) - static_cast<long long>(g.spec.padding);
          double acc = 0.0;
          for (std::size_t t = 0; t < g.out_len; ++t) {
            const long long idx = static_cast<long long>(t * g.spec.stride) + offset;
            if (idx < 0 || idx >= static_cast<long long>(g.length)) continue;
            acc += dyr[t] * row[idx];
            if (dx) dx[c * g.length + static_cast<std::size_t>(idx)] += dyr[t] * wk;
          }
          if (dw) dw[c * g.kernel + k] += acc;
        }
      }
      return;
    }
    const std::size_t kdim = g.cin_g * g.kernel;
    std::vector<double> cols;
    std::vector<double> dcols;
    for (std::size_t grp = 0; grp < g.spec.groups; ++grp) {
      ConstMapMat dy_g(dy + grp * g.cout_g * g.out_len, static_cast<Eigen::Index>(g.cout_g),
                       static_cast<Eigen::Index>(g.out_len));
      if (need_w) {
        const double* colp = xv + grp * g.cin_g * g.length;
        if (!g.pointwise()) {
          cols.resize(kdim * g.out_len);
          im2col(xv, g, grp, cols.data());
          colp = cols.data();
        }
        ConstMapMat c_g(colp, static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(g.out_len));
        MapMat dw_g(grad_of(self, 1).data() + grp * g.cout_g * kdim, static_cast<Eigen::Index>(g.cout_g),
                    static_cast<Eigen::Index>(kdim));
        dw_g.noalias() += dy_g * c_g.transpose();
      }
      if (need_x) {
        ConstMapMat w_g(wv + grp * g.cout_g * kdim, static_cast<Eigen::Index>(g.cout_g),
                        static_cast<Eigen::Index>(kdim));
        double* dx = grad_of(self, 0).data();
        if (g.pointwise()) {
          MapMat dx_g(dx + grp * g.cin_g * g.length, static_cast<Eigen::Index>(g.cin_g),
                      static_cast<Eigen::Index>(g.length));
          dx_g.noalias() += w_g.transpose() * dy_g;
        } else {
          dcols.resize(kdim * g.out_len);
          MapMat dc(dcols.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(g.out_len));
          dc.noalias() = w_g.transpose() * dy_g;
          col2im_add(dcols.data(), g, grp, dx);
        }
      }
    }
  });
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  require_rank(x, 2, "conv_transpose1d");
  require_rank(weight, 3, "conv_transpose1d");
  if (stride == 0) throw DomainError("conv_transpose1d: stride must be positive");
  const std::size_t cin = x.dim(0);
  const std::size_t len = x.dim(1);
  if (weight.dim(0) != cin)
    throw DomainError("conv_transpose1d: weight " + shape_string(weight.shape()) +
                      " incompatible with input " + shape_string(x.shape()));
  const std::size_t cout = weight.dim(1);
  const std::size_t kernel = weight.dim(2);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
    throw DomainError("conv_transpose1d: bias must have shape [Cout]");
  if (len == 0) throw DomainError("conv_transpose1d: empty input");
  const std::size_t out_len = (len - 1) * stride + kernel;
  const std::size_t kdim = cout * kernel;

  ConstMapMat w(weight.values().data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(kdim));
  ConstMapMat xm(x.values().data(), static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(len));
  RowMat cols = w.transpose() * xm;  // [cout*K, len]

  std::vector<double> out(cout * out_len, 0.0);
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t k = 0; k < kernel; ++k) {
      const double* src = cols.data() + (co * kernel + k) * len;
      double* dst = out.data() + co * out_len + k;
      for (std::size_t t = 0; t < len; ++t) dst[t * stride] += src[t];
    }
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t t = 0; t < out_len; ++t) out[co * out_len + t] += bv[co];
  }

  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result({cout, out_len}, std::move(out), std::move(inputs),
                     [cin, len, cout, kernel, stride, out_len, kdim](Node& self) {
                       const double* dy = self.grad.data();
                       if (wants(self, 2)) {
                         auto& gb = grad_of(self, 2);
                         for (std::size_t co = 0; co < cout; ++co) {
                           double acc = 0.0;
                           for (std::size_t t = 0; t < out_len; ++t) acc += dy[co * out_len + t];
                           gb[co] += acc;
                         }
                       }
                       RowMat dcols(static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(len));
                       for (std::size_t co = 0; co < cout; ++co)
                         for (std::size_t k = 0; k < kernel; ++k) {
                           double* dst = dcols.data() + (co * kernel + k) * len;
                           const double* src = dy + co * out_len + k;
                           for (std::size_t t = 0; t < len; ++t) dst[t] = src[t * stride];
                         }
                       if (wants(self, 0)) {
                         ConstMapMat w(self.inputs[1]->value.data(), static_cast<Eigen::Index>(cin),
                                       static_cast<Eigen::Index>(kdim));
                         MapMat dx(grad_of(self, 0).data(), static_cast<Eigen::Index>(cin),
                                   static_cast<Eigen::Index>(len));
                         dx.noalias() += w * dcols;
                       }
                       if (wants(self, 1)) {
                         ConstMapMat xm(self.inputs[0]->value.data(), static_cast<Eigen::Index>(cin),
                                        static_cast<Eigen::Index>(len));
                         MapMat dw(grad_of(self, 1).data(), static_cast<Eigen::Index>(cin),
                                   static_cast<Eigen::Index>(kdim));
                         dw.noalias() += xm * dcols.transpose();
                       }
                     });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(weight, 2, "affine");
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  if (x.rank() != 1 && x.rank() != 2) throw DomainError("affine: input must be [in] or [B, in]");
  const std::size_t batch = x.rank() == 2 ? x.dim(0) : 1;
  if (x.shape().back() != in_dim)
    throw DomainError("affine: input " + shape_string(x.shape()) + " incompatible with weight " +
                      shape_string(weight.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != out_dim))
    throw DomainError("affine: bias must have shape [out]");

  ConstMapMat xm(x.values().data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(in_dim));
  ConstMapMat w(weight.values().data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in_dim));
  std::vector<double> out(batch * out_dim);
  MapMat om(out.data(), static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(out_dim));
  om.noalias() = xm * w.transpose();
  if (bias.defined())
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < out_dim; ++o) out[b * out_dim + o] += bias.values()[o];

  Shape shape = x.rank() == 2 ? Shape{batch, out_dim} : Shape{out_dim};
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(shape), std::move(out), std::move(inputs),
                     [batch, in_dim, out_dim](Node& self) {
                       ConstMapMat dy(self.grad.data(), static_cast<Eigen::Index>(batch),
                                      static_cast<Eigen::Index>(out_dim));
                       if (wants(self, 0)) {
                         ConstMapMat w(self.inputs[1]->value.data(), static_cast<Eigen::Index>(out_dim),
                                       static_cast<Eigen::Index>(in_dim));
                         MapMat dx(grad_of(self, 0).data(), static_cast<Eigen::Index>(batch),
                                   static_cast<Eigen::Index>(in_dim));
                         dx.noalias() += dy * w;
                       }
                       if (wants(self, 1)) {
                         ConstMapMat xm(self.inputs[0]->value.data(), static_cast<Eigen::Index>(batch),
                                        static_cast<Eigen::Index>(in_dim));
                         MapMat dw(grad_of(self, 1).data(), static_cast<Eigen::Index>(out_dim),
                                   static_cast<Eigen::Index>(in_dim));
                         dw.noalias() += dy.transpose() * xm;
                       }
                       if (wants(self, 2)) {
                         auto& gb = grad_of(self, 2);
                         for (std::size_t b = 0; b < batch; ++b)
                           for (std::size_t o = 0; o < out_dim; ++o) gb[o] += self.grad[b * out_dim + o];
                       }
                     });
}

Tensor global_layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank(x, 2, "global_layer_norm");
  const std::size_t channels = x.dim(0);
  const std::size_t len = x.dim(1);
  if (gain.numel() != channels || bias.numel() != channels)
    throw DomainError("global_layer_norm: gain/bias must have C elements");
  const auto xv = x.values();
  const double n = static_cast<double>(xv.size());
  double mu = 0.0;
  for (double v : xv) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : xv) var += (v - mu) * (v - mu);
  var /= n;
  const double inv_std = 1.0 / std::sqrt(var + eps);

  std::vector<double> out(xv.size());
  const auto gv = gain.values();
  const auto bv = bias.values();
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t i = c * len + t;
      out[i] = gv[c] * (xv[i] - mu) * inv_std + bv[c];
    }
  return make_result(x.shape(), std::move(out), {x, gain, bias},
                     [channels, len, mu, inv_std, n](Node& self) {
                       const auto& xv = self.inputs[0]->value;
                       const auto& gv = self.inputs[1]->value;
                       const double* dy = self.grad.data();
                       if (wants(self, 1) || wants(self, 2)) {
                         for (std::size_t c = 0; c < channels; ++c) {
                           double dg = 0.0, db = 0.0;
                           for (std::size_t t = 0; t < len; ++t) {
                             const std::size_t i = c * len + t;
                             dg += dy[i] * (xv[i] - mu) * inv_std;
                             db += dy[i];
                           }
                           if (wants(self, 1)) grad_of(self, 1)[c] += dg;
                           if (wants(self, 2)) grad_of(self, 2)[c] += db;
                         }
                       }
                       if (!wants(self, 0)) return;
                       // dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                       double m1 = 0.0, m2 = 0.0;
                       for (std::size_t c = 0; c < channels; ++c)
                         for (std::size_t t = 0; t < len; ++t) {
                           const std::size_t i = c * len + t;
                           const double dxhat = dy[i] * gv[c];
                           m1 += dxhat;
                           m2 += dxhat * (xv[i] - mu) * inv_std;
                         }
                       m1 /= n;
                       m2 /= n;
                       auto& gx = grad_of(self, 0);
                       for (std::size_t c = 0; c < channels; ++c)
                         for (std::size_t t = 0; t < len; ++t) {
                           const std::size_t i = c * len + t;
                           const double xhat = (xv[i] - mu) * inv_std;
                           gx[i] += inv_std * (dy[i] * gv[c] - m1 - xhat * m2);
                         }
                     });
}

}  // namespace tss::ad
