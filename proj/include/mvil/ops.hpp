#pragma once

#include "mvil/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace mvil {

namespace detail {

template <typename Scalar>
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
void check_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

// im2col for one sample: rows = output pixels, cols = c_in*kh*kw.
template <typename Scalar>
void im2col(const Scalar* x, int c_in, int h, int w, int kh, int kw, int stride, int pad, int oh,
            int ow, RowMat<Scalar>& cols) {
  cols.setZero(oh * ow, c_in * kh * kw);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const int row = oy * ow + ox;
      Scalar* dst = cols.data() + static_cast<std::ptrdiff_t>(row) * cols.cols();
      for (int c = 0; c < c_in; ++c) {
        const Scalar* plane = x + static_cast<std::ptrdiff_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - pad;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pad;
            const int col = (c * kh + ky) * kw + kx;
            if (iy >= 0 && iy < h && ix >= 0 && ix < w) dst[col] = plane[iy * w + ix];
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const RowMat<Scalar>& cols, int c_in, int h, int w, int kh, int kw, int stride,
                int pad, int oh, int ow, Scalar* dx) {
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const int row = oy * ow + ox;
      const Scalar* src = cols.data() + static_cast<std::ptrdiff_t>(row) * cols.cols();
      for (int c = 0; c < c_in; ++c) {
        Scalar* plane = dx + static_cast<std::ptrdiff_t>(c) * h * w;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= w) continue;
            plane[iy * w + ix] += src[(c * kh + ky) * kw + kx];
          }
        }
      }
    }
  }
}

// Hook used by finite_diff_check's kink guard: while a recorder is armed,
// relu() appends a copy of each pre-activation it sees. Thread-local so
// concurrent workers never observe each other's probes.
template <typename Scalar>
inline thread_local std::vector<ArrayX<Scalar>>* relu_recorder = nullptr;

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and arithmetic ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "add");
  return make_op<Scalar>(
      a.shape(), a.value() + b.value(), {a, b},
      [](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g;
        if (p[1]) *p[1] += g;
      });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "sub");
  return make_op<Scalar>(
      a.shape(), a.value() - b.value(), {a, b},
      [](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g;
        if (p[1]) *p[1] -= g;
      });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_shape(a, b, "mul");
  ArrayX<Scalar> av = a.value(), bv = b.value();
  return make_op<Scalar>(
      a.shape(), av * bv, {a, b},
      [av, bv](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g * bv;
        if (p[1]) *p[1] += g * av;
      });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  return make_op<Scalar>(
      a.shape(), a.value() * c, {a},
      [c](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g * c;
      });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& a, Scalar c) {
  return make_op<Scalar>(
      a.shape(), a.value() + c, {a},
      [](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g;
      });
}

template <typename Scalar>
Tensor<Scalar> square(const Tensor<Scalar>& a) {
  ArrayX<Scalar> av = a.value();
  return make_op<Scalar>(
      a.shape(), av.square(), {a},
      [av](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g * Scalar(2) * av;
      });
}

// Domain: strictly positive inputs.
template <typename Scalar>
Tensor<Scalar> sqrt(const Tensor<Scalar>& a) {
  ArrayX<Scalar> out = a.value().sqrt();
  return make_op<Scalar>(
      a.shape(), out, {a},
      [out](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g / (Scalar(2) * out);
      });
}

// Domain: strictly positive inputs.
template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& a) {
  ArrayX<Scalar> av = a.value();
  return make_op<Scalar>(
      a.shape(), av.log(), {a},
      [av](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g / av;
      });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  if (detail::relu_recorder<Scalar>) detail::relu_recorder<Scalar>->push_back(a.value());
  ArrayX<Scalar> av = a.value();
  return make_op<Scalar>(
      a.shape(), av.max(Scalar(0)), {a},
      [av](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g * (av > Scalar(0)).template cast<Scalar>();
      });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  ArrayX<Scalar> out(a.numel());
  const auto& av = a.value();
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    const Scalar x = av[i];
    const Scalar e = std::exp(-std::abs(x));
    out[i] = x >= Scalar(0) ? Scalar(1) / (Scalar(1) + e) : e / (Scalar(1) + e);
  }
  return make_op<Scalar>(
      a.shape(), out, {a},
      [out](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g * out * (Scalar(1) - out);
      });
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& a) {
  ArrayX<Scalar> av = a.value();
  ArrayX<Scalar> out(a.numel());
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    const Scalar x = av[i];
    out[i] = std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
  }
  return make_op<Scalar>(
      a.shape(), out, {a},
      [av](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (!p[0]) return;
        ArrayX<Scalar> s(av.size());
        for (Eigen::Index i = 0; i < av.size(); ++i) {
          const Scalar e = std::exp(-std::abs(av[i]));
          s[i] = av[i] >= Scalar(0) ? Scalar(1) / (Scalar(1) + e) : e / (Scalar(1) + e);
        }
        *p[0] += g * s;
      });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  ArrayX<Scalar> v(1);
  v[0] = a.value().sum();
  return make_op<Scalar>(
      {1}, v, {a},
      [](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g[0];
      });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.numel());
  ArrayX<Scalar> v(1);
  v[0] = a.value().sum() * inv;
  return make_op<Scalar>(
      {1}, v, {a},
      [inv](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g[0] * inv;
      });
}

template <typename Scalar>
Tensor<Scalar> mse(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return mean(square(sub(a, b)));
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  return make_op<Scalar>(
      std::move(shape), a.value(), {a},
      [](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g;
      });
}

// Concatenate rank-2 tensors [b, n_i] along columns.
template <typename Scalar>
Tensor<Scalar> concat_cols(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int b = parts[0].dim(0);
  int total = 0;
  for (const auto& t : parts) {
    if (t.rank() != 2 || t.dim(0) != b)
      throw std::invalid_argument("concat_cols: expected [b,n] tensors with equal b, got " + shape_str(t.shape()));
    total += t.dim(1);
  }
  ArrayX<Scalar> v(static_cast<Eigen::Index>(b) * total);
  std::vector<int> widths;
  widths.reserve(parts.size());
  int off = 0;
  for (const auto& t : parts) {
    const int n = t.dim(1);
    widths.push_back(n);
    for (int r = 0; r < b; ++r)
      v.segment(static_cast<Eigen::Index>(r) * total + off, n) = t.value().segment(static_cast<Eigen::Index>(r) * n, n);
    off += n;
  }
  return make_op<Scalar>(
      {b, total}, std::move(v), parts,
      [b, total, widths](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        int o = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
          const int n = widths[i];
          if (p[i]) {
            for (int r = 0; r < b; ++r)
              p[i]->segment(static_cast<Eigen::Index>(r) * n, n) +=
                  g.segment(static_cast<Eigen::Index>(r) * total + o, n);
          }
          o += n;
        }
      });
}

// ---------------------------------------------------------------------------
// Linear layer: out[b,m] = x[b,n] * W[m,n]^T + bias[m]
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || x.dim(1) != weight.dim(1) ||
      bias.dim(0) != weight.dim(0))
    throw std::invalid_argument("linear: shape mismatch x" + shape_str(x.shape()) + " W" +
                                shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
  const int b = x.dim(0), n = x.dim(1), m = weight.dim(0);
  using Map = Eigen::Map<const detail::RowMat<Scalar>>;
  ArrayX<Scalar> out(static_cast<Eigen::Index>(b) * m);
  Eigen::Map<detail::RowMat<Scalar>> O(out.data(), b, m);
  O.noalias() = Map(x.value().data(), b, n) * Map(weight.value().data(), m, n).transpose();
  for (int r = 0; r < b; ++r)
    out.segment(static_cast<Eigen::Index>(r) * m, m) += bias.value();
  ArrayX<Scalar> xv = x.value(), wv = weight.value();
  return make_op<Scalar>(
      {b, m}, std::move(out), {x, weight, bias},
      [b, n, m, xv, wv](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        Eigen::Map<const detail::RowMat<Scalar>> G(g.data(), b, m);
        if (p[0]) {
          Eigen::Map<detail::RowMat<Scalar>> DX(p[0]->data(), b, n);
          DX.noalias() += G * Eigen::Map<const detail::RowMat<Scalar>>(wv.data(), m, n);
        }
        if (p[1]) {
          Eigen::Map<detail::RowMat<Scalar>> DW(p[1]->data(), m, n);
          DW.noalias() += G.transpose() * Eigen::Map<const detail::RowMat<Scalar>>(xv.data(), b, n);
        }
        if (p[2]) {
          Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> DB(p[2]->data(), m);
          DB.noalias() += G.colwise().sum().transpose();
        }
      });
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation (no kernel flip), x[b,ci,h,w] * k[co,ci,kh,kw]
// -> out[b,co,h',w'] with h' = (h + 2*pad - kh)/stride + 1.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernel, int stride = 1, int padding = 0) {
  if (x.rank() != 4 || kernel.rank() != 4 || x.dim(1) != kernel.dim(1))
    throw std::invalid_argument("conv2d: shape mismatch input" + shape_str(x.shape()) + " kernel" +
                                shape_str(kernel.shape()));
  const int b = x.dim(0), ci = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
  const int oh = (h + 2 * padding - kh) / stride + 1;
  const int ow = (w + 2 * padding - kw) / stride + 1;
  if (h + 2 * padding < kh || w + 2 * padding < kw || oh < 1 || ow < 1 ||
      (h + 2 * padding - kh) % stride != 0 || (w + 2 * padding - kw) % stride != 0)
    throw std::invalid_argument("conv2d: spatial extents of input" + shape_str(x.shape()) +
                                " do not admit kernel" + shape_str(kernel.shape()) + " stride " +
                                std::to_string(stride) + " padding " + std::to_string(padding));

  using Map = Eigen::Map<const detail::RowMat<Scalar>>;
  const int cols_n = ci * kh * kw;
  ArrayX<Scalar> out(static_cast<Eigen::Index>(b) * co * oh * ow);
  detail::RowMat<Scalar> cols;
  detail::RowMat<Scalar> omat(oh * ow, co);
  for (int s = 0; s < b; ++s) {
    detail::im2col(x.value().data() + static_cast<std::ptrdiff_t>(s) * ci * h * w, ci, h, w, kh, kw,
                   stride, padding, oh, ow, cols);
    omat.noalias() = cols * Map(kernel.value().data(), co, cols_n).transpose();
    Scalar* dst = out.data() + static_cast<std::ptrdiff_t>(s) * co * oh * ow;
    for (int c = 0; c < co; ++c)
      for (int i = 0; i < oh * ow; ++i) dst[c * oh * ow + i] = omat(i, c);
  }

  ArrayX<Scalar> xv = x.value(), kv = kernel.value();
  return make_op<Scalar>(
      {b, co, oh, ow}, std::move(out), {x, kernel},
      [=](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        detail::RowMat<Scalar> cols2, gmat(oh * ow, co), dcols;
        for (int s = 0; s < b; ++s) {
          const Scalar* gs = g.data() + static_cast<std::ptrdiff_t>(s) * co * oh * ow;
          for (int c = 0; c < co; ++c)
            for (int i = 0; i < oh * ow; ++i) gmat(i, c) = gs[c * oh * ow + i];
          if (p[1]) {
            detail::im2col(xv.data() + static_cast<std::ptrdiff_t>(s) * ci * h * w, ci, h, w, kh, kw,
                           stride, padding, oh, ow, cols2);
            Eigen::Map<detail::RowMat<Scalar>> DK(p[1]->data(), co, cols_n);
            DK.noalias() += gmat.transpose() * cols2;
          }
          if (p[0]) {
            dcols.noalias() = gmat * Map(kv.data(), co, cols_n);
            detail::col2im_add(dcols, ci, h, w, kh, kw, stride, padding, oh, ow,
                               p[0]->data() + static_cast<std::ptrdiff_t>(s) * ci * h * w);
          }
        }
      });
}

// Broadcast a per-channel bias over [b,c,h,w].
template <typename Scalar>
Tensor<Scalar> bias_add_channel(const Tensor<Scalar>& x, const Tensor<Scalar>& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw std::invalid_argument("bias_add_channel: shape mismatch x" + shape_str(x.shape()) + " bias" +
                                shape_str(bias.shape()));
  const int b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  ArrayX<Scalar> out = x.value();
  for (int s = 0; s < b; ++s)
    for (int k = 0; k < c; ++k)
      out.segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw) += bias.value()[k];
  return make_op<Scalar>(
      x.shape(), std::move(out), {x, bias},
      [b, c, hw](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (p[0]) *p[0] += g;
        if (p[1]) {
          for (int s = 0; s < b; ++s)
            for (int k = 0; k < c; ++k)
              (*p[1])[k] += g.segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw).sum();
        }
      });
}

// Expand a [b,1,h,w] map across c channels (the attention broadcast).
template <typename Scalar>
Tensor<Scalar> expand_channel(const Tensor<Scalar>& m, int c) {
  if (m.rank() != 4 || m.dim(1) != 1)
    throw std::invalid_argument("expand_channel: expected [b,1,h,w], got " + shape_str(m.shape()));
  const int b = m.dim(0), hw = m.dim(2) * m.dim(3);
  ArrayX<Scalar> out(static_cast<Eigen::Index>(b) * c * hw);
  for (int s = 0; s < b; ++s)
    for (int k = 0; k < c; ++k)
      out.segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw) =
          m.value().segment(static_cast<Eigen::Index>(s) * hw, hw);
  return make_op<Scalar>(
      {b, c, m.dim(2), m.dim(3)}, std::move(out), {m},
      [b, c, hw](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (!p[0]) return;
        for (int s = 0; s < b; ++s)
          for (int k = 0; k < c; ++k)
            p[0]->segment(static_cast<Eigen::Index>(s) * hw, hw) +=
                g.segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw);
      });
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& x) {
  if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: expected [b,c,h,w], got " + shape_str(x.shape()));
  const int b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(hw);
  ArrayX<Scalar> out(static_cast<Eigen::Index>(b) * c);
  for (int s = 0; s < b; ++s)
    for (int k = 0; k < c; ++k)
      out[static_cast<Eigen::Index>(s) * c + k] =
          x.value().segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw).sum() * inv;
  return make_op<Scalar>(
      {b, c}, std::move(out), {x},
      [b, c, hw, inv](const ArrayX<Scalar>& g, std::vector<ArrayX<Scalar>*>& p) {
        if (!p[0]) return;
        for (int s = 0; s < b; ++s)
          for (int k = 0; k < c; ++k)
            p[0]->segment(static_cast<Eigen::Index>(s) * c * hw + k * hw, hw) +=
                g[static_cast<Eigen::Index>(s) * c + k] * inv;
      });
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

// RAII guard that arms the relu pre-activation recorder on this thread.
template <typename Scalar>
class ReluRecorderGuard {
 public:
  explicit ReluRecorderGuard(std::vector<ArrayX<Scalar>>& sink) {
    prev_ = detail::relu_recorder<Scalar>;
    detail::relu_recorder<Scalar> = &sink;
  }
  ~ReluRecorderGuard() { detail::relu_recorder<Scalar> = prev_; }

 private:
  std::vector<ArrayX<Scalar>>* prev_;
};

namespace detail {

// A coordinate is excluded when a relu pre-activation sits on (or crosses)
// its kink within the +-eps probe: any sign flip between the two probe
// evaluations, or magnitude below 10*eps in either.
template <typename Scalar>
bool kink_hit(const std::vector<ArrayX<Scalar>>& plus, const std::vector<ArrayX<Scalar>>& minus, Scalar eps) {
  if (plus.size() != minus.size()) return true;  // structure changed; treat as kink
  const Scalar thresh = Scalar(10) * eps;
  for (std::size_t i = 0; i < plus.size(); ++i) {
    if (plus[i].size() != minus[i].size()) return true;
    for (Eigen::Index j = 0; j < plus[i].size(); ++j) {
      const Scalar a = plus[i][j], b = minus[i][j];
      if ((a > 0) != (b > 0)) return true;
      if (std::abs(a) < thresh || std::abs(b) < thresh) return true;
    }
  }
  return false;
}

template <typename Scalar>
Scalar rel_err(Scalar a, Scalar b) {
  const Scalar floor = Scalar(1e-6);
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace detail

// Central differences against backward() gradients for a scalar-valued map
// of one tensor. Returns the worst relative error over the non-excluded
// coordinates. eps should be in [1e-7, 1e-3]; use double precision.
template <typename Scalar>
Scalar finite_diff_check(const std::function<Tensor<Scalar>(const Tensor<Scalar>&)>& f,
                         const Tensor<Scalar>& point, Scalar eps) {
  Tensor<Scalar> x = Tensor<Scalar>::from_array(point.shape(), point.value());
  x.set_requires_grad(true);
  Tensor<Scalar> y = f(x);
  if (y.numel() != 1) throw std::invalid_argument("finite_diff_check: f must return a scalar");
  y.backward();
  ArrayX<Scalar> analytic = x.grad();

  Scalar worst = Scalar(0);
  for (int i = 0; i < point.numel(); ++i) {
    ArrayX<Scalar> v = point.value();
    std::vector<ArrayX<Scalar>> rec_plus, rec_minus;
    v[i] = point.value()[i] + eps;
    Scalar fp;
    {
      ReluRecorderGuard<Scalar> guard(rec_plus);
      fp = f(Tensor<Scalar>::from_array(point.shape(), v)).item();
    }
    v[i] = point.value()[i] - eps;
    Scalar fm;
    {
      ReluRecorderGuard<Scalar> guard(rec_minus);
      fm = f(Tensor<Scalar>::from_array(point.shape(), v)).item();
    }
    if (detail::kink_hit(rec_plus, rec_minus, eps)) continue;
    const Scalar numeric = (fp - fm) / (Scalar(2) * eps);
    worst = std::max(worst, detail::rel_err(analytic[i], numeric));
  }
  return worst;
}

// Probe variant for losses over persistent parameter leaves: checks
// d(loss)/d(param[coord]) for each (tensor, coordinate) pair by perturbing
// the leaf values in place.
template <typename Scalar>
Scalar finite_diff_check_params(const std::function<Tensor<Scalar>()>& loss_fn,
                                const std::vector<std::pair<Tensor<Scalar>, int>>& coords, Scalar eps) {
  for (auto& [t, i] : coords) {
    (void)i;
    const_cast<Tensor<Scalar>&>(t).zero_grad();
  }
  Tensor<Scalar> y = loss_fn();
  if (y.numel() != 1) throw std::invalid_argument("finite_diff_check_params: loss must be scalar");
  y.backward();

  Scalar worst = Scalar(0);
  for (const auto& [t, i] : coords) {
    Tensor<Scalar>& leaf = const_cast<Tensor<Scalar>&>(t);
    const Scalar saved = leaf.value()[i];
    const Scalar analytic = leaf.grad()[i];
    std::vector<ArrayX<Scalar>> rec_plus, rec_minus;
    leaf.value()[i] = saved + eps;
    Scalar fp;
    {
      ReluRecorderGuard<Scalar> guard(rec_plus);
      fp = loss_fn().item();
    }
    leaf.value()[i] = saved - eps;
    Scalar fm;
    {
      ReluRecorderGuard<Scalar> guard(rec_minus);
      fm = loss_fn().item();
    }
    leaf.value()[i] = saved;
    if (detail::kink_hit(rec_plus, rec_minus, eps)) continue;
    const Scalar numeric = (fp - fm) / (Scalar(2) * eps);
    worst = std::max(worst, detail::rel_err(analytic, numeric));
  }
  return worst;
}

}  // namespace mvil
