#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "gpa/tensor.hpp"

namespace gpa {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using ArrX = Eigen::Array<S, Eigen::Dynamic, 1>;

template <class S>
Eigen::Map<MatRM<S>> map2d(Tensor<S>& t, int64_t rows, int64_t cols) {
  return {t.ptr(), rows, cols};
}
template <class S>
Eigen::Map<const MatRM<S>> map2d(const Tensor<S>& t, int64_t rows,
                                 int64_t cols) {
  return {t.ptr(), rows, cols};
}
template <class S>
Eigen::Map<ArrX<S>> map1d(std::vector<S>& v) {
  return {v.data(), static_cast<int64_t>(v.size())};
}
template <class S>
Eigen::Map<const ArrX<S>> map1d(const std::vector<S>& v) {
  return {v.data(), static_cast<int64_t>(v.size())};
}

template <class S>
inline void accumulate_into(std::vector<S>& dst, const std::vector<S>& src) {
  map1d(dst) += map1d(src);
}

template <class S>
bool all_finite(const Tensor<S>& t) {
  for (S v : t.data())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// ---- elementwise -----------------------------------------------------------

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  check_shape(a.shape() == b.shape(), "add: shape mismatch " +
                                          shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) + map1d(b.data());
  if (detail::grad_wanted<S>({&a, &b})) {
    detail::mark_recorded(out, [a = a, b = b, out]() mutable {
      if (a.requires_grad()) accumulate_into(a.grad(), out.grad());
      if (b.requires_grad()) accumulate_into(b.grad(), out.grad());
    });
  }
  return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  check_shape(a.shape() == b.shape(), "sub: shape mismatch " +
                                          shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) - map1d(b.data());
  if (detail::grad_wanted<S>({&a, &b})) {
    detail::mark_recorded(out, [a = a, b = b, out]() mutable {
      if (a.requires_grad()) accumulate_into(a.grad(), out.grad());
      if (b.requires_grad()) map1d(b.grad()) -= map1d(out.grad());
    });
  }
  return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  check_shape(a.shape() == b.shape(), "mul: shape mismatch " +
                                          shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) * map1d(b.data());
  if (detail::grad_wanted<S>({&a, &b})) {
    detail::mark_recorded(out, [a = a, b = b, out]() mutable {
      if (a.requires_grad())
        map1d(a.grad()) += map1d(out.grad()) * map1d(b.data());
      if (b.requires_grad())
        map1d(b.grad()) += map1d(out.grad()) * map1d(a.data());
    });
  }
  return out;
}

template <class S>
Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b) {
  check_shape(a.shape() == b.shape(), "div: shape mismatch " +
                                          shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) / map1d(b.data());
  if (detail::grad_wanted<S>({&a, &b})) {
    detail::mark_recorded(out, [a = a, b = b, out]() mutable {
      if (a.requires_grad())
        map1d(a.grad()) += map1d(out.grad()) / map1d(b.data());
      if (b.requires_grad())
        map1d(b.grad()) -= map1d(out.grad()) * map1d(a.data()) /
                           (map1d(b.data()) * map1d(b.data()));
    });
  }
  return out;
}

template <class S>
Tensor<S> add_scalar(const Tensor<S>& a, S c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) + c;
  if (detail::grad_wanted<S>({&a})) {
    detail::mark_recorded(out, [a = a, out]() mutable {
      if (a.requires_grad()) accumulate_into(a.grad(), out.grad());
    });
  }
  return out;
}

template <class S>
Tensor<S> mul_scalar(const Tensor<S>& a, S c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  map1d(out.data()) = map1d(a.data()) * c;
  if (detail::grad_wanted<S>({&a})) {
    detail::mark_recorded(out, [a = a, out, c]() mutable {
      if (a.requires_grad()) map1d(a.grad()) += map1d(out.grad()) * c;
    });
  }
  return out;
}

template <class S>
Tensor<S> sum(const Tensor<S>& a) {
  Tensor<S> out = Tensor<S>::scalar(map1d(a.data()).sum());
  if (detail::grad_wanted<S>({&a})) {
    detail::mark_recorded(out, [a = a, out]() mutable {
      if (a.requires_grad()) map1d(a.grad()) += out.grad()[0];
    });
  }
  return out;
}

// x * Phi(x), tanh approximation.
template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
  const S c0 = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const S c1 = static_cast<S>(0.044715);
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    S v = x[i];
    out[i] = S(0.5) * v * (S(1) + std::tanh(c0 * (v + c1 * v * v * v)));
  }
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, c0, c1]() mutable {
      if (!x.requires_grad()) return;
      const int64_t m = x.numel();
      auto& g = x.grad();
      const auto& go = out.grad();
      for (int64_t i = 0; i < m; ++i) {
        S v = x[i];
        S t = std::tanh(c0 * (v + c1 * v * v * v));
        S d = S(0.5) * (S(1) + t) +
              S(0.5) * v * (S(1) - t * t) * c0 * (S(1) + S(3) * c1 * v * v);
        g[static_cast<size_t>(i)] += go[static_cast<size_t>(i)] * d;
      }
    });
  }
  return out;
}

// ---- matrix ops -------------------------------------------------------------

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
  check_shape(a.ndim() == 2 && b.ndim() == 2,
              "matmul: expects 2-d operands, got " + shape_str(a.shape()) +
                  " and " + shape_str(b.shape()));
  const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  check_shape(b.dim(0) == k, "matmul: inner dims differ, " +
                                 shape_str(a.shape()) + " vs " +
                                 shape_str(b.shape()));
  Tensor<S> out = Tensor<S>::zeros({m, n});
  map2d(out, m, n).noalias() = map2d(a, m, k) * map2d(b, k, n);
  if (detail::grad_wanted<S>({&a, &b})) {
    detail::mark_recorded(out, [a = a, b = b, out, m, k = k, n]() mutable {
      Eigen::Map<const MatRM<S>> go(out.grad().data(), m, n);
      if (a.requires_grad()) {
        Eigen::Map<MatRM<S>> ga(a.grad().data(), m, k);
        ga.noalias() += go * map2d(b, k, n).transpose();
      }
      if (b.requires_grad()) {
        Eigen::Map<MatRM<S>> gb(b.grad().data(), k, n);
        gb.noalias() += map2d(a, m, k).transpose() * go;
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> transpose2d(const Tensor<S>& a) {
  check_shape(a.ndim() == 2, "transpose: expects 2-d, got " +
                                 shape_str(a.shape()));
  const int64_t m = a.dim(0), n = a.dim(1);
  Tensor<S> out = Tensor<S>::zeros({n, m});
  map2d(out, n, m) = map2d(a, m, n).transpose();
  if (detail::grad_wanted<S>({&a})) {
    detail::mark_recorded(out, [a = a, out, m, n]() mutable {
      if (!a.requires_grad()) return;
      Eigen::Map<MatRM<S>> ga(a.grad().data(), m, n);
      Eigen::Map<const MatRM<S>> go(out.grad().data(), n, m);
      ga += go.transpose();
    });
  }
  return out;
}

// x[n,d] + b[d] broadcast over rows.
template <class S>
Tensor<S> add_bias_rows(const Tensor<S>& x, const Tensor<S>& b) {
  check_shape(x.ndim() == 2 && b.numel() == x.dim(1),
              "bias: " + shape_str(b.shape()) + " does not match columns of " +
                  shape_str(x.shape()));
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  map2d(out, n, d) = map2d(x, n, d).rowwise() +
                     Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(
                         b.ptr(), d);
  if (detail::grad_wanted<S>({&x, &b})) {
    detail::mark_recorded(out, [x = x, b = b, out, n, d]() mutable {
      Eigen::Map<const MatRM<S>> go(out.grad().data(), n, d);
      if (x.requires_grad()) {
        Eigen::Map<MatRM<S>> gx(x.grad().data(), n, d);
        gx += go;
      }
      if (b.requires_grad()) {
        Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>> gb(b.grad().data(), d);
        gb += go.colwise().sum();
      }
    });
  }
  return out;
}

template <class S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b) {
  return add_bias_rows(matmul(x, w), b);
}

template <class S>
Tensor<S> row_slice(const Tensor<S>& x, int64_t r0, int64_t r1) {
  check_shape(x.ndim() == 2 && 0 <= r0 && r0 < r1 && r1 <= x.dim(0),
              "row_slice: bad range");
  const int64_t n = x.dim(1);
  Tensor<S> out = Tensor<S>::zeros({r1 - r0, n});
  std::copy_n(x.ptr() + r0 * n, (r1 - r0) * n, out.ptr());
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, r0, n]() mutable {
      if (!x.requires_grad()) return;
      auto& gx = x.grad();
      const auto& go = out.grad();
      for (size_t i = 0; i < go.size(); ++i)
        gx[static_cast<size_t>(r0 * n) + i] += go[i];
    });
  }
  return out;
}

template <class S>
Tensor<S> col_slice(const Tensor<S>& x, int64_t c0, int64_t c1) {
  check_shape(x.ndim() == 2 && 0 <= c0 && c0 < c1 && c1 <= x.dim(1),
              "col_slice: bad range");
  const int64_t m = x.dim(0), n = x.dim(1), w = c1 - c0;
  Tensor<S> out = Tensor<S>::zeros({m, w});
  map2d(out, m, w) = map2d(x, m, n).middleCols(c0, w);
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, c0, m, n, w]() mutable {
      if (!x.requires_grad()) return;
      Eigen::Map<MatRM<S>> gx(x.grad().data(), m, n);
      Eigen::Map<const MatRM<S>> go(out.grad().data(), m, w);
      gx.middleCols(c0, w) += go;
    });
  }
  return out;
}

template <class S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
  check_shape(!parts.empty(), "concat_cols: no operands");
  const int64_t m = parts[0].dim(0);
  int64_t total = 0;
  for (const auto& p : parts) {
    check_shape(p.ndim() == 2 && p.dim(0) == m,
                "concat_cols: row counts differ");
    total += p.dim(1);
  }
  Tensor<S> out = Tensor<S>::zeros({m, total});
  int64_t off = 0;
  for (const auto& p : parts) {
    map2d(out, m, total).middleCols(off, p.dim(1)) = map2d(p, m, p.dim(1));
    off += p.dim(1);
  }
  bool wants = false;
  for (const auto& p : parts)
    if (p.requires_grad()) wants = true;
  if (Tape<S>::active() && wants) {
    detail::mark_recorded(out, [parts = parts, out, m, total]() mutable {
      Eigen::Map<const MatRM<S>> go(out.grad().data(), m, total);
      int64_t off2 = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          Eigen::Map<MatRM<S>> gp(p.grad().data(), m, p.dim(1));
          gp += go.middleCols(off2, p.dim(1));
        }
        off2 += p.dim(1);
      }
    });
  }
  return out;
}

// ---- softmax / layer norm ---------------------------------------------------

// Stable softmax along `axis`; slices are shifted by their max before exp.
template <class S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
  check_shape(axis >= 0 && axis < static_cast<int>(x.ndim()),
              "softmax: axis " + std::to_string(axis) + " out of range for " +
                  shape_str(x.shape()));
  const auto& sh = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= sh[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < sh.size(); ++i)
    inner *= sh[i];
  const int64_t len = sh[static_cast<size_t>(axis)];

  Tensor<S> out = Tensor<S>::zeros(sh);
  const S* in = x.ptr();
  S* o = out.ptr();
  for (int64_t a = 0; a < outer; ++a) {
    for (int64_t b = 0; b < inner; ++b) {
      const int64_t base = a * len * inner + b;
      S mx = in[base];
      for (int64_t j = 1; j < len; ++j)
        mx = std::max(mx, in[base + j * inner]);
      S total = S(0);
      for (int64_t j = 0; j < len; ++j) {
        S e = std::exp(in[base + j * inner] - mx);
        o[base + j * inner] = e;
        total += e;
      }
      const S inv = S(1) / total;
      for (int64_t j = 0; j < len; ++j) o[base + j * inner] *= inv;
    }
  }
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, outer, inner, len]() mutable {
      if (!x.requires_grad()) return;
      auto& gx = x.grad();
      const auto& go = out.grad();
      const S* p = out.ptr();
      for (int64_t a = 0; a < outer; ++a) {
        for (int64_t b = 0; b < inner; ++b) {
          const int64_t base = a * len * inner + b;
          S dot = S(0);
          for (int64_t j = 0; j < len; ++j) {
            const int64_t idx = base + j * inner;
            dot += go[static_cast<size_t>(idx)] * p[idx];
          }
          for (int64_t j = 0; j < len; ++j) {
            const int64_t idx = base + j * inner;
            gx[static_cast<size_t>(idx)] +=
                p[idx] * (go[static_cast<size_t>(idx)] - dot);
          }
        }
      }
    });
  }
  return out;
}

// Normalizes each row of x[n,d] to zero mean / unit variance, then scales and
// shifts by gamma/beta.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma,
                     const Tensor<S>& beta, S eps = static_cast<S>(1e-5)) {
  check_shape(x.ndim() == 2, "layer_norm: expects [tokens, features], got " +
                                 shape_str(x.shape()));
  const int64_t n = x.dim(0), d = x.dim(1);
  check_shape(gamma.numel() == d && beta.numel() == d,
              "layer_norm: gamma/beta must have " + std::to_string(d) +
                  " features");
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  std::vector<S> inv_sigma(static_cast<size_t>(n));
  std::vector<S> xhat(static_cast<size_t>(n * d));
  for (int64_t i = 0; i < n; ++i) {
    const S* row = x.ptr() + i * d;
    S mean = S(0);
    for (int64_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<S>(d);
    S var = S(0);
    for (int64_t j = 0; j < d; ++j) {
      S c = row[j] - mean;
      var += c * c;
    }
    var /= static_cast<S>(d);
    const S is = S(1) / std::sqrt(var + eps);
    inv_sigma[static_cast<size_t>(i)] = is;
    S* orow = out.ptr() + i * d;
    S* hrow = xhat.data() + i * d;
    for (int64_t j = 0; j < d; ++j) {
      S h = (row[j] - mean) * is;
      hrow[j] = h;
      orow[j] = gamma[j] * h + beta[j];
    }
  }
  if (detail::grad_wanted<S>({&x, &gamma, &beta})) {
    detail::mark_recorded(
        out, [x = x, gamma = gamma, beta = beta, out, n, d, inv_sigma = std::move(inv_sigma), xhat = std::move(xhat)]() mutable {
          const auto& go = out.grad();
          for (int64_t i = 0; i < n; ++i) {
            const S* grow = go.data() + i * d;
            const S* hrow = xhat.data() + i * d;
            if (gamma.requires_grad() || beta.requires_grad()) {
              auto& gg = gamma.grad();
              auto& gb = beta.grad();
              for (int64_t j = 0; j < d; ++j) {
                if (gamma.requires_grad()) gg[j] += grow[j] * hrow[j];
                if (beta.requires_grad()) gb[j] += grow[j];
              }
            }
            if (x.requires_grad()) {
              S sum_g = S(0), sum_gh = S(0);
              for (int64_t j = 0; j < d; ++j) {
                S gj = grow[j] * gamma[j];
                sum_g += gj;
                sum_gh += gj * hrow[j];
              }
              const S inv_d = S(1) / static_cast<S>(d);
              const S is = inv_sigma[static_cast<size_t>(i)];
              auto& gx = x.grad();
              for (int64_t j = 0; j < d; ++j) {
                S gj = grow[j] * gamma[j];
                gx[static_cast<size_t>(i * d + j)] +=
                    is * (gj - inv_d * sum_g - hrow[j] * inv_d * sum_gh);
              }
            }
          }
        });
  }
  return out;
}

// ---- layout -----------------------------------------------------------------

// [N,d] tokens (patch-grid row-major) -> [d, gd, gh, gw] volume.
template <class S>
Tensor<S> tokens_to_volume(const Tensor<S>& tokens, const GridDims& grid) {
  check_shape(tokens.ndim() == 2 && tokens.dim(0) == grid.count(),
              "tokens_to_volume: " + shape_str(tokens.shape()) +
                  " does not cover grid " + grid_str(grid));
  Tensor<S> t = transpose2d(tokens);
  return t.reshaped({tokens.dim(1), grid.d, grid.h, grid.w});
}

// [C, gd, gh, gw] volume -> [N, C] tokens.
template <class S>
Tensor<S> volume_to_tokens(const Tensor<S>& vol) {
  check_shape(vol.ndim() == 4, "volume_to_tokens: expects [C,D,H,W], got " +
                                   shape_str(vol.shape()));
  const int64_t c = vol.dim(0);
  const int64_t n = vol.dim(1) * vol.dim(2) * vol.dim(3);
  return transpose2d(vol.reshaped({c, n}));
}

// Splits [C,D,H,W] into non-overlapping p^3 patches, flattening each to a row
// of C*p^3 features (patch-grid row-major, channel-major within a row).
template <class S>
Tensor<S> patchify(const Tensor<S>& vol, int64_t p) {
  check_shape(vol.ndim() == 4, "patchify: expects [C,D,H,W]");
  const int64_t c = vol.dim(0), D = vol.dim(1), H = vol.dim(2), W = vol.dim(3);
  check_shape(D % p == 0 && H % p == 0 && W % p == 0,
              "patchify: extents " + shape_str(vol.shape()) +
                  " not divisible by " + std::to_string(p));
  const int64_t gd = D / p, gh = H / p, gw = W / p;
  const int64_t n = gd * gh * gw, f = c * p * p * p;
  Tensor<S> out = Tensor<S>::zeros({n, f});
  const S* src = vol.ptr();
  S* dst = out.ptr();
  auto voxel = [&](int64_t ci, int64_t z, int64_t y, int64_t x) {
    return src[((ci * D + z) * H + y) * W + x];
  };
  for (int64_t pd = 0; pd < gd; ++pd)
    for (int64_t ph = 0; ph < gh; ++ph)
      for (int64_t pw = 0; pw < gw; ++pw) {
        S* row = dst + ((pd * gh + ph) * gw + pw) * f;
        int64_t k = 0;
        for (int64_t ci = 0; ci < c; ++ci)
          for (int64_t dz = 0; dz < p; ++dz)
            for (int64_t dy = 0; dy < p; ++dy)
              for (int64_t dx = 0; dx < p; ++dx)
                row[k++] = voxel(ci, pd * p + dz, ph * p + dy, pw * p + dx);
      }
  if (detail::grad_wanted<S>({&vol})) {
    detail::mark_recorded(out, [vol = vol, out, p, c, D, H, W, gd, gh, gw, f]() mutable {
      if (!vol.requires_grad()) return;
      auto& gv = vol.grad();
      const auto& go = out.grad();
      for (int64_t pd = 0; pd < gd; ++pd)
        for (int64_t ph = 0; ph < gh; ++ph)
          for (int64_t pw = 0; pw < gw; ++pw) {
            const S* row = go.data() + ((pd * gh + ph) * gw + pw) * f;
            int64_t k = 0;
            for (int64_t ci = 0; ci < c; ++ci)
              for (int64_t dz = 0; dz < p; ++dz)
                for (int64_t dy = 0; dy < p; ++dy)
                  for (int64_t dx = 0; dx < p; ++dx)
                    gv[static_cast<size_t>(
                        ((ci * D + pd * p + dz) * H + ph * p + dy) * W +
                        pw * p + dx)] += row[k++];
          }
    });
  }
  return out;
}

}  // namespace gpa
