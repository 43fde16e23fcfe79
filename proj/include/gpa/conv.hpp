#pragma once

#include <Eigen/Dense>

#include "gpa/ops.hpp"

namespace gpa {

namespace detail {

inline int64_t conv_out_extent(int64_t in, int64_t k, int64_t stride,
                               int64_t padding) {
  return (in + 2 * padding - k) / stride + 1;
}

// Gathers the im2col block for output rows od in [od0, od1):
// col[(ci,kd,kh,kw), (od,oh,ow)] = padded input value under that tap.
template <class S>
void fill_col(const S* in, int64_t cin, int64_t D, int64_t H, int64_t W,
              int64_t k, int64_t stride, int64_t padding, int64_t oh_n,
              int64_t ow_n, int64_t od0, int64_t od1, S* col) {
  const int64_t slab = (od1 - od0) * oh_n * ow_n;
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t kd = 0; kd < k; ++kd)
      for (int64_t kh = 0; kh < k; ++kh)
        for (int64_t kw = 0; kw < k; ++kw) {
          S* row = col + (((ci * k + kd) * k + kh) * k + kw) * slab;
          int64_t p = 0;
          for (int64_t od = od0; od < od1; ++od) {
            const int64_t id = od * stride + kd - padding;
            for (int64_t oh = 0; oh < oh_n; ++oh) {
              const int64_t ih = oh * stride + kh - padding;
              if (id < 0 || id >= D || ih < 0 || ih >= H) {
                for (int64_t ow = 0; ow < ow_n; ++ow) row[p++] = S(0);
                continue;
              }
              const S* base = in + ((ci * D + id) * H + ih) * W;
              for (int64_t ow = 0; ow < ow_n; ++ow) {
                const int64_t iw = ow * stride + kw - padding;
                row[p++] = (iw < 0 || iw >= W) ? S(0) : base[iw];
              }
            }
          }
        }
}

// Scatter-add of an im2col block back onto the input gradient.
template <class S>
void scatter_col(const S* col, int64_t cin, int64_t D, int64_t H, int64_t W,
                 int64_t k, int64_t stride, int64_t padding, int64_t oh_n,
                 int64_t ow_n, int64_t od0, int64_t od1, S* gin) {
  const int64_t slab = (od1 - od0) * oh_n * ow_n;
  for (int64_t ci = 0; ci < cin; ++ci)
    for (int64_t kd = 0; kd < k; ++kd)
      for (int64_t kh = 0; kh < k; ++kh)
        for (int64_t kw = 0; kw < k; ++kw) {
          const S* row = col + (((ci * k + kd) * k + kh) * k + kw) * slab;
          int64_t p = 0;
          for (int64_t od = od0; od < od1; ++od) {
            const int64_t id = od * stride + kd - padding;
            for (int64_t oh = 0; oh < oh_n; ++oh) {
              const int64_t ih = oh * stride + kh - padding;
              if (id < 0 || id >= D || ih < 0 || ih >= H) {
                p += ow_n;
                continue;
              }
              S* base = gin + ((ci * D + id) * H + ih) * W;
              for (int64_t ow = 0; ow < ow_n; ++ow, ++p) {
                const int64_t iw = ow * stride + kw - padding;
                if (iw >= 0 && iw < W) base[iw] += row[p];
              }
            }
          }
        }
}

// Output-depth slab sizing keeps the im2col buffer bounded.
inline int64_t conv_slab_rows(int64_t q, int64_t od_n, int64_t oh_n,
                              int64_t ow_n) {
  const int64_t budget = 8 << 20;  // floats
  int64_t rows = std::max<int64_t>(1, budget / std::max<int64_t>(1, q * oh_n * ow_n));
  return std::min(rows, od_n);
}

}  // namespace detail

// 3D convolution over [C_in,D,H,W] with an odd cubic kernel. Default padding
// (k-1)/2 keeps stride-1 extents unchanged.
template <class S>
Tensor<S> conv3d(const Tensor<S>& input, const Tensor<S>& weight,
                 const Tensor<S>& bias, int64_t stride = 1,
                 int64_t padding = -1) {
  check_shape(input.ndim() == 4, "conv3d: input must be [C,D,H,W], got " +
                                     shape_str(input.shape()));
  check_shape(weight.ndim() == 5 && weight.dim(2) == weight.dim(3) &&
                  weight.dim(3) == weight.dim(4),
              "conv3d: weight must be [C_out,C_in,k,k,k], got " +
                  shape_str(weight.shape()));
  const int64_t cin = input.dim(0), D = input.dim(1), H = input.dim(2),
                W = input.dim(3);
  const int64_t cout = weight.dim(0), k = weight.dim(2);
  check_shape(k % 2 == 1, "conv3d: kernel extent must be odd, got " +
                              std::to_string(k));
  check_shape(weight.dim(1) == cin,
              "conv3d: input channels " + std::to_string(cin) +
                  " != weight channels " + std::to_string(weight.dim(1)));
  check_shape(bias.numel() == cout, "conv3d: bias must have C_out entries");
  check_shape(stride >= 1, "conv3d: stride must be positive");
  if (padding < 0) padding = (k - 1) / 2;

  const int64_t od_n = detail::conv_out_extent(D, k, stride, padding);
  const int64_t oh_n = detail::conv_out_extent(H, k, stride, padding);
  const int64_t ow_n = detail::conv_out_extent(W, k, stride, padding);
  check_shape(od_n > 0 && oh_n > 0 && ow_n > 0,
              "conv3d: kernel larger than padded input");
  const int64_t q = cin * k * k * k;

  Tensor<S> out = Tensor<S>::zeros({cout, od_n, oh_n, ow_n});
  const int64_t slab_rows = detail::conv_slab_rows(q, od_n, oh_n, ow_n);
  std::vector<S> col(static_cast<size_t>(q * slab_rows * oh_n * ow_n));
  Eigen::Map<const MatRM<S>> wm(weight.ptr(), cout, q);
  for (int64_t od0 = 0; od0 < od_n; od0 += slab_rows) {
    const int64_t od1 = std::min(od_n, od0 + slab_rows);
    const int64_t p = (od1 - od0) * oh_n * ow_n;
    detail::fill_col(input.ptr(), cin, D, H, W, k, stride, padding, oh_n, ow_n,
                     od0, od1, col.data());
    // out[:, od0:od1] viewed as cout x p, stride od_n*oh_n*ow_n between rows
    Eigen::Map<MatRM<S>, 0, Eigen::OuterStride<>> om(
        out.ptr() + od0 * oh_n * ow_n, cout, p,
        Eigen::OuterStride<>(od_n * oh_n * ow_n));
    Eigen::Map<const MatRM<S>> cm(col.data(), q, p);
    om.noalias() = wm * cm;
  }
  for (int64_t co = 0; co < cout; ++co) {
    S* base = out.ptr() + co * od_n * oh_n * ow_n;
    const S b = bias[co];
    for (int64_t i = 0; i < od_n * oh_n * ow_n; ++i) base[i] += b;
  }

  if (detail::grad_wanted<S>({&input, &weight, &bias})) {
    detail::mark_recorded(out, [input = input, weight = weight, bias = bias, out, cin, D, H, W, cout, k = k, stride, padding, od_n, oh_n, ow_n, q = q]() mutable {
      const int64_t vox = od_n * oh_n * ow_n;
      const auto& go = out.grad();
      if (bias.requires_grad()) {
        auto& gb = bias.grad();
        for (int64_t co = 0; co < cout; ++co) {
          S acc = S(0);
          const S* base = go.data() + co * vox;
          for (int64_t i = 0; i < vox; ++i) acc += base[i];
          gb[static_cast<size_t>(co)] += acc;
        }
      }
      if (!input.requires_grad() && !weight.requires_grad()) return;
      const int64_t slab_rows = detail::conv_slab_rows(q, od_n, oh_n, ow_n);
      std::vector<S> col(static_cast<size_t>(q * slab_rows * oh_n * ow_n));
      std::vector<S> colg;
      if (input.requires_grad())
        colg.resize(static_cast<size_t>(q * slab_rows * oh_n * ow_n));
      Eigen::Map<const MatRM<S>> wm(weight.ptr(), cout, q);
      for (int64_t od0 = 0; od0 < od_n; od0 += slab_rows) {
        const int64_t od1 = std::min(od_n, od0 + slab_rows);
        const int64_t p = (od1 - od0) * oh_n * ow_n;
        Eigen::Map<const MatRM<S>, 0, Eigen::OuterStride<>> gm(
            go.data() + od0 * oh_n * ow_n, cout, p,
            Eigen::OuterStride<>(vox));
        if (weight.requires_grad()) {
          detail::fill_col(input.ptr(), cin, D, H, W, k, stride, padding,
                           oh_n, ow_n, od0, od1, col.data());
          Eigen::Map<const MatRM<S>> cm(col.data(), q, p);
          Eigen::Map<MatRM<S>> gw(weight.grad().data(), cout, q);
          gw.noalias() += gm * cm.transpose();
        }
        if (input.requires_grad()) {
          Eigen::Map<MatRM<S>> cg(colg.data(), q, p);
          cg.noalias() = wm.transpose() * gm;
          detail::scatter_col(colg.data(), cin, D, H, W, k, stride, padding,
                              oh_n, ow_n, od0, od1, input.grad().data());
        }
      }
    });
  }
  return out;
}

// Trilinear interpolation by an integer factor, half-voxel centers
// (corner alignment off), borders clamped.
template <class S>
Tensor<S> trilinear_upsample(const Tensor<S>& x, int64_t factor) {
  check_shape(x.ndim() == 4, "trilinear_upsample: expects [C,D,H,W]");
  check_shape(factor >= 1, "trilinear_upsample: factor must be >= 1");
  if (factor == 1) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    if (detail::grad_wanted<S>({&x})) {
      detail::mark_recorded(out, [x = x, out]() mutable {
        if (x.requires_grad()) accumulate_into(x.grad(), out.grad());
      });
    }
    return out;
  }
  const int64_t c = x.dim(0), D = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OD = D * factor, OH = H * factor, OW = W * factor;

  struct Tap {
    int64_t lo, hi;
    S w_hi;
  };
  auto make_taps = [factor](int64_t in_n, int64_t out_n) {
    std::vector<Tap> taps(static_cast<size_t>(out_n));
    for (int64_t o = 0; o < out_n; ++o) {
      double pos = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
      pos = std::min(std::max(pos, 0.0), static_cast<double>(in_n - 1));
      int64_t lo = static_cast<int64_t>(pos);
      int64_t hi = std::min(lo + 1, in_n - 1);
      taps[static_cast<size_t>(o)] = {lo, hi, static_cast<S>(pos - static_cast<double>(lo))};
    }
    return taps;
  };
  const auto td = make_taps(D, OD), th = make_taps(H, OH), tw = make_taps(W, OW);

  Tensor<S> out = Tensor<S>::zeros({c, OD, OH, OW});
  const S* in = x.ptr();
  S* o = out.ptr();
  for (int64_t ci = 0; ci < c; ++ci) {
    const S* cb = in + ci * D * H * W;
    for (int64_t z = 0; z < OD; ++z) {
      const auto& az = td[static_cast<size_t>(z)];
      for (int64_t y = 0; y < OH; ++y) {
        const auto& ay = th[static_cast<size_t>(y)];
        const S* p00 = cb + (az.lo * H + ay.lo) * W;
        const S* p01 = cb + (az.lo * H + ay.hi) * W;
        const S* p10 = cb + (az.hi * H + ay.lo) * W;
        const S* p11 = cb + (az.hi * H + ay.hi) * W;
        S* orow = o + ((ci * OD + z) * OH + y) * OW;
        for (int64_t xo = 0; xo < OW; ++xo) {
          const auto& ax = tw[static_cast<size_t>(xo)];
          const S wz = az.w_hi, wy = ay.w_hi, wx = ax.w_hi;
          const S v00 = p00[ax.lo] * (S(1) - wx) + p00[ax.hi] * wx;
          const S v01 = p01[ax.lo] * (S(1) - wx) + p01[ax.hi] * wx;
          const S v10 = p10[ax.lo] * (S(1) - wx) + p10[ax.hi] * wx;
          const S v11 = p11[ax.lo] * (S(1) - wx) + p11[ax.hi] * wx;
          orow[xo] = (v00 * (S(1) - wy) + v01 * wy) * (S(1) - wz) +
                     (v10 * (S(1) - wy) + v11 * wy) * wz;
        }
      }
    }
  }
  if (detail::grad_wanted<S>({&x})) {
    detail::mark_recorded(out, [x = x, out, c, D, H, W, OD, OH, OW, td, th, tw]() mutable {
      if (!x.requires_grad()) return;
      auto& gx = x.grad();
      const auto& go = out.grad();
      for (int64_t ci = 0; ci < c; ++ci) {
        S* cb = gx.data() + ci * D * H * W;
        for (int64_t z = 0; z < OD; ++z) {
          const auto& az = td[static_cast<size_t>(z)];
          for (int64_t y = 0; y < OH; ++y) {
            const auto& ay = th[static_cast<size_t>(y)];
            S* p00 = cb + (az.lo * H + ay.lo) * W;
            S* p01 = cb + (az.lo * H + ay.hi) * W;
            S* p10 = cb + (az.hi * H + ay.lo) * W;
            S* p11 = cb + (az.hi * H + ay.hi) * W;
            const S* grow = go.data() + ((ci * OD + z) * OH + y) * OW;
            for (int64_t xo = 0; xo < OW; ++xo) {
              const auto& ax = tw[static_cast<size_t>(xo)];
              const S wz = az.w_hi, wy = ay.w_hi, wx = ax.w_hi;
              const S g = grow[xo];
              const S g0 = g * (S(1) - wz), g1 = g * wz;
              const S g00 = g0 * (S(1) - wy), g01 = g0 * wy;
              const S g10 = g1 * (S(1) - wy), g11 = g1 * wy;
              p00[ax.lo] += g00 * (S(1) - wx);
              p00[ax.hi] += g00 * wx;
              p01[ax.lo] += g01 * (S(1) - wx);
              p01[ax.hi] += g01 * wx;
              p10[ax.lo] += g10 * (S(1) - wx);
              p10[ax.hi] += g10 * wx;
              p11[ax.lo] += g11 * (S(1) - wx);
              p11[ax.hi] += g11 * wx;
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace gpa
