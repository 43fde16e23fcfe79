#pragma once

#include <cstdint>

#include "gpa/ops.hpp"

namespace gpa {

namespace detail {

template <class S>
void check_logits_labels(const Tensor<S>& logits,
                         const std::vector<int32_t>& labels) {
  check_shape(logits.ndim() >= 2, "loss: logits need a class axis, got " +
                                      shape_str(logits.shape()));
  const int64_t c = logits.dim(0);
  const int64_t v = logits.numel() / c;
  check_shape(static_cast<int64_t>(labels.size()) == v,
              "loss: logits cover " + std::to_string(v) + " voxels, labels " +
                  std::to_string(labels.size()));
  for (int32_t l : labels)
    check_shape(l >= 0 && l < c, "loss: label " + std::to_string(l) +
                                     " outside [0," + std::to_string(c) + ")");
}

}  // namespace detail

// Soft Dice over foreground classes: softmax over the class axis, then per
// class 1 - (2*intersection + eps) / (sum_gt + sum_pred + eps), averaged.
// The eps smoothing makes an everywhere-empty class contribute zero loss.
template <class S>
Tensor<S> dice_loss(const Tensor<S>& logits, const std::vector<int32_t>& labels,
                    S eps = static_cast<S>(1e-5)) {
  detail::check_logits_labels(logits, labels);
  const int64_t c = logits.dim(0);
  const int64_t v = logits.numel() / c;
  check_shape(c >= 2, "dice_loss: need background plus foreground classes");

  Tensor<S> p = softmax(logits.reshaped({c, v}), 0);
  Tensor<S> acc = Tensor<S>::scalar(S(0));
  for (int64_t cls = 1; cls < c; ++cls) {
    Tensor<S> mask = Tensor<S>::zeros({1, v});
    S count = S(0);
    for (int64_t i = 0; i < v; ++i)
      if (labels[static_cast<size_t>(i)] == cls) {
        mask[i] = S(1);
        count += S(1);
      }
    Tensor<S> row = row_slice(p, cls, cls + 1);
    Tensor<S> inter = sum(mul(row, mask));
    Tensor<S> denom = add_scalar(sum(row), count);
    Tensor<S> frac = div(add_scalar(mul_scalar(inter, S(2)), eps),
                         add_scalar(denom, eps));
    acc = add(acc, sub(Tensor<S>::scalar(S(1)), frac));
  }
  return mul_scalar(acc, S(1) / static_cast<S>(c - 1));
}

// Mean over voxels of -log p(true class), computed through log-sum-exp.
template <class S>
Tensor<S> ce_loss(const Tensor<S>& logits, const std::vector<int32_t>& labels) {
  detail::check_logits_labels(logits, labels);
  const int64_t c = logits.dim(0);
  const int64_t v = logits.numel() / c;

  // accumulate at the working precision or better
  using A = std::conditional_t<(sizeof(S) > sizeof(double)), S, double>;
  A total = A(0);
  const S* z = logits.ptr();
  for (int64_t i = 0; i < v; ++i) {
    S mx = z[i];
    for (int64_t k = 1; k < c; ++k) mx = std::max(mx, z[k * v + i]);
    A lse = A(0);
    for (int64_t k = 0; k < c; ++k)
      lse += std::exp(static_cast<A>(z[k * v + i] - mx));
    lse = std::log(lse) + static_cast<A>(mx);
    total += lse - static_cast<A>(z[labels[static_cast<size_t>(i)] * v + i]);
  }
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(total / static_cast<A>(v)));
  if (detail::grad_wanted<S>({&logits})) {
    detail::mark_recorded(out, [logits = logits, out, labels, c, v]() mutable {
      if (!logits.requires_grad()) return;
      const S go = out.grad()[0];
      const S inv_v = S(1) / static_cast<S>(v);
      auto& gz = logits.grad();
      const S* z = logits.ptr();
      for (int64_t i = 0; i < v; ++i) {
        S mx = z[i];
        for (int64_t k = 1; k < c; ++k) mx = std::max(mx, z[k * v + i]);
        S denom = S(0);
        for (int64_t k = 0; k < c; ++k) denom += std::exp(z[k * v + i] - mx);
        const S inv = S(1) / denom;
        for (int64_t k = 0; k < c; ++k) {
          S soft = std::exp(z[k * v + i] - mx) * inv;
          S delta = (labels[static_cast<size_t>(i)] == k) ? S(1) : S(0);
          gz[static_cast<size_t>(k * v + i)] += go * (soft - delta) * inv_v;
        }
      }
    });
  }
  return out;
}

// alpha * dice + beta * ce.
template <class S>
Tensor<S> dice_ce(const Tensor<S>& logits, const std::vector<int32_t>& labels,
                  S alpha = S(1), S beta = S(1)) {
  check_shape(alpha >= S(0) && beta >= S(0),
              "dice_ce: weights must be non-negative");
  return add(mul_scalar(dice_loss(logits, labels), alpha),
             mul_scalar(ce_loss(logits, labels), beta));
}

// Dice similarity coefficient of two binary masks; two empty masks count as
// perfect agreement.
inline double dsc(const std::vector<uint8_t>& gt,
                  const std::vector<uint8_t>& pred) {
  check_shape(gt.size() == pred.size(), "dsc: mask sizes differ");
  int64_t inter = 0, ngt = 0, npred = 0;
  for (size_t i = 0; i < gt.size(); ++i) {
    const bool a = gt[i] != 0, b = pred[i] != 0;
    ngt += a;
    npred += b;
    inter += (a && b);
  }
  if (ngt + npred == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(ngt + npred);
}

}  // namespace gpa
