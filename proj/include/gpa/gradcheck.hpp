#pragma once

#include <functional>
#include <random>

#include "gpa/tensor.hpp"

namespace gpa {

// Compares reverse-mode gradients against central differences. Returns the
// max over checked coordinates of |analytic - numeric| / max(|analytic|,
// |numeric|, 1e-8).
//
// Runs at double precision or better; long double pushes the finite-
// difference noise floor low enough to resolve weakly-coupled coordinates
// in deep compositions. With max_coords_per_tensor < 0 every coordinate is
// checked; otherwise a seeded sample per tensor bounds the cost.
template <class S = double, class F>
double grad_check(F f, std::vector<Tensor<S>> inputs, double step = 1e-4,
                  int64_t max_coords_per_tensor = -1, uint64_t seed = 12345) {
  static_assert(sizeof(S) >= sizeof(double),
                "grad_check: finite differences need double precision");
  std::vector<std::vector<S>> analytic;
  {
    Tape<S> tape;
    typename Tape<S>::Scope scope(tape);
    for (auto& t : inputs) {
      t.set_requires_grad(true);
      t.zero_grad();
    }
    Tensor<S> loss = f(inputs);
    check_shape(loss.numel() == 1, "grad_check: f must return a scalar");
    tape.backward(loss);
    for (auto& t : inputs) analytic.push_back(t.grad());
  }

  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor<S>& t = inputs[ti];
    const int64_t n = t.numel();
    std::vector<int64_t> coords(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    if (max_coords_per_tensor >= 0 && n > max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<size_t>(max_coords_per_tensor));
    }
    for (int64_t idx : coords) {
      const S saved = t[idx];
      t[idx] = saved + static_cast<S>(step);
      const S fp = f(inputs)[0];
      t[idx] = saved - static_cast<S>(step);
      const S fm = f(inputs)[0];
      t[idx] = saved;
      // the subtraction must happen at full working precision
      const double numeric =
          static_cast<double>((fp - fm) / (S(2) * static_cast<S>(step)));
      const double a = static_cast<double>(analytic[ti][static_cast<size_t>(idx)]);
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace gpa
