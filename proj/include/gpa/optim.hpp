#pragma once

#include <random>
#include <string>

#include "gpa/tensor.hpp"

namespace gpa {

// Learnable value plus its optimizer moments.
template <class S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> first_moment;
  Tensor<S> second_moment;
  int64_t step_count = 0;
};

struct Init {
  enum class Kind { Zeros, Ones, Normal, He };
  Kind kind = Kind::Zeros;
  double arg = 0.0;  // Normal: stddev; He: fan-in

  static Init zeros() { return {Kind::Zeros, 0.0}; }
  static Init ones() { return {Kind::Ones, 0.0}; }
  static Init normal(double stddev) { return {Kind::Normal, stddev}; }
  static Init he(int64_t fan_in) {
    return {Kind::He, static_cast<double>(fan_in)};
  }
};

// Ordered, named parameter registry. Creation order fixes both the
// checkpoint layout and the RNG stream, so a given seed reproduces the
// same initialization.
template <class S>
class ParamStore {
 public:
  Tensor<S> create(const std::string& name, Shape shape, Init init,
                   std::mt19937_64& rng) {
    Parameter<S> p;
    p.name = name;
    p.value = Tensor<S>::zeros(shape);
    p.first_moment = Tensor<S>::zeros(shape);
    p.second_moment = Tensor<S>::zeros(shape);
    switch (init.kind) {
      case Init::Kind::Zeros:
        break;
      case Init::Kind::Ones:
        std::fill(p.value.data().begin(), p.value.data().end(), S(1));
        break;
      case Init::Kind::Normal: {
        std::normal_distribution<double> dist(0.0, init.arg);
        for (auto& v : p.value.data()) v = static_cast<S>(dist(rng));
        break;
      }
      case Init::Kind::He: {
        std::normal_distribution<double> dist(0.0,
                                              std::sqrt(2.0 / init.arg));
        for (auto& v : p.value.data()) v = static_cast<S>(dist(rng));
        break;
      }
    }
    p.value.set_requires_grad(true);
    params_.push_back(std::move(p));
    return params_.back().value;
  }

  std::vector<Parameter<S>>& items() { return params_; }
  const std::vector<Parameter<S>>& items() const { return params_; }

  int64_t total_scalars() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

  int64_t total_scalars_matching(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& p : params_)
      if (p.name.rfind(prefix, 0) == 0) n += p.value.numel();
    return n;
  }

  const Parameter<S>* find(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  Parameter<S>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : params_) p.value.zero_grad();
  }

 private:
  std::vector<Parameter<S>> params_;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// One optimizer step: exponential moment update, bias-corrected step, then
// multiplicative decay value <- value - lr*wd*value applied separately from
// the gradient-derived step.
template <class S>
void adamw_step(Parameter<S>& p, const std::vector<S>& grad,
                const AdamWConfig& cfg) {
  check_shape(static_cast<int64_t>(grad.size()) == p.value.numel(),
              "adamw_step: grad size mismatch for " + p.name);
  check_shape(cfg.lr > 0, "adamw_step: lr must be positive");
  p.step_count += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(p.step_count));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(p.step_count));
  auto& val = p.value.data();
  auto& m = p.first_moment.data();
  auto& v = p.second_moment.data();
  const size_t n = val.size();
  for (size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(grad[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<S>(mi);
    v[i] = static_cast<S>(vi);
    const double mhat = mi / c1;
    const double vhat = vi / c2;
    double x = static_cast<double>(val[i]);
    x -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    x -= cfg.lr * cfg.weight_decay * x;
    val[i] = static_cast<S>(x);
  }
}

template <class S>
void adamw_step(Parameter<S>& p, const AdamWConfig& cfg) {
  adamw_step(p, p.value.grad(), cfg);
}

}  // namespace gpa
