#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>

#include "gpa/common.hpp"

namespace gpa {

// Shared value/gradient buffer. The shape lives on the Tensor handle, so
// aliased views (reshape) can disagree on shape while sharing data.
template <class S>
struct TensorBuffer {
  std::vector<S> values;
  std::vector<S> grad;  // allocated lazily, same length as values
  bool requires_grad = false;
  bool produced = false;  // output of a recorded op (non-leaf)

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), S(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), S(0));
  }
};

// Dense row-major tensor. Copies are shallow: they alias the same buffer.
template <class S>
class Tensor {
 public:
  using Scalar = S;

  Tensor() = default;

  static Tensor zeros(Shape shape) {
    int64_t n = gpa::numel(shape);
    check_shape(n >= 0, "tensor: negative extent in " + shape_str(shape));
    Tensor t;
    t.buf_ = std::make_shared<TensorBuffer<S>>();
    t.buf_->values.assign(static_cast<size_t>(n), S(0));
    t.shape_ = std::move(shape);
    return t;
  }

  static Tensor full(Shape shape, S value) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
  }

  static Tensor from(Shape shape, std::vector<S> values) {
    check_shape(gpa::numel(shape) == static_cast<int64_t>(values.size()),
                "tensor: " + shape_str(shape) + " incompatible with " +
                    std::to_string(values.size()) + " values");
    Tensor t;
    t.buf_ = std::make_shared<TensorBuffer<S>>();
    t.buf_->values = std::move(values);
    t.shape_ = std::move(shape);
    return t;
  }

  static Tensor scalar(S v) { return from({1}, {v}); }

  bool defined() const { return static_cast<bool>(buf_); }
  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_[i]; }
  size_t ndim() const { return shape_.size(); }
  int64_t numel() const {
    return buf_ ? static_cast<int64_t>(buf_->values.size()) : 0;
  }

  std::vector<S>& data() { return buf_->values; }
  const std::vector<S>& data() const { return buf_->values; }
  S* ptr() { return buf_->values.data(); }
  const S* ptr() const { return buf_->values.data(); }
  S& operator[](int64_t i) { return buf_->values[static_cast<size_t>(i)]; }
  S operator[](int64_t i) const {
    return buf_->values[static_cast<size_t>(i)];
  }

  bool requires_grad() const { return buf_ && buf_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    buf_->requires_grad = v;
    return *this;
  }
  bool is_leaf() const { return !buf_->produced; }

  std::vector<S>& grad() {
    buf_->ensure_grad();
    return buf_->grad;
  }
  const std::vector<S>& grad() const {
    buf_->ensure_grad();
    return buf_->grad;
  }
  void zero_grad() { buf_->zero_grad(); }

  // Same buffer under a new shape (gradients alias too).
  Tensor reshaped(Shape shape) const {
    check_shape(gpa::numel(shape) == numel(),
                "reshape: cannot view " + shape_str(shape_) + " as " +
                    shape_str(shape));
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  // Deep copy of values; fresh non-grad leaf.
  Tensor clone_values() const {
    return Tensor::from(shape_, buf_->values);
  }

  std::shared_ptr<TensorBuffer<S>> buffer() const { return buf_; }
  bool same_buffer(const Tensor& o) const { return buf_ == o.buf_; }

 private:
  std::shared_ptr<TensorBuffer<S>> buf_;
  Shape shape_;
};

// Linear record of differentiable ops. One tape is active per thread at a
// time; ops consult it to decide whether to save backward closures.
template <class S>
class Tape {
 public:
  struct Entry {
    std::function<void()> backward;
    std::shared_ptr<TensorBuffer<S>> output;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape() {
    if (active_ptr() == this) active_ptr() = nullptr;
  }

  static Tape* active() { return active_ptr(); }

  // RAII activation; nesting replaces the active tape for the scope.
  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(active_ptr()) { active_ptr() = &t; }
    ~Scope() { active_ptr() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  void record(std::function<void()> bw, std::shared_ptr<TensorBuffer<S>> out) {
    entries_.push_back(Entry{std::move(bw), std::move(out)});
  }

  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Non-leaf
  // gradients are rebuilt from scratch each call; leaf gradients accumulate
  // across calls (running backward twice without zeroing doubles them).
  void backward(const Tensor<S>& loss) {
    check_shape(loss.numel() == 1,
                "backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (loss.buffer()->produced == false)
      throw ShapeError("backward: loss was not produced by recorded ops");
    for (auto& e : entries_) {
      e.output->ensure_grad();
      e.output->zero_grad();
    }
    loss.buffer()->grad[0] = S(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
      it->backward();
  }

 private:
  static Tape*& active_ptr() {
    thread_local Tape* p = nullptr;
    return p;
  }
  std::vector<Entry> entries_;
};

template <class S>
void backward(const Tensor<S>& loss) {
  Tape<S>* t = Tape<S>::active();
  if (!t) throw ShapeError("backward: no active tape");
  t->backward(loss);
}

namespace detail {

template <class S>
inline bool grad_wanted(std::initializer_list<const Tensor<S>*> inputs) {
  if (!Tape<S>::active()) return false;
  for (const Tensor<S>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <class S>
inline void mark_recorded(Tensor<S>& out, std::function<void()> bw) {
  out.set_requires_grad(true);
  out.buffer()->produced = true;
  Tape<S>::active()->record(std::move(bw), out.buffer());
}

}  // namespace detail

}  // namespace gpa
