// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

// Dense f64 tensors with a reverse-mode tape.
//
// Tensors are rank 1 or 2; a rank-1 tensor of length n behaves as a 1 x n row
// wherever an operation needs rows and columns. Every recorded operation checks
// its output for NaN/Inf and throws NumericError.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace tubeseq {

/// Allocator with a fixed 64-byte alignment. Vectorized reductions pick their
/// summation order from the data alignment, so a fixed alignment keeps results
/// bitwise reproducible across runs.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using TensorStorage = std::vector<double, AlignedAllocator<double>>;

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// Builds a rows x cols tensor from nested initializer lists.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  /// Builds a 1 x n row.
  static Tensor row(std::vector<double> values);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool same_shape(const Tensor& o) const noexcept { return rows() == o.rows() && cols() == o.cols(); }
  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_{0, 0};
  TensorStorage data_;
};

std::string shape_string(const Tensor& t);

/// Named parameter tensors with stable insertion order.
///
/// Several names may alias one storage slot (shared embeddings); writes
/// through any alias are visible through all of them, and gradients from all
/// aliases accumulate into the slot.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);
  void alias(const std::string& name, const std::string& existing);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t slot_of(const std::string& name) const;

  Tensor& value(const std::string& name) { return slots_[slot_of(name)].value; }
  const Tensor& value(const std::string& name) const { return slots_[slot_of(name)].value; }
  Tensor& grad(const std::string& name) { return slots_[slot_of(name)].grad; }
  const Tensor& grad(const std::string& name) const { return slots_[slot_of(name)].grad; }

  std::size_t slot_count() const noexcept { return slots_.size(); }
  const std::string& slot_name(std::size_t i) const { return slots_[i].name; }
  Tensor& slot_value(std::size_t i) { return slots_[i].value; }
  const Tensor& slot_value(std::size_t i) const { return slots_[i].value; }
  Tensor& slot_grad(std::size_t i) { return slots_[i].grad; }
  const Tensor& slot_grad(std::size_t i) const { return slots_[i].grad; }

  /// Every name (aliases included) in registration order, with its slot.
  const std::vector<std::pair<std::string, std::size_t>>& names() const noexcept { return names_; }

  std::size_t parameter_count() const;
  void zero_grad();
  /// FNV-1a over slot names and raw value bits.
  std::uint64_t checksum() const;

 private:
  struct Slot {
    std::string name;
    Tensor value;
    Tensor grad;
  };
  std::vector<Slot> slots_;
  std::vector<std::pair<std::string, std::size_t>> names_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Ordered record of primitive operations for reverse-mode differentiation.
///
/// A tape built with `record = false` keeps values only; it is used for
/// inference and finite-difference probes.
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const noexcept { return record_; }

  /// Parameters of `store` are bound as constants: no gradient is computed
  /// for them and backward() never touches their gradient buffers.
  void freeze(const ParamStore& store) { frozen_.push_back(&store); }

  Var constant(Tensor value);
  /// Leaf whose gradient can be read back with grad() after backward().
  Var variable(Tensor value);
  /// Leaf bound to a ParamStore slot. Repeated requests for the same slot
  /// (through any alias) return the same Var, so uses accumulate.
  Var param(ParamStore& store, const std::string& name);

  /// Seeds d(loss)/d(loss) = 1, visits every node once in reverse order, and
  /// adds parameter gradients into the bound ParamStore slots.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss; zeros when the node was not reached.
  Tensor grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }

  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  /// Appends an op result. `inputs` decide whether the result needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, const char* op, BackwardFn fn);
  Var push(Tensor value, std::span<const Var> inputs, const char* op, BackwardFn fn);
  /// Gradient buffer of `v`, allocated (zero) on first use. Null when `v`
  /// does not require a gradient.
  Tensor* grad_buffer(Var v);

 private:
  struct Node {
    Tensor own;
    const Tensor* external = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Tensor* sink = nullptr;
    BackwardFn backward;
    const Tensor& value() const { return external ? *external : own; }
  };

  bool record_;
  std::vector<const ParamStore*> frozen_;
  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, std::size_t>, std::uint32_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Primitive ops. Binary elementwise ops accept equal shapes, a 1 x n row
// broadcast over rows, or an m x 1 column broadcast over columns (second
// operand only).

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
/// axis 0 stacks rows, axis 1 stacks columns.
Var concat(std::span<const Var> parts, int axis);
Var concat(std::initializer_list<Var> parts, int axis);
/// Rows of `m` selected by `indices` (repeats allowed).
Var row_gather(Var m, std::span<const int> indices);
/// Columns [begin, begin + count) of `a`.
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var sigmoid(Var a);
Var tanh(Var a);
/// Row-wise over the last axis.
Var softmax(Var a);
Var log_softmax(Var a);
/// Sum of all entries as a 1 x 1 tensor.
Var sum(Var a);
/// m x 1 column with a(i, classes[i]); a negative class yields 0 and no gradient.
Var pick(Var a, std::span<const int> classes);

// ---------------------------------------------------------------------------

/// Scalar objective recorded on the given tape, reading parameters from the
/// store it was built for.
using Objective = std::function<Var(Tape&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() gradients with central differences
/// (f(θ + h e_i) - f(θ - h e_i)) / 2h for every entry of every slot in `store`.
/// Relative error is |a - n| / max(1e-8, |a| + |n|).
GradCheckResult grad_check(const Objective& f, ParamStore& store, double h = 1e-5);

}  // namespace tubeseq
