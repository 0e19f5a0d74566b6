// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tubeseq/error.hpp"

namespace tubeseq {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

namespace {

ConstMatMap view(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MatMap view(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_.empty() || shape_.size() > 2) throw InvalidArgument("tensor rank must be 1 or 2");
  std::size_t n = 1;
  for (auto d : shape_) n *= d;
  if (n != data_.size()) {
    throw InvalidArgument("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + std::to_string(n));
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw InvalidArgument("ragged matrix literal");
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Tensor& t) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < t.shape().size(); ++i) os << (i ? "x" : "") << t.shape()[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// ParamStore

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  Tensor grad(init.rows(), init.cols());
  slots_.push_back({name, std::move(init), std::move(grad)});
  index_[name] = slots_.size() - 1;
  names_.emplace_back(name, slots_.size() - 1);
  return slots_.back().value;
}

void ParamStore::alias(const std::string& name, const std::string& existing) {
  if (contains(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
  const std::size_t slot = slot_of(existing);
  index_[name] = slot;
  names_.emplace_back(name, slot);
}

std::size_t ParamStore::slot_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& s : slots_) n += s.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& s : slots_) s.grad.fill(0.0);
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& s : slots_) {
    mix(s.name.data(), s.name.size());
    mix(s.value.data().data(), s.value.size() * sizeof(double));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.own = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = record_;
  return v;
}

Var Tape::param(ParamStore& store, const std::string& name) {
  const std::size_t slot = store.slot_of(name);
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), slot);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return {this, it->second};
  const bool frozen = std::find(frozen_.begin(), frozen_.end(), &store) != frozen_.end();
  Node n;
  n.external = &store.slot_value(slot);
  n.requires_grad = record_ && !frozen;
  if (n.requires_grad) n.sink = &store.slot_grad(slot);
  nodes_.push_back(std::move(n));
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_[key] = id;
  return {this, id};
}

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value(); }

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.has_grad) return n.grad;
  return Tensor(n.value().rows(), n.value().cols());
}

Tensor* Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    const Tensor& val = n.value();
    n.grad = Tensor(val.rows(), val.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

Var Tape::push(Tensor value, std::initializer_list<Var> inputs, const char* op, BackwardFn fn) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), op, std::move(fn));
}

Var Tape::push(Tensor value, std::span<const Var> inputs, const char* op, BackwardFn fn) {
  for (double x : value.data()) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  Node n;
  n.own = std::move(value);
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape != this) throw InvalidArgument(std::string(op) + ": operand from another tape");
      n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  if (!record_) throw InvalidState("backward() on a tape that does not record");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) throw InvalidArgument("backward() needs a scalar loss, got " + shape_string(lv));
  Tensor* seed = grad_buffer(loss);
  if (!seed) return;
  (*seed)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
  }
  for (Node& n : nodes_) {
    if (n.sink && n.has_grad) view(*n.sink) += view(n.grad);
  }
}

// ---------------------------------------------------------------------------
// Ops

namespace {

enum class Broadcast { kSame, kRow, kCol };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kCol;
  throw InvalidArgument(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                        shape_string(b));
}

double b_at(const Tensor& b, Broadcast k, std::size_t r, std::size_t c) {
  switch (k) {
    case Broadcast::kSame: return b(r, c);
    case Broadcast::kRow: return b(0, c);
    case Broadcast::kCol: return b(r, 0);
  }
  return 0.0;
}

// Adds `g` (shaped like a) into the gradient of b, reducing over broadcast dims.
void reduce_into(Tensor& gb, const Tensor& g, Broadcast k, double sign) {
  switch (k) {
    case Broadcast::kSame: view(gb) += sign * view(g); break;
    case Broadcast::kRow: view(gb) += sign * view(g).colwise().sum(); break;
    case Broadcast::kCol: view(gb) += sign * view(g).rowwise().sum(); break;
  }
}

Var binary_add(Var a, Var b, double sign, const char* op) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast k = broadcast_kind(av, bv, op);
  Tensor out = av;
  switch (k) {
    case Broadcast::kSame: view(out) += sign * view(bv); break;
    case Broadcast::kRow: view(out).rowwise() += sign * view(bv).row(0); break;
    case Broadcast::kCol: view(out).colwise() += sign * view(bv).col(0); break;
  }
  return a.tape->push(std::move(out), {a, b}, op, [a, b, k, sign](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) view(*ga) += view(g);
    if (Tensor* gb = t.grad_buffer(b)) reduce_into(*gb, g, k, sign);
  });
}

void check_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) throw InvalidArgument(std::string(op) + ": operands on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw InvalidArgument("matmul: inner dimensions differ, " + shape_string(av) + " x " + shape_string(bv));
  }
  Tensor out(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  return a.tape->push(std::move(out), {a, b}, "matmul", [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) view(*ga).noalias() += view(g) * view(t.value(b)).transpose();
    if (Tensor* gb = t.grad_buffer(b)) view(*gb).noalias() += view(t.value(a)).transpose() * view(g);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  return binary_add(a, b, 1.0, "add");
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  return binary_add(a, b, -1.0, "sub");
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast k = broadcast_kind(av, bv, "mul");
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) * b_at(bv, k, r, c);
  }
  return a.tape->push(std::move(out), {a, b}, "mul", [a, b, k](Tape& t, const Tensor& g) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (Tensor* ga = t.grad_buffer(a)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(r, c) += g(r, c) * b_at(bv, k, r, c);
      }
    }
    if (Tensor* gb = t.grad_buffer(b)) {
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          const double d = g(r, c) * av(r, c);
          switch (k) {
            case Broadcast::kSame: (*gb)(r, c) += d; break;
            case Broadcast::kRow: (*gb)(0, c) += d; break;
            case Broadcast::kCol: (*gb)(r, 0) += d; break;
          }
        }
      }
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  view(out) *= c;
  return a.tape->push(std::move(out), {a}, "scale", [a, c](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) view(*ga) += c * view(g);
  });
}

Var concat(std::initializer_list<Var> parts, int axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no operands");
  if (axis != 0 && axis != 1) throw InvalidArgument("concat: axis must be 0 or 1");
  Tape* tape = parts[0].tape;
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    if (p.tape != tape) throw InvalidArgument("concat: operands on different tapes");
    const Tensor& v = p.value();
    if (axis == 0) {
      if (rows && v.cols() != cols) throw InvalidArgument("concat: column counts differ");
      cols = v.cols();
      rows += v.rows();
    } else {
      if (cols && v.rows() != rows) throw InvalidArgument("concat: row counts differ");
      rows = v.rows();
      cols += v.cols();
    }
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    if (axis == 0) {
      view(out).middleRows(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(v.rows())) = view(v);
      offset += v.rows();
    } else {
      view(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(v.cols())) = view(v);
      offset += v.cols();
    }
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape->push(std::move(out), parts, "concat", [inputs, axis](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : inputs) {
      const Tensor& v = t.value(p);
      const auto n = static_cast<Eigen::Index>(axis == 0 ? v.rows() : v.cols());
      if (Tensor* gp = t.grad_buffer(p)) {
        if (axis == 0) {
          view(*gp) += view(g).middleRows(static_cast<Eigen::Index>(off), n);
        } else {
          view(*gp) += view(g).middleCols(static_cast<Eigen::Index>(off), n);
        }
      }
      off += static_cast<std::size_t>(n);
    }
  });
}

Var row_gather(Var m, std::span<const int> indices) {
  const Tensor& mv = m.value();
  const std::size_t cols = mv.cols();
  Tensor out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int r = indices[i];
    if (r < 0 || static_cast<std::size_t>(r) >= mv.rows()) {
      throw InvalidArgument("row_gather: row " + std::to_string(r) + " outside " + shape_string(mv));
    }
    std::memcpy(&out(i, 0), &mv(static_cast<std::size_t>(r), 0), cols * sizeof(double));
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return m.tape->push(std::move(out), {m}, "row_gather", [m, idx = std::move(idx)](Tape& t, const Tensor& g) {
    Tensor* gm = t.grad_buffer(m);
    if (!gm) return;
    const std::size_t c = g.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = &(*gm)(static_cast<std::size_t>(idx[i]), 0);
      const double* src = &g(i, 0);
      for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.cols()) {
    throw InvalidArgument("slice_cols: columns [" + std::to_string(begin) + "," +
                          std::to_string(begin + count) + ") outside " + shape_string(av));
  }
  Tensor out(av.rows(), count);
  view(out) = view(av).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
  return a.tape->push(std::move(out), {a}, "slice_cols", [a, begin, count](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) {
      view(*ga).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count)) += view(g);
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) x = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  const std::uint32_t out_id = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push(std::move(out), {a}, "sigmoid", [a, out_id](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    const Tensor& y = t.value({&t, out_id});
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (double& x : out.data()) x = std::tanh(x);
  const std::uint32_t out_id = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push(std::move(out), {a}, "tanh", [a, out_id](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    const Tensor& y = t.value({&t, out_id});
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax(Var a) {
  Tensor out = a.value();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = &out(r, 0);
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (row[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) row[c] /= z;
  }
  const std::uint32_t out_id = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push(std::move(out), {a}, "softmax", [a, out_id](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    const Tensor& y = t.value({&t, out_id});
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax(Var a) {
  Tensor out = a.value();
  const std::size_t cols = out.cols();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    double* row = &out(r, 0);
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(row[c] - mx);
    const double lz = std::log(z);
    for (std::size_t c = 0; c < cols; ++c) row[c] = (row[c] - mx) - lz;
  }
  const std::uint32_t out_id = static_cast<std::uint32_t>(a.tape->size());
  return a.tape->push(std::move(out), {a}, "log_softmax", [a, out_id](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    const Tensor& y = t.value({&t, out_id});
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gsum = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gsum += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += g(r, c) - std::exp(y(r, c)) * gsum;
    }
  });
}

Var sum(Var a) {
  // Neumaier compensated summation.
  double s = 0.0;
  double c = 0.0;
  for (double x : a.value().data()) {
    const double t = s + x;
    c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
    s = t;
  }
  s += c;
  return a.tape->push(Tensor(1, 1, s), {a}, "sum", [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) view(*ga).array() += g[0];
  });
}

Var pick(Var a, std::span<const int> classes) {
  const Tensor& av = a.value();
  if (classes.size() != av.rows()) {
    throw InvalidArgument("pick: " + std::to_string(classes.size()) + " classes for " + shape_string(av));
  }
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const int c = classes[r];
    if (c < 0) continue;
    if (static_cast<std::size_t>(c) >= av.cols()) {
      throw InvalidArgument("pick: class " + std::to_string(c) + " outside " + shape_string(av));
    }
    out(r, 0) = av(r, static_cast<std::size_t>(c));
  }
  std::vector<int> cls(classes.begin(), classes.end());
  return a.tape->push(std::move(out), {a}, "pick", [a, cls = std::move(cls)](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    for (std::size_t r = 0; r < cls.size(); ++r) {
      if (cls[r] >= 0) (*ga)(r, static_cast<std::size_t>(cls[r])) += g(r, 0);
    }
  });
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const Objective& f, ParamStore& store, double h) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(f(tape));
  }
  auto eval = [&f] {
    Tape tape(false);
    return f(tape).value()[0];
  };
  GradCheckResult res;
  for (std::size_t s = 0; s < store.slot_count(); ++s) {
    Tensor& value = store.slot_value(s);
    const Tensor& grad = store.slot_grad(s);
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double fp = eval();
      value[i] = saved - h;
      const double fm = eval();
      value[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double analytic = grad[i];
      const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      ++res.checked;
      if (res.worst_param.empty() || rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = store.slot_name(s);
        res.worst_index = i;
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return res;
}

}  // namespace tubeseq
