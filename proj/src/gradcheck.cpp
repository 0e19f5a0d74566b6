// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/gradcheck.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include "tubeseq/tubelize.hpp"

namespace tubeseq {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string describe(const GradCheckResult& r) {
  std::ostringstream os;
  os << r.worst_param << '[' << r.worst_index << "] " << r.worst_analytic << ' ' << r.worst_numeric;
  return os.str();
}

Tensor random_tensor(std::mt19937_64& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (double& x : t.data()) x = uniform(rng, lo, hi);
  return t;
}

// Registers inputs as parameters and reduces op(inputs) to sum(op * W).
class PrimitiveCase {
 public:
  PrimitiveCase(std::string name, std::uint64_t seed) : name_(std::move(name)), rng_(seed) {}

  PrimitiveCase& input(Tensor t) {
    store_.add("in" + std::to_string(store_.slot_count()), std::move(t));
    return *this;
  }
  PrimitiveCase& input(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    return input(random_tensor(rng_, r, c, lo, hi));
  }

  GradCheckCase run(const std::function<Var(Tape&, std::vector<Var>&)>& op) {
    std::optional<Tensor> weights;
    Objective f = [&](Tape& tape) {
      std::vector<Var> in;
      for (std::size_t i = 0; i < store_.slot_count(); ++i) in.push_back(tape.param(store_, store_.slot_name(i)));
      Var out = op(tape, in);
      if (!weights) weights = random_tensor(rng_, out.rows(), out.cols());
      return sum(mul(out, tape.constant(*weights)));
    };
    const GradCheckResult r = grad_check(f, store_);
    return {name_, r.max_rel_error, r.checked, describe(r)};
  }

 private:
  std::string name_;
  std::mt19937_64 rng_;
  ParamStore store_;
};

// Random valid target sequence for a tube of length r.
TokenSequence random_target(std::mt19937_64& rng, int r) {
  std::vector<std::uint8_t> line(static_cast<std::size_t>(r));
  for (auto& b : line) b = (rng() % 2) ? 1 : 0;
  Tube tube{{0, 0}, segments_of_line(line)};
  return to_tokens(tube);
}

}  // namespace

std::vector<GradCheckCase> gradcheck_primitives(std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  auto add_case = [&](const std::string& name, auto setup, auto op) {
    PrimitiveCase c(name, seed * 131 + out.size());
    setup(c);
    out.push_back(c.run(op));
  };
  using In = std::vector<Var>;
  add_case("matmul", [](PrimitiveCase& c) { c.input(3, 4).input(4, 2); },
           [](Tape&, In& v) { return matmul(v[0], v[1]); });
  add_case("add", [](PrimitiveCase& c) { c.input(3, 4).input(3, 4); }, [](Tape&, In& v) { return add(v[0], v[1]); });
  add_case("add_row_broadcast", [](PrimitiveCase& c) { c.input(3, 4).input(1, 4); },
           [](Tape&, In& v) { return add(v[0], v[1]); });
  add_case("sub_col_broadcast", [](PrimitiveCase& c) { c.input(3, 4).input(3, 1); },
           [](Tape&, In& v) { return sub(v[0], v[1]); });
  add_case("mul", [](PrimitiveCase& c) { c.input(3, 4).input(3, 4); }, [](Tape&, In& v) { return mul(v[0], v[1]); });
  add_case("mul_col_broadcast", [](PrimitiveCase& c) { c.input(3, 4).input(3, 1); },
           [](Tape&, In& v) { return mul(v[0], v[1]); });
  add_case("mul_row_broadcast", [](PrimitiveCase& c) { c.input(3, 4).input(1, 4); },
           [](Tape&, In& v) { return mul(v[0], v[1]); });
  add_case("scale", [](PrimitiveCase& c) { c.input(2, 3); }, [](Tape&, In& v) { return scale(v[0], -1.7); });
  add_case("concat_rows", [](PrimitiveCase& c) { c.input(2, 3).input(1, 3); },
           [](Tape&, In& v) { return concat({v[0], v[1]}, 0); });
  add_case("concat_cols", [](PrimitiveCase& c) { c.input(2, 3).input(2, 2); },
           [](Tape&, In& v) { return concat({v[0], v[1]}, 1); });
  add_case("row_gather", [](PrimitiveCase& c) { c.input(5, 3); },
           [](Tape&, In& v) { return row_gather(v[0], std::vector<int>{4, 0, 4, 2}); });
  add_case("slice_cols", [](PrimitiveCase& c) { c.input(3, 5); },
           [](Tape&, In& v) { return slice_cols(v[0], 1, 3); });
  add_case("sigmoid", [](PrimitiveCase& c) { c.input(3, 4, -3.0, 3.0); }, [](Tape&, In& v) { return sigmoid(v[0]); });
  add_case("tanh", [](PrimitiveCase& c) { c.input(3, 4, -3.0, 3.0); }, [](Tape&, In& v) { return tanh(v[0]); });
  add_case("softmax", [](PrimitiveCase& c) { c.input(3, 5, -2.0, 2.0); }, [](Tape&, In& v) { return softmax(v[0]); });
  add_case("log_softmax", [](PrimitiveCase& c) { c.input(3, 5, -2.0, 2.0); },
           [](Tape&, In& v) { return log_softmax(v[0]); });
  add_case("sum", [](PrimitiveCase& c) { c.input(3, 4); }, [](Tape&, In& v) { return sum(v[0]); });
  add_case("pick", [](PrimitiveCase& c) { c.input(4, 5); },
           [](Tape&, In& v) { return pick(v[0], std::vector<int>{2, -1, 0, 4}); });
  add_case("softmax_classifier_xent",
           [](PrimitiveCase& c) { c.input(4, 3).input(3, 5).input(1, 5); },
           [](Tape&, In& v) {
             Var logits = add(matmul(v[0], v[1]), v[2]);
             return scale(sum(pick(log_softmax(logits), std::vector<int>{0, 3, 4, 1})), -1.0);
           });
  return out;
}

GradCheckCase gradcheck_sequence_loss(const ModelConfig& cfg, std::uint64_t seed) {
  Model model(cfg, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  // Checked at a point with O(1) weights; near the default init some
  // attention gradients sit below the finite-difference noise floor.
  ParamStore& params = model.params();
  for (std::size_t s = 0; s < params.slot_count(); ++s) {
    for (double& x : params.slot_value(s).data()) x = uniform(rng, -1.0, 1.0);
  }
  ParamStore conditions;
  constexpr std::size_t kBatch = 3;
  conditions.add("f", random_tensor(rng, kBatch, static_cast<std::size_t>(cfg.embed_dim)));
  std::vector<Coord> coords;
  std::vector<TokenSequence> targets;
  for (std::size_t i = 0; i < kBatch; ++i) {
    coords.push_back({static_cast<int>(rng() % cfg.resolution), static_cast<int>(rng() % cfg.resolution)});
    targets.push_back(random_target(rng, cfg.resolution));
  }
  Objective f = [&](Tape& tape) {
    return model.sequence_loss(tape, tape.param(conditions, "f"), coords, targets);
  };
  const GradCheckResult over_model = grad_check(f, model.params());
  const GradCheckResult over_f = grad_check(f, conditions);
  const GradCheckResult& worst = over_model.max_rel_error >= over_f.max_rel_error ? over_model : over_f;
  return {"sequence_loss_seed_" + std::to_string(seed), worst.max_rel_error, over_model.checked + over_f.checked,
          describe(worst)};
}

std::vector<GradCheckCase> gradcheck_suite(int seeds) {
  std::vector<GradCheckCase> out = gradcheck_primitives(0);
  ModelConfig cfg;
  cfg.resolution = 4;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 8;
  for (int s = 0; s < seeds; ++s) out.push_back(gradcheck_sequence_loss(cfg, static_cast<std::uint64_t>(s)));
  return out;
}

}  // namespace tubeseq
