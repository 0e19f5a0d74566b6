// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tubeseq/error.hpp"

namespace tubeseq {

std::string to_string(ShareMode m) {
  switch (m) {
    case ShareMode::kNone: return "none";
    case ShareMode::kPlaneShared: return "plane_shared";
    case ShareMode::kAllShared: return "all_shared";
  }
  return "?";
}

ShareMode parse_share_mode(const std::string& text) {
  if (text == "none") return ShareMode::kNone;
  if (text == "plane_shared") return ShareMode::kPlaneShared;
  if (text == "all_shared") return ShareMode::kAllShared;
  throw InvalidArgument("share_mode must be none, plane_shared or all_shared, got '" + text + "'");
}

std::string to_string(CellType c) { return c == CellType::kGru ? "gru" : "lstm"; }

CellType parse_cell_type(const std::string& text) {
  if (text == "gru") return CellType::kGru;
  if (text == "lstm") return CellType::kLstm;
  throw InvalidArgument("cell must be gru or lstm, got '" + text + "'");
}

void ModelConfig::validate() const {
  if (resolution < 1) throw InvalidArgument("resolution must be >= 1");
  if (embed_dim < 1 || hidden_dim < 1) throw InvalidArgument("embed_dim and hidden_dim must be >= 1");
  if (cell != CellType::kGru) throw InvalidArgument("only the GRU cell is implemented");
  if (max_dec_steps != 0 && max_dec_steps < 2) throw InvalidArgument("max_dec_steps must be >= 2");
  if (max_enc_steps < kEncoderSteps) {
    throw InvalidArgument("max_enc_steps must be >= " + std::to_string(kEncoderSteps));
  }
}

int ModelConfig::decoder_step_cap() const {
  return max_dec_steps > 0 ? max_dec_steps : 2 * ((resolution + 1) / 2) + 2;
}

std::string embedding_name(Axis a) { return "emb." + to_string(a); }

ParamLayout param_layout(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout layout;
  const auto r = static_cast<std::size_t>(cfg.resolution);
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto h = static_cast<std::size_t>(cfg.hidden_dim);
  const auto henc = static_cast<std::size_t>(cfg.encoder_state_dim());
  const auto vocab = r + 4;
  auto add = [&layout](std::string name, std::size_t rows, std::size_t cols) {
    layout.slots.push_back({std::move(name), {rows, cols}});
  };

  // Embedding matrices, with the shared ones registered as aliases.
  const auto [p1, p2] = plane_axes(cfg.axis);
  std::vector<Axis> owners;
  auto owner_of = [&](Axis a) -> Axis {
    switch (cfg.share_mode) {
      case ShareMode::kNone: return a;
      case ShareMode::kAllShared: return Axis::kX;
      case ShareMode::kPlaneShared: return a == p2 ? p1 : a;
    }
    return a;
  };
  for (Axis a : {Axis::kX, Axis::kY, Axis::kZ}) {
    const Axis owner = owner_of(a);
    if (owner == a) {
      add(embedding_name(a), vocab, d);
    } else {
      layout.aliases.emplace_back(embedding_name(a), embedding_name(owner));
    }
  }

  auto add_gru = [&](const std::string& prefix, std::size_t in) {
    add(prefix + ".W", in, 3 * h);
    add(prefix + ".U", h, 2 * h);
    add(prefix + ".Un", h, h);
    add(prefix + ".b", 1, 3 * h);
  };
  add_gru("enc.fwd", d);
  if (cfg.bidirectional) {
    add_gru("enc.bwd", d);
    add("enc.bridge.W", 2 * h, h);
    add("enc.bridge.b", 1, h);
  }
  add_gru("dec", d + henc);
  if (cfg.use_attention) {
    add("att.Ws", h, h);
    add("att.Wh", henc, h);
    add("att.v", h, 1);
  }
  add("out.W", h + henc, vocab);
  add("out.b", 1, vocab);
  return layout;
}

namespace {

bool is_bias(const std::string& name) { return name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0; }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<int> repeat(int cls, std::size_t n) { return std::vector<int>(n, cls); }

}  // namespace

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  const ParamLayout layout = param_layout(cfg_);
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : layout.slots) {
    Tensor t(shape.first, shape.second);
    if (!is_bias(name) && name != "out.W") {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape.first));
      for (double& x : t.data()) x = bound * (2.0 * uniform01(rng) - 1.0);
    }
    params_.add(name, std::move(t));
  }
  for (const auto& [name, target] : layout.aliases) params_.alias(name, target);
}

Model::Model(ModelConfig cfg, ParamStore params) : cfg_(cfg), params_(std::move(params)) {
  const ParamLayout layout = param_layout(cfg_);
  if (params_.slot_count() != layout.slots.size()) {
    throw InvalidArgument("parameter store has " + std::to_string(params_.slot_count()) +
                          " tensors, configuration expects " + std::to_string(layout.slots.size()));
  }
  for (std::size_t i = 0; i < layout.slots.size(); ++i) {
    const auto& [name, shape] = layout.slots[i];
    const Tensor& t = params_.slot_value(i);
    if (params_.slot_name(i) != name || t.rows() != shape.first || t.cols() != shape.second) {
      throw InvalidArgument("parameter '" + params_.slot_name(i) + "' " + shape_string(t) +
                            " does not match expected '" + name + "' [" + std::to_string(shape.first) +
                            "x" + std::to_string(shape.second) + "]");
    }
  }
  for (const auto& [name, target] : layout.aliases) {
    if (!params_.contains(name)) params_.alias(name, target);
    if (params_.slot_of(name) != params_.slot_of(target)) {
      throw InvalidArgument("parameter '" + name + "' must share storage with '" + target + "'");
    }
  }
}

Var Model::param(Tape& tape, const std::string& name) const { return tape.param(params_, name); }

void Model::check_condition(std::span<const double> f) const {
  if (f.size() != static_cast<std::size_t>(cfg_.embed_dim)) {
    throw InvalidArgument("shape condition has dimension " + std::to_string(f.size()) + ", expected " +
                          std::to_string(cfg_.embed_dim));
  }
}

void Model::check_coord(Coord c) const {
  if (c.u < 0 || c.u >= cfg_.resolution || c.v < 0 || c.v >= cfg_.resolution) {
    throw InvalidArgument("coordinate (" + std::to_string(c.u) + "," + std::to_string(c.v) + ") outside [0," +
                          std::to_string(cfg_.resolution) + ")^2");
  }
}

void check_target(std::span<const Token> target, int resolution) {
  try {
    (void)from_tokens(target, resolution);
  } catch (const FormatError& e) {
    throw InvalidArgument(std::string("invalid target: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Tape-level building blocks

Var Model::embed(Tape& tape, Axis axis, std::span<const int> classes) const {
  return row_gather(param(tape, embedding_name(axis)), classes);
}

// Update gate z, reset gate r, candidate n = tanh(x Wn + (r * h) Un + bn),
// h' = z * h + (1 - z) * n.
Var Model::gru(Tape& tape, const std::string& prefix, Var x, Var h) const {
  const auto hd = static_cast<std::size_t>(cfg_.hidden_dim);
  Var xw = add(matmul(x, param(tape, prefix + ".W")), param(tape, prefix + ".b"));
  Var hu = matmul(h, param(tape, prefix + ".U"));
  Var z = sigmoid(add(slice_cols(xw, 0, hd), slice_cols(hu, 0, hd)));
  Var r = sigmoid(add(slice_cols(xw, hd, hd), slice_cols(hu, hd, hd)));
  Var n = tanh(add(slice_cols(xw, 2 * hd, hd), matmul(mul(r, h), param(tape, prefix + ".Un"))));
  return add(n, mul(z, sub(h, n)));
}

Model::EncodedBatch Model::encode(Tape& tape, Var conditions, std::span<const Coord> coords) const {
  const std::size_t batch = coords.size();
  if (conditions.rows() != batch || conditions.cols() != static_cast<std::size_t>(cfg_.embed_dim)) {
    throw InvalidArgument("conditions " + shape_string(conditions.value()) + " do not match batch of " +
                          std::to_string(batch) + " and D=" + std::to_string(cfg_.embed_dim));
  }
  std::vector<int> first(batch), second(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    check_coord(coords[i]);
    first[i] = coords[i].u;  // class of Loc(u + 1)
    second[i] = coords[i].v;
  }
  const auto [p1, p2] = plane_axes(cfg_.axis);
  const std::vector<Var> inputs = {conditions, embed(tape, p1, first), embed(tape, p2, second)};

  const auto hd = static_cast<std::size_t>(cfg_.hidden_dim);
  std::vector<Var> fwd(kEncoderSteps);
  Var h = tape.constant(Tensor(batch, hd));
  for (int t = 0; t < kEncoderSteps; ++t) fwd[t] = h = gru(tape, "enc.fwd", inputs[t], h);

  EncodedBatch out;
  if (cfg_.bidirectional) {
    std::vector<Var> bwd(kEncoderSteps);
    Var hb = tape.constant(Tensor(batch, hd));
    for (int t = kEncoderSteps - 1; t >= 0; --t) bwd[t] = hb = gru(tape, "enc.bwd", inputs[t], hb);
    for (int t = 0; t < kEncoderSteps; ++t) out.states.push_back(concat({fwd[t], bwd[t]}, 1));
    Var last = concat({fwd[kEncoderSteps - 1], bwd[0]}, 1);
    out.hidden = tanh(add(matmul(last, param(tape, "enc.bridge.W")), param(tape, "enc.bridge.b")));
  } else {
    out.states = fwd;
    out.hidden = fwd[kEncoderSteps - 1];
  }
  if (cfg_.use_attention) {
    Var wh = param(tape, "att.Wh");
    for (const Var& s : out.states) out.projected.push_back(matmul(s, wh));
  }
  return out;
}

std::pair<Var, Var> Model::attend(Tape& tape, Var s_prev, const EncodedBatch& enc) const {
  const std::size_t steps = enc.states.size();
  if (steps == 0) throw InvalidArgument("attention needs at least one encoder state");
  const std::size_t batch = s_prev.rows();
  if (!cfg_.use_attention) {
    Tensor onehot(batch, steps);
    for (std::size_t i = 0; i < batch; ++i) onehot(i, steps - 1) = 1.0;
    return {enc.states.back(), tape.constant(std::move(onehot))};
  }
  Var q = matmul(s_prev, param(tape, "att.Ws"));
  Var v = param(tape, "att.v");
  std::vector<Var> scores;
  scores.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) scores.push_back(matmul(tanh(add(enc.projected[t], q)), v));
  Var weights = softmax(concat(scores, 1));
  Var context = mul(enc.states[0], slice_cols(weights, 0, 1));
  for (std::size_t t = 1; t < steps; ++t) context = add(context, mul(enc.states[t], slice_cols(weights, t, 1)));
  return {context, weights};
}

Model::StepVars Model::decode_step(Tape& tape, Var s_prev, Var y_prev, const EncodedBatch& enc) const {
  auto [context, weights] = attend(tape, s_prev, enc);
  Var s = gru(tape, "dec", concat({y_prev, context}, 1), s_prev);
  Var logits = add(matmul(concat({s, context}, 1), param(tape, "out.W")), param(tape, "out.b"));
  return {s, logits, weights};
}

Var Model::sequence_loss(Tape& tape, Var conditions, std::span<const Coord> coords,
                         std::span<const TokenSequence> targets) const {
  const std::size_t batch = coords.size();
  if (targets.size() != batch) throw InvalidArgument("sequence_loss: coords and targets differ in length");
  if (batch == 0) throw InvalidArgument("sequence_loss: empty batch");
  const int r = cfg_.resolution;
  std::size_t longest = 0;
  for (const auto& t : targets) {
    check_target(t, r);
    longest = std::max(longest, t.size());
  }
  const EncodedBatch enc = encode(tape, conditions, coords);
  const int eos = token_class(Token::Eos(), r);

  Var s = enc.hidden;
  Var y = embed(tape, cfg_.axis, repeat(token_class(Token::Sos(), r), batch));
  std::vector<Var> picked;
  picked.reserve(longest);
  std::vector<int> cls(batch), feed(batch);
  for (std::size_t k = 0; k < longest; ++k) {
    const StepVars step = decode_step(tape, s, y, enc);
    for (std::size_t i = 0; i < batch; ++i) {
      cls[i] = k < targets[i].size() ? token_class(targets[i][k], r) : -1;
      feed[i] = cls[i] >= 0 ? cls[i] : eos;
    }
    picked.push_back(pick(log_softmax(step.logits), cls));
    s = step.state;
    if (k + 1 < longest) y = embed(tape, cfg_.axis, feed);
  }
  return scale(sum(concat(picked, 1)), -1.0);
}

// ---------------------------------------------------------------------------
// Single-sample wrappers

namespace {

Model::EncodedBatch constants_of(Tape& tape, std::span<const Tensor> states, const ParamStore& params,
                                 bool attention) {
  Model::EncodedBatch enc;
  for (const Tensor& s : states) enc.states.push_back(tape.constant(s));
  if (attention) {
    Var wh = tape.constant(params.value("att.Wh"));
    for (const Var& s : enc.states) enc.projected.push_back(matmul(s, wh));
  }
  return enc;
}

std::vector<double> row_values(const Tensor& t, std::size_t r) {
  return {t.data().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
          t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols())};
}

}  // namespace

Tensor Model::embed_location(Axis axis, const Token& token) const {
  const int cls = token_class(token, cfg_.resolution);
  Tape tape(false);
  return embed(tape, axis, std::vector<int>{cls}).value();
}

EncoderOutput Model::encode(std::span<const double> f, Coord coord) const {
  check_condition(f);
  Tape tape(false);
  Var cond = tape.constant(Tensor::row({f.begin(), f.end()}));
  const std::vector<Coord> coords{coord};
  const EncodedBatch enc = encode(tape, cond, coords);
  EncoderOutput out;
  for (const Var& s : enc.states) out.states.push_back(s.value());
  out.hidden = enc.hidden.value();
  return out;
}

AttentionResult Model::attend(const Tensor& s_prev, std::span<const Tensor> enc_states) const {
  if (enc_states.empty()) throw InvalidArgument("attention needs at least one encoder state");
  Tape tape(false);
  const EncodedBatch enc = constants_of(tape, enc_states, params_, cfg_.use_attention);
  auto [context, weights] = attend(tape, tape.constant(s_prev), enc);
  return {context.value(), row_values(weights.value(), 0)};
}

DecodeStepResult Model::decode_step(const Tensor& s_prev, const Tensor& y_prev,
                                    std::span<const Tensor> enc_states) const {
  Tape tape(false);
  const EncodedBatch enc = constants_of(tape, enc_states, params_, cfg_.use_attention);
  const StepVars step = decode_step(tape, tape.constant(s_prev), tape.constant(y_prev), enc);
  return {step.state.value(), step.logits.value(), row_values(step.weights.value(), 0)};
}

double Model::sequence_loss(std::span<const double> f, Coord coord, const TokenSequence& target) const {
  check_condition(f);
  Tape tape(false);
  Var cond = tape.constant(Tensor::row({f.begin(), f.end()}));
  const std::vector<Coord> coords{coord};
  const std::vector<TokenSequence> targets{target};
  return sequence_loss(tape, cond, coords, targets).value()[0];
}

TokenSequence Model::greedy_decode(std::span<const double> f, Coord coord) const {
  const std::vector<Coord> coords{coord};
  return greedy_decode_batch(f, coords).front().tokens;
}

// ---------------------------------------------------------------------------
// Masked greedy decoding

namespace {

// Tracks which token classes keep the partial sequence parseable.
class Grammar {
 public:
  explicit Grammar(int resolution) : r_(resolution) {}

  bool done() const { return phase_ == Phase::kDone; }

  bool allowed(int cls) const {
    const int loc = cls < r_ ? cls + 1 : 0;  // 1-based, 0 for control tokens
    const int true_cls = r_, false_cls = r_ + 1, eos = r_ + 3;
    switch (phase_) {
      case Phase::kIndicator: return cls == true_cls || cls == false_cls;
      case Phase::kAfterFalse: return cls == eos;
      case Phase::kFirstStart: return loc >= 1;
      case Phase::kStart: return cls == eos || (loc >= 1 && loc >= prev_end_ + 2);
      case Phase::kEnd: return loc >= 1 && loc >= start_;
      case Phase::kDone: return false;
    }
    return false;
  }

  void accept(int cls) {
    const int loc = cls < r_ ? cls + 1 : 0;
    switch (phase_) {
      case Phase::kIndicator: phase_ = cls == r_ ? Phase::kFirstStart : Phase::kAfterFalse; break;
      case Phase::kAfterFalse: phase_ = Phase::kDone; break;
      case Phase::kFirstStart:
        start_ = loc;
        phase_ = Phase::kEnd;
        break;
      case Phase::kStart:
        if (loc == 0) {
          phase_ = Phase::kDone;
        } else {
          start_ = loc;
          phase_ = Phase::kEnd;
        }
        break;
      case Phase::kEnd:
        prev_end_ = loc;
        phase_ = Phase::kStart;
        break;
      case Phase::kDone: break;
    }
  }

  // Closes a sequence cut off by the step cap.
  void repair(TokenSequence& seq) const {
    switch (phase_) {
      case Phase::kEnd: seq.push_back(Token::Loc(start_)); [[fallthrough]];
      case Phase::kStart:
      case Phase::kAfterFalse: seq.push_back(Token::Eos()); break;
      case Phase::kIndicator:
      case Phase::kFirstStart: seq = {Token::False(), Token::Eos()}; break;
      case Phase::kDone: break;
    }
  }

 private:
  enum class Phase { kIndicator, kAfterFalse, kFirstStart, kStart, kEnd, kDone };
  int r_;
  Phase phase_ = Phase::kIndicator;
  int prev_end_ = 0;
  int start_ = 0;
};

}  // namespace

std::vector<DecodeTrace> Model::greedy_decode_batch(std::span<const double> f,
                                                    std::span<const Coord> coords) const {
  check_condition(f);
  const std::size_t batch = coords.size();
  std::vector<DecodeTrace> traces(batch);
  if (batch == 0) return traces;
  const int r = cfg_.resolution;
  const int vocab = cfg_.vocab();

  // Encoder outputs are kept as plain tensors so each decoder step can run on
  // a short-lived tape.
  std::vector<Tensor> states, projected;
  Tensor state;
  {
    Tape tape(false);
    Tensor cond(batch, f.size());
    for (std::size_t i = 0; i < batch; ++i) std::copy(f.begin(), f.end(), &cond(i, 0));
    const EncodedBatch enc = encode(tape, tape.constant(std::move(cond)), coords);
    for (const Var& s : enc.states) states.push_back(s.value());
    for (const Var& p : enc.projected) projected.push_back(p.value());
    state = enc.hidden.value();
  }

  std::vector<Grammar> grammar(batch, Grammar(r));
  std::vector<int> feed(batch, token_class(Token::Sos(), r));
  const int eos = token_class(Token::Eos(), r);
  const int cap = cfg_.decoder_step_cap();
  std::size_t active = batch;
  for (int k = 0; k < cap && active > 0; ++k) {
    Tape tape(false);
    EncodedBatch enc;
    for (const Tensor& s : states) enc.states.push_back(tape.constant(s));
    for (const Tensor& p : projected) enc.projected.push_back(tape.constant(p));
    const StepVars step = decode_step(tape, tape.constant(state), embed(tape, cfg_.axis, feed), enc);
    const Tensor& logits = step.logits.value();
    const Tensor& weights = step.weights.value();
    for (std::size_t i = 0; i < batch; ++i) {
      if (grammar[i].done()) {
        feed[i] = eos;
        continue;
      }
      int best = -1;
      for (int c = 0; c < vocab; ++c) {
        if (grammar[i].allowed(c) && (best < 0 || logits(i, c) > logits(i, best))) best = c;
      }
      grammar[i].accept(best);
      traces[i].tokens.push_back(token_from_class(best, r));
      traces[i].attention.push_back(row_values(weights, i));
      feed[i] = best;
      if (grammar[i].done()) --active;
    }
    state = step.state.value();
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (!grammar[i].done()) grammar[i].repair(traces[i].tokens);
  }
  return traces;
}

Reconstruction Model::reconstruct_shape(std::span<const double> f) const {
  const int r = cfg_.resolution;
  std::vector<Coord> coords;
  coords.reserve(static_cast<std::size_t>(r) * r);
  for (int u = 0; u < r; ++u) {
    for (int v = 0; v < r; ++v) coords.push_back({u, v});
  }
  Reconstruction out{VoxelGrid(r), 0, greedy_decode_batch(f, coords)};
  TubelizedShape shape;
  shape.resolution = r;
  shape.axis = cfg_.axis;
  shape.tubes.reserve(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    Tube tube = from_tokens(out.traces[i].tokens, r);
    tube.coord = coords[i];
    shape.tubes.push_back(std::move(tube));
    ++out.session_count;
  }
  out.grid = detubelize(shape);
  return out;
}

}  // namespace tubeseq
