// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

// Sequence-to-sequence tube generator.
//
// An encoder GRU (optionally bidirectional) reads [f, x1, x2]: the shape
// condition followed by the location embeddings of the tube's two plane
// coordinates. A decoder GRU with additive attention then emits the token
// sequence [b, s1, e1, ..., EOS] one class at a time, feeding back the
// embedding of the previous token looked up in the tube-axis matrix.
//
// Tape-level methods operate on batches: row i of every tensor belongs to
// sample i. The single-sample methods wrap them with a batch of one.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tubeseq/grid.hpp"
#include "tubeseq/tensor.hpp"
#include "tubeseq/tubelize.hpp"

namespace tubeseq {

enum class ShareMode : std::uint8_t { kNone = 0, kPlaneShared = 1, kAllShared = 2 };
enum class CellType : std::uint8_t { kGru = 0, kLstm = 1 };

std::string to_string(ShareMode m);
ShareMode parse_share_mode(const std::string& text);
std::string to_string(CellType c);
CellType parse_cell_type(const std::string& text);

struct ModelConfig {
  int resolution = 16;
  int embed_dim = 64;
  int hidden_dim = 64;
  ShareMode share_mode = ShareMode::kPlaneShared;
  Axis axis = Axis::kY;
  bool use_attention = true;
  bool bidirectional = true;
  /// Only GRU is implemented; kLstm is rejected by validate().
  CellType cell = CellType::kGru;
  /// 0 selects the longest legal target, 2*ceil(R/2) + 2.
  int max_dec_steps = 0;
  /// Upper bound on encoder length; the encoder always reads 3 inputs.
  int max_enc_steps = 3;

  void validate() const;
  int decoder_step_cap() const;
  int encoder_state_dim() const { return bidirectional ? 2 * hidden_dim : hidden_dim; }
  int vocab() const { return vocab_size(resolution); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr int kEncoderSteps = 3;

/// Parameter names and shapes a model with `cfg` owns, one entry per storage
/// slot in registration order, followed by the alias list (name, target).
struct ParamLayout {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> slots;
  std::vector<std::pair<std::string, std::string>> aliases;
};
ParamLayout param_layout(const ModelConfig& cfg);

/// Name of the embedding matrix for an axis: "emb.X", "emb.Y", "emb.Z".
std::string embedding_name(Axis a);

// Single-sample results.
struct EncoderOutput {
  std::vector<Tensor> states;  // kEncoderSteps rows of width encoder_state_dim
  Tensor hidden;               // 1 x H, decoder initial state
};

struct AttentionResult {
  Tensor context;               // 1 x encoder_state_dim
  std::vector<double> weights;  // one per encoder step
};

struct DecodeStepResult {
  Tensor state;   // 1 x H
  Tensor logits;  // 1 x (R + 4)
  std::vector<double> weights;
};

/// One greedy decoding session.
struct DecodeTrace {
  TokenSequence tokens;
  /// Attention weights for each token the network predicted (forced
  /// truncation-repair tokens have no entry).
  std::vector<std::vector<double>> attention;
};

struct Reconstruction {
  VoxelGrid grid;
  std::size_t session_count = 0;
  std::vector<DecodeTrace> traces;  // row-major (u, v)
};

class Model {
 public:
  /// Initializes weights uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)] and
  /// biases at zero, drawing from a generator seeded with `seed`.
  Model(ModelConfig cfg, std::uint64_t seed);
  /// Wraps existing parameters; throws InvalidArgument when they do not match
  /// param_layout(cfg).
  Model(ModelConfig cfg, ParamStore params);

  const ModelConfig& config() const noexcept { return cfg_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  // -- Tape-level, batched --------------------------------------------------

  struct EncodedBatch {
    std::vector<Var> states;     // per encoder step, B x H_enc
    std::vector<Var> projected;  // states[t] * Wh, only with attention
    Var hidden;                  // B x H
  };

  struct StepVars {
    Var state;    // B x H
    Var logits;   // B x (R + 4)
    Var weights;  // B x kEncoderSteps
  };

  /// Embedding rows for token classes from the given axis matrix.
  Var embed(Tape& tape, Axis axis, std::span<const int> classes) const;
  EncodedBatch encode(Tape& tape, Var conditions, std::span<const Coord> coords) const;
  /// Returns (context, weights).
  std::pair<Var, Var> attend(Tape& tape, Var s_prev, const EncodedBatch& enc) const;
  StepVars decode_step(Tape& tape, Var s_prev, Var y_prev, const EncodedBatch& enc) const;
  /// Teacher-forced negative log-likelihood, summed over every target token
  /// of every sequence (not averaged). `conditions` is B x D.
  Var sequence_loss(Tape& tape, Var conditions, std::span<const Coord> coords,
                    std::span<const TokenSequence> targets) const;

  // -- Single sample ---------------------------------------------------------

  Tensor embed_location(Axis axis, const Token& token) const;
  EncoderOutput encode(std::span<const double> f, Coord coord) const;
  AttentionResult attend(const Tensor& s_prev, std::span<const Tensor> enc_states) const;
  DecodeStepResult decode_step(const Tensor& s_prev, const Tensor& y_prev,
                               std::span<const Tensor> enc_states) const;
  double sequence_loss(std::span<const double> f, Coord coord, const TokenSequence& target) const;
  TokenSequence greedy_decode(std::span<const double> f, Coord coord) const;

  /// Masked greedy decoding of many tubes of one shape at once.
  std::vector<DecodeTrace> greedy_decode_batch(std::span<const double> f,
                                               std::span<const Coord> coords) const;
  /// Decodes all R^2 tubes in row-major order and assembles the grid.
  Reconstruction reconstruct_shape(std::span<const double> f) const;

 private:
  void check_condition(std::span<const double> f) const;
  void check_coord(Coord c) const;
  Var gru(Tape& tape, const std::string& prefix, Var x, Var h) const;
  Var param(Tape& tape, const std::string& name) const;

  ModelConfig cfg_;
  // Tape::param needs mutable access for gradient sinks; inference never writes.
  mutable ParamStore params_;
};

/// Validates a target against the grammar and resolution; throws InvalidArgument.
void check_target(std::span<const Token> target, int resolution);

}  // namespace tubeseq
