// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tubeseq/grid.hpp"
#include "tubeseq/model.hpp"
#include "tubeseq/tensor.hpp"
#include "tubeseq/tubelize.hpp"

namespace tubeseq {

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_eps = 8e-6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  int batch_size = 64;
  int max_steps = 5000;
  std::uint64_t seed = 0;
  double empty_tube_keep_ratio = 1.0;
  /// Steps between train-IoU evaluations; 0 disables them.
  int eval_interval = 250;
  /// Stop once the mean train IoU (x100) reaches this value; 0 disables.
  double target_iou = 0.0;
  bool train_latents = true;
  /// Adam steps used by fit_latents.
  int fit_steps = 1000;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TubeSample {
  int shape_id = 0;
  Coord coord;
  TokenSequence target;
};

/// One sample per (shape, coord) in shape then row-major order. Empty tubes
/// survive independently with probability `keep_ratio` under `seed`.
std::vector<TubeSample> make_dataset(std::span<const VoxelGrid> shapes, Axis axis, double keep_ratio,
                                     std::uint64_t seed);

/// One learnable D-dimensional condition per shape, stored as the rows of a
/// single "latents" parameter so the tape can gather them.
class LatentTable {
 public:
  LatentTable() = default;
  /// Zero-mean Gaussian init, sigma 0.01.
  LatentTable(std::vector<std::string> ids, int dim, std::uint64_t seed);
  LatentTable(std::vector<std::string> ids, Tensor values);

  std::size_t size() const noexcept { return ids_.size(); }
  int dim() const noexcept { return static_cast<int>(store_.slot_count() ? values().cols() : 0); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  /// Index of `id`; throws InvalidArgument when absent.
  std::size_t find(const std::string& id) const;

  std::vector<double> row(std::size_t i) const;
  const Tensor& values() const { return store_.value("latents"); }
  Tensor& values() { return store_.value("latents"); }
  ParamStore& store() noexcept { return store_; }
  const ParamStore& store() const noexcept { return store_; }

 private:
  std::vector<std::string> ids_;
  ParamStore store_;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  /// Zero moments shaped like every slot of `params`.
  static AdamState for_params(const ParamStore& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 8e-6;
};
AdamConfig adam_config(const TrainConfig& cfg);

/// Bias-corrected Adam on one tensor at (1-based) step `t`.
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                 const AdamConfig& cfg);
/// Applies one Adam step to every slot of `params` using its stored gradients.
void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg);

struct MetricsLog {
  struct LossRecord {
    int step;
    double loss;
  };
  struct IouRecord {
    int step;
    double mean_iou;  // x100
  };
  std::vector<LossRecord> losses;
  std::vector<IouRecord> ious;

  /// Line-oriented text with full-precision values, used for determinism checks.
  std::string to_text() const;
};

/// Everything a training run owns; saved and restored by checkpoints.
struct TrainingState {
  Model model;
  LatentTable latents;
  AdamState model_opt;
  AdamState latent_opt;
  TrainConfig train_cfg;

  TrainingState(Model m, LatentTable l, TrainConfig cfg);
};

/// Mean train IoU (x100) of the latents' reconstructions against `shapes`.
double mean_train_iou(const Model& model, const LatentTable& latents, std::span<const VoxelGrid> shapes);

/// Mean per-sequence loss (sum over tokens) over `samples`, using each
/// sample's latent row, evaluated in chunks without recording.
double dataset_loss(const Model& model, const LatentTable& latents, std::span<const TubeSample> samples);

using StepCallback = std::function<void(int step, double loss)>;

/// Minimizes the batch-mean of per-sequence losses over model parameters
/// (and latents when train_latents is set). `shapes` feed the periodic train
/// IoU and may be empty to skip it.
MetricsLog train(TrainingState& state, std::span<const TubeSample> dataset, std::span<const VoxelGrid> shapes,
                 const StepCallback& on_step = {});

struct FitResult {
  LatentTable latents;
  std::vector<double> loss_trace;  // batch loss per step
  double initial_loss = 0.0;       // dataset_loss before the first step
  double final_loss = 0.0;         // dataset_loss after the last step
};

/// Fits fresh latents for `shapes` with the model frozen.
FitResult fit_latents(const Model& model, std::span<const VoxelGrid> shapes, std::vector<std::string> ids,
                      const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Checkpoints: "TSCK <version>\n", a text manifest, "end\n", then the f64
// little-endian payloads of every declared tensor in manifest order.

inline constexpr int kCheckpointVersion = 1;

std::vector<std::uint8_t> write_checkpoint(const TrainingState& state);
TrainingState read_checkpoint(std::span<const std::uint8_t> bytes);
/// Also requires the stored model to match `expected`; a mismatch names the
/// first offending tensor.
TrainingState read_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& expected);
void save_checkpoint(const TrainingState& state, const std::string& path);
TrainingState load_checkpoint(const std::string& path);

/// External condition vectors: "FEAT", u32 count, u32 D, count*D f64, little-endian.
std::vector<std::uint8_t> write_features(const Tensor& features);
Tensor read_features(std::span<const std::uint8_t> bytes);

}  // namespace tubeseq
