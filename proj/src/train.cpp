// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "tubeseq/error.hpp"

namespace tubeseq {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller on the portable uniform draw.
double gaussian(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be > 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw InvalidArgument("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw InvalidArgument("adam_beta2 must be in [0, 1)");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (max_steps < 0) throw InvalidArgument("max_steps must be >= 0");
  if (!(empty_tube_keep_ratio > 0.0 && empty_tube_keep_ratio <= 1.0)) {
    throw InvalidArgument("empty_tube_keep_ratio must be in (0, 1]");
  }
  if (eval_interval < 0) throw InvalidArgument("eval_interval must be >= 0");
  if (fit_steps < 0) throw InvalidArgument("fit_steps must be >= 0");
}

std::vector<TubeSample> make_dataset(std::span<const VoxelGrid> shapes, Axis axis, double keep_ratio,
                                     std::uint64_t seed) {
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) throw InvalidArgument("keep_ratio must be in (0, 1]");
  if (shapes.empty()) return {};
  const int r = shapes.front().resolution();
  for (const auto& g : shapes) {
    if (g.resolution() != r) {
      throw InvalidArgument("dataset mixes resolutions " + std::to_string(r) + " and " +
                            std::to_string(g.resolution()));
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<TubeSample> out;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const TubelizedShape t = tubelize(shapes[s], axis);
    for (const Tube& tube : t.tubes) {
      if (tube.segments.empty() && uniform01(rng) >= keep_ratio) continue;
      out.push_back({static_cast<int>(s), tube.coord, to_tokens(tube)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LatentTable

LatentTable::LatentTable(std::vector<std::string> ids, int dim, std::uint64_t seed) : ids_(std::move(ids)) {
  if (dim < 1) throw InvalidArgument("latent dimension must be >= 1");
  std::mt19937_64 rng(seed);
  Tensor t(ids_.size(), static_cast<std::size_t>(dim));
  for (double& x : t.data()) x = 0.01 * gaussian(rng);
  store_.add("latents", std::move(t));
}

LatentTable::LatentTable(std::vector<std::string> ids, Tensor values) : ids_(std::move(ids)) {
  if (values.rows() != ids_.size()) {
    throw InvalidArgument("latent table has " + std::to_string(ids_.size()) + " ids but " +
                          std::to_string(values.rows()) + " rows");
  }
  store_.add("latents", std::move(values));
}

std::size_t LatentTable::find(const std::string& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) throw InvalidArgument("no latent with id '" + id + "'");
  return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<double> LatentTable::row(std::size_t i) const {
  const Tensor& t = values();
  if (i >= t.rows()) throw InvalidArgument("latent row " + std::to_string(i) + " out of range");
  const auto d = t.data();
  return {d.begin() + static_cast<std::ptrdiff_t>(i * t.cols()),
          d.begin() + static_cast<std::ptrdiff_t>((i + 1) * t.cols())};
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_params(const ParamStore& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.slot_count(); ++i) {
    const Tensor& p = params.slot_value(i);
    s.m.emplace_back(p.rows(), p.cols());
    s.v.emplace_back(p.rows(), p.cols());
  }
  return s;
}

AdamConfig adam_config(const TrainConfig& cfg) {
  return {cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
}

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::int64_t t,
                 const AdamConfig& cfg) {
  if (!param.same_shape(grad) || !param.same_shape(m) || !param.same_shape(v)) {
    throw InvalidArgument("adam: shape mismatch between " + shape_string(param) + " and its gradient/moments");
  }
  if (t < 1) throw InvalidArgument("adam: step must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void adam_step(ParamStore& params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.size() != params.slot_count() || state.v.size() != params.slot_count()) {
    throw InvalidArgument("adam: state tracks " + std::to_string(state.m.size()) + " tensors, store has " +
                          std::to_string(params.slot_count()));
  }
  ++state.step;
  for (std::size_t i = 0; i < params.slot_count(); ++i) {
    adam_update(params.slot_value(i), params.slot_grad(i), state.m[i], state.v[i], state.step, cfg);
  }
}

// ---------------------------------------------------------------------------
// Training

std::string MetricsLog::to_text() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& l : losses) os << "loss " << l.step << ' ' << l.loss << '\n';
  for (const auto& i : ious) os << "iou " << i.step << ' ' << i.mean_iou << '\n';
  return os.str();
}

TrainingState::TrainingState(Model m, LatentTable l, TrainConfig cfg)
    : model(std::move(m)),
      latents(std::move(l)),
      model_opt(AdamState::for_params(model.params())),
      latent_opt(AdamState::for_params(latents.store())),
      train_cfg(cfg) {}

double mean_train_iou(const Model& model, const LatentTable& latents, std::span<const VoxelGrid> shapes) {
  if (shapes.empty()) return 0.0;
  if (latents.size() < shapes.size()) throw InvalidArgument("fewer latents than shapes");
  double total = 0.0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const Reconstruction rec = model.reconstruct_shape(latents.row(i));
    total += 100.0 * volumetric_iou(rec.grid, shapes[i]);
  }
  return total / static_cast<double>(shapes.size());
}

namespace {

// Batch schedule: the concatenation of per-epoch permutations, each seeded by
// (seed, epoch), so the batch at any step depends only on (seed, step).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::vector<std::size_t> batch(std::int64_t step, int size) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(size));
    const auto begin = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(size);
    for (std::uint64_t pos = begin; pos < begin + static_cast<std::uint64_t>(size); ++pos) {
      const std::uint64_t epoch = pos / n_;
      if (epoch != epoch_ || perm_.empty()) shuffle(epoch);
      out.push_back(perm_[pos % n_]);
    }
    return out;
  }

 private:
  void shuffle(std::uint64_t epoch) {
    epoch_ = epoch;
    perm_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) perm_[i] = i;
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(seq);
    for (std::size_t i = n_; i > 1; --i) std::swap(perm_[i - 1], perm_[rng() % i]);
  }

  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

struct Batch {
  std::vector<int> shape_ids;
  std::vector<Coord> coords;
  std::vector<TokenSequence> targets;
};

Batch gather(std::span<const TubeSample> dataset, const std::vector<std::size_t>& idx) {
  Batch b;
  for (std::size_t i : idx) {
    b.shape_ids.push_back(dataset[i].shape_id);
    b.coords.push_back(dataset[i].coord);
    b.targets.push_back(dataset[i].target);
  }
  return b;
}

void check_shape_ids(std::span<const TubeSample> dataset, const LatentTable& latents) {
  for (const auto& s : dataset) {
    if (s.shape_id < 0 || static_cast<std::size_t>(s.shape_id) >= latents.size()) {
      throw InvalidArgument("sample refers to shape " + std::to_string(s.shape_id) + " but only " +
                            std::to_string(latents.size()) + " latents exist");
    }
  }
}

}  // namespace

double dataset_loss(const Model& model, const LatentTable& latents, std::span<const TubeSample> samples) {
  if (samples.empty()) throw InvalidArgument("dataset_loss: no samples");
  check_shape_ids(samples, latents);
  constexpr std::size_t kChunk = 256;
  double total = 0.0;
  for (std::size_t begin = 0; begin < samples.size(); begin += kChunk) {
    const std::size_t end = std::min(samples.size(), begin + kChunk);
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    const Batch b = gather(samples, idx);
    Tape tape(false);
    Var conds = row_gather(tape.constant(latents.values()), b.shape_ids);
    total += model.sequence_loss(tape, conds, b.coords, b.targets).value()[0];
  }
  return total / static_cast<double>(samples.size());
}

MetricsLog train(TrainingState& state, std::span<const TubeSample> dataset, std::span<const VoxelGrid> shapes,
                 const StepCallback& on_step) {
  const TrainConfig& cfg = state.train_cfg;
  cfg.validate();
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  if (state.latents.dim() != state.model.config().embed_dim) {
    throw InvalidArgument("latent dimension " + std::to_string(state.latents.dim()) + " differs from D=" +
                          std::to_string(state.model.config().embed_dim));
  }
  check_shape_ids(dataset, state.latents);

  const AdamConfig acfg = adam_config(cfg);
  BatchSampler sampler(dataset.size(), cfg.seed);
  MetricsLog log;
  ParamStore& params = state.model.params();
  ParamStore& latent_store = state.latents.store();
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);

  for (int i = 0; i < cfg.max_steps; ++i) {
    const std::int64_t step = state.model_opt.step;
    const Batch b = gather(dataset, sampler.batch(step, cfg.batch_size));

    Tape tape;
    if (!cfg.train_latents) tape.freeze(latent_store);
    Var conds = row_gather(tape.param(latent_store, "latents"), b.shape_ids);
    Var loss = scale(state.model.sequence_loss(tape, conds, b.coords, b.targets), inv_batch);
    params.zero_grad();
    latent_store.zero_grad();
    tape.backward(loss);
    adam_step(params, state.model_opt, acfg);
    if (cfg.train_latents) adam_step(latent_store, state.latent_opt, acfg);

    const int done = static_cast<int>(state.model_opt.step);
    const double value = loss.value()[0];
    log.losses.push_back({done, value});
    if (on_step) on_step(done, value);

    const bool last = i + 1 == cfg.max_steps;
    if (!shapes.empty() && cfg.eval_interval > 0 && (done % cfg.eval_interval == 0 || last)) {
      const double iou = mean_train_iou(state.model, state.latents, shapes);
      log.ious.push_back({done, iou});
      if (cfg.target_iou > 0.0 && iou >= cfg.target_iou) break;
    }
  }
  return log;
}

FitResult fit_latents(const Model& model, std::span<const VoxelGrid> shapes, std::vector<std::string> ids,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (ids.size() != shapes.size()) throw InvalidArgument("fit_latents: one id per shape required");
  FitResult out{LatentTable(std::move(ids), model.config().embed_dim, cfg.seed), {}, 0.0, 0.0};
  if (shapes.empty()) return out;
  const std::vector<TubeSample> dataset =
      make_dataset(shapes, model.config().axis, cfg.empty_tube_keep_ratio, cfg.seed);
  if (dataset.empty()) return out;
  out.initial_loss = dataset_loss(model, out.latents, dataset);

  const AdamConfig acfg = adam_config(cfg);
  AdamState opt = AdamState::for_params(out.latents.store());
  BatchSampler sampler(dataset.size(), cfg.seed);
  ParamStore& store = out.latents.store();
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  for (int i = 0; i < cfg.fit_steps; ++i) {
    const Batch b = gather(dataset, sampler.batch(opt.step, cfg.batch_size));
    Tape tape;
    tape.freeze(model.params());
    Var conds = row_gather(tape.param(store, "latents"), b.shape_ids);
    Var loss = scale(model.sequence_loss(tape, conds, b.coords, b.targets), inv_batch);
    store.zero_grad();
    tape.backward(loss);
    adam_step(store, opt, acfg);
    out.loss_trace.push_back(loss.value()[0]);
  }
  out.final_loss = dataset_loss(model, out.latents, dataset);
  return out;
}

}  // namespace tubeseq
