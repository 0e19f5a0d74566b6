// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tubeseq/error.hpp"
#include "tubeseq/eval.hpp"
#include "tubeseq/gradcheck.hpp"
#include "tubeseq/pipeline.hpp"
#include "tubeseq/train.hpp"
#include "tubeseq/tubelize.hpp"

using namespace tubeseq;

namespace {

// --- pinned tolerances and budgets ---------------------------------------------

constexpr int kCodecGrids = 200;
constexpr double kCodecSeconds = 30.0;
constexpr double kGradTolerance = 1e-4;
constexpr int kGradSeeds = 20;
constexpr double kGradSeconds = 120.0;
constexpr const char* kDeskSuite = "sphere";
constexpr int kDeskShapes = 8;
constexpr int kDeskResolution = 16;
constexpr int kDeskWidth = 64;
constexpr int kDeskMaxSteps = 5000;
constexpr int kDeskBatch = 64;
constexpr double kDeskLearningRate = 1e-3;
constexpr double kDeskAdamEps = 8e-6;
constexpr double kDeskMinIou = 95.0;
constexpr double kDeskSeconds = 600.0;
constexpr double kSharedMinIou = 90.0;
constexpr int kDecodeDraws = 500;
constexpr double kAttentionSumTolerance = 1e-12;
constexpr int kFitSteps = 2000;
constexpr double kFitMinReduction = 0.5;
constexpr std::uint64_t kShapeSeed = 7;
constexpr std::uint64_t kRunSeed = 0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- shared desk-scale runs -------------------------------------------------------

ShapeSet desk_shapes_with_holdout() {
  return generate_shapes(kDeskSuite, kDeskResolution, kDeskShapes + 1, kShapeSeed);
}

ShapeSet desk_shapes() {
  ShapeSet all = desk_shapes_with_holdout();
  all.ids.pop_back();
  all.grids.pop_back();
  return all;
}

RunConfig desk_config(Axis axis, ShareMode share, bool attention) {
  RunConfig cfg;
  cfg.model.resolution = kDeskResolution;
  cfg.model.embed_dim = kDeskWidth;
  cfg.model.hidden_dim = kDeskWidth;
  cfg.model.axis = axis;
  cfg.model.share_mode = share;
  cfg.model.use_attention = attention;
  cfg.train.learning_rate = kDeskLearningRate;
  cfg.train.adam_eps = kDeskAdamEps;
  cfg.train.batch_size = kDeskBatch;
  cfg.train.max_steps = kDeskMaxSteps;
  cfg.train.seed = kRunSeed;
  cfg.train.eval_interval = 250;
  cfg.train.target_iou = 99.0;
  return cfg;
}

struct DeskRun {
  std::optional<TrainRun> run;
  double seconds = 0.0;
  std::string error;

  double final_iou() const { return run && !run->log.ious.empty() ? run->log.ious.back().mean_iou : 0.0; }
  std::size_t steps() const { return run ? run->log.losses.size() : 0; }
};

DeskRun desk_run(const RunConfig& cfg) {
  DeskRun out;
  const auto t0 = Clock::now();
  try {
    out.run.emplace(run_training(cfg, desk_shapes()));
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = seconds_since(t0);
  return out;
}

const DeskRun& baseline_run() {
  static const DeskRun run = desk_run(desk_config(Axis::kY, ShareMode::kPlaneShared, true));
  return run;
}

Outcome desk_outcome(const DeskRun& r, double min_iou) {
  if (!r.run) return {false, "training failed: " + r.error};
  const bool pass = r.final_iou() >= min_iou && r.seconds <= kDeskSeconds;
  return {pass, fmt("mean train IoU %.2f (>= %.0f) after %zu steps, %.0f s (<= %.0f s)", r.final_iou(), min_iou,
                    r.steps(), r.seconds, kDeskSeconds)};
}

// --- criteria -------------------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = Clock::now();
  std::size_t grids = 0, failures = 0;
  for (int r : {4, 8, 16, 32}) {
    for (Axis axis : {Axis::kX, Axis::kY, Axis::kZ}) {
      for (int i = 0; i < kCodecGrids; ++i) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(r * 1000 + static_cast<int>(axis) * 300 + i));
        const double density = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        VoxelGrid g(r);
        for (auto& c : g.mutable_cells()) c = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < density;
        const TubelizedShape t = tubelize(g, axis);
        bool ok = detubelize(t) == g;
        for (const Tube& tube : t.tubes) ok = ok && from_tokens(to_tokens(tube), r).segments == tube.segments;
        failures += !ok;
        ++grids;
      }
    }
  }
  const double s = seconds_since(t0);
  return {failures == 0 && s < kCodecSeconds,
          fmt("%zu grids, %zu mismatches, %.1f s (< %.0f s)", grids, failures, s, kCodecSeconds)};
}

Outcome criterion_2() {
  VoxelGrid g(5);
  for (int z : {1, 3, 4, 5}) g.set(5 - 1, 5 - 1, z - 1, true);
  const TubelizedShape shape = tubelize(g, Axis::kZ);
  const Tube& tube = shape.at(4, 4);
  using T = Token;
  const TokenSequence expected{T::True(), T::Loc(1), T::Loc(1), T::Loc(3), T::Loc(5), T::Eos()};
  const TokenSequence got = to_tokens(tube);
  const bool seg_ok = tube.segments == std::vector<OccupancySegment>{{1, 1}, {3, 5}};
  std::string seq;
  for (const Token& t : got) seq += (seq.empty() ? "" : ",") + to_string(t);
  return {seg_ok && got == expected, "tokens [" + seq + "]"};
}

Outcome criterion_3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const GradCheckCase& c : gradcheck_suite(kGradSeeds)) {
    ++cases;
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_name = c.name;
    }
  }
  const double s = seconds_since(t0);
  return {worst < kGradTolerance && s < kGradSeconds,
          fmt("%zu checks, max relative error %.2e (%s) < %.0e, %.1f s", cases, worst, worst_name.c_str(),
              kGradTolerance, s)};
}

Outcome criterion_4() { return desk_outcome(baseline_run(), kDeskMinIou); }

Outcome criterion_5() {
  const DeskRun x = desk_run(desk_config(Axis::kX, ShareMode::kPlaneShared, true));
  const DeskRun z = desk_run(desk_config(Axis::kZ, ShareMode::kPlaneShared, true));
  const Outcome ox = desk_outcome(x, kDeskMinIou);
  const Outcome oz = desk_outcome(z, kDeskMinIou);
  return {ox.pass && oz.pass, "X: " + ox.detail + "; Z: " + oz.detail};
}

Outcome criterion_6() {
  std::string detail;
  bool pass = true;
  for (int r : {4, 8, 16}) {
    ModelConfig cfg;
    cfg.resolution = r;
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    const Model m(cfg, static_cast<std::uint64_t>(r));
    const Reconstruction rec = m.reconstruct_shape(std::vector<double>(8, 0.1));
    const auto expected = static_cast<std::size_t>(r * r);
    pass = pass && rec.session_count == expected && rec.traces.size() == expected;
    detail += fmt("%sR=%d: %zu sessions", detail.empty() ? "" : ", ", r, rec.session_count);
  }
  return {pass, detail};
}

Outcome criterion_7() {
  std::mt19937_64 rng(2024);
  std::size_t sequences = 0, violations = 0;
  for (int draw = 0; draw < kDecodeDraws; ++draw) {
    ModelConfig cfg;
    cfg.resolution = 2 + static_cast<int>(rng() % 15);
    cfg.embed_dim = 4 + static_cast<int>(rng() % 5);
    cfg.hidden_dim = 4 + static_cast<int>(rng() % 5);
    cfg.use_attention = rng() % 2;
    cfg.bidirectional = rng() % 2;
    cfg.share_mode = static_cast<ShareMode>(rng() % 3);
    Model m(cfg, rng());
    const double scale = std::array{0.1, 1.0, 3.0, 10.0}[rng() % 4];
    std::uniform_real_distribution<double> u(-scale, scale);
    for (std::size_t s = 0; s < m.params().slot_count(); ++s) {
      for (double& x : m.params().slot_value(s).data()) x = u(rng);
    }
    std::vector<double> f(static_cast<std::size_t>(cfg.embed_dim));
    for (double& x : f) x = u(rng);
    std::vector<Coord> coords(8);
    for (Coord& c : coords) {
      c = {static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.resolution)),
           static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.resolution))};
    }
    for (const DecodeTrace& t : m.greedy_decode_batch(f, coords)) {
      ++sequences;
      try {
        from_tokens(t.tokens, cfg.resolution);
      } catch (const FormatError&) {
        ++violations;
      }
    }
  }
  return {violations == 0, fmt("%d parameter draws, %zu sequences, %zu violations", kDecodeDraws, sequences,
                               violations)};
}

Outcome criterion_8() {
  const DeskRun& base = baseline_run();
  if (!base.run) return {false, "baseline training failed: " + base.error};
  const Model& model = base.run->state.model;
  double worst_sum = 0.0, min_h = 1e9, max_h = -1e9;
  std::size_t sentinel_mismatch = 0, sentinels = 0;
  const int steps = model.config().decoder_step_cap();
  for (std::size_t s = 0; s < base.run->state.latents.size(); ++s) {
    const std::vector<double> f = base.run->state.latents.row(s);
    const Reconstruction rec = model.reconstruct_shape(f);
    for (const DecodeTrace& t : rec.traces) {
      for (const auto& w : t.attention) {
        double total = 0.0;
        for (double x : w) total += x;
        worst_sum = std::max(worst_sum, std::abs(total - 1.0));
      }
    }
    const auto maps = attention_entropy_maps_raw(model, f, steps);
    for (std::size_t k = 0; k < maps.size(); ++k) {
      for (std::size_t i = 0; i < rec.traces.size(); ++i) {
        const bool ended = k >= rec.traces[i].attention.size();
        const double v = maps[k].values[i];
        if (ended != (v == kNoStepSentinel) || ended == maps[k].present[i]) ++sentinel_mismatch;
        if (ended) {
          ++sentinels;
        } else {
          min_h = std::min(min_h, v);
          max_h = std::max(max_h, v);
        }
      }
    }
  }
  const double cap = std::log2(3.0);
  const bool pass = worst_sum <= kAttentionSumTolerance && min_h >= 0.0 && max_h <= cap + 1e-12 &&
                    sentinel_mismatch == 0 && sentinels > 0;
  return {pass, fmt("max |sum-1| %.1e, entropy in [%.4f, %.4f] of [0, %.4f], %zu sentinels, %zu misplaced",
                    worst_sum, min_h, max_h, cap, sentinels, sentinel_mismatch)};
}

Outcome criterion_9() {
  const DeskRun& base = baseline_run();
  if (!base.run) return {false, "baseline training failed: " + base.error};
  const Model& model = base.run->state.model;
  const ShapeSet all = desk_shapes_with_holdout();
  const std::vector<VoxelGrid> held{all.grids.back()};
  TrainConfig cfg = base.run->state.train_cfg;
  cfg.fit_steps = kFitSteps;
  const std::uint64_t before = model.params().checksum();
  const FitResult fit = fit_latents(model, held, {all.ids.back()}, cfg);
  const bool unchanged = model.params().checksum() == before;
  const double reduction = 1.0 - fit.final_loss / fit.initial_loss;
  return {unchanged && reduction >= kFitMinReduction,
          fmt("%s: loss %.3f -> %.3f (%.1f%% reduction, >= %.0f%%) in %d steps, model checksum %s",
              all.ids.back().c_str(), fit.initial_loss, fit.final_loss, 100.0 * reduction, 100.0 * kFitMinReduction,
              kFitSteps, unchanged ? "unchanged" : "CHANGED")};
}

Outcome criterion_10() {
  const DeskRun shared = desk_run(desk_config(Axis::kY, ShareMode::kAllShared, true));
  const Outcome os = desk_outcome(shared, kSharedMinIou);
  const DeskRun noatt = desk_run(desk_config(Axis::kY, ShareMode::kPlaneShared, false));
  const bool noatt_ok = noatt.run.has_value();
  return {os.pass && noatt_ok,
          "all_shared: " + os.detail +
              (noatt_ok ? fmt("; no-attention completed %zu steps, IoU %.2f, %.0f s", noatt.steps(),
                              noatt.final_iou(), noatt.seconds)
                        : "; no-attention failed: " + noatt.error)};
}

Outcome criterion_11() {
  const DeskRun& first = baseline_run();
  if (!first.run) return {false, "baseline training failed: " + first.error};
  const DeskRun second = desk_run(desk_config(Axis::kY, ShareMode::kPlaneShared, true));
  if (!second.run) return {false, "rerun failed: " + second.error};
  const auto a = write_checkpoint(first.run->state);
  const auto b = write_checkpoint(second.run->state);
  const std::string la = first.run->log.to_text();
  const std::string lb = second.run->log.to_text();
  return {a == b && la == lb, fmt("checkpoints %zu bytes %s, metric logs %zu bytes %s", a.size(),
                                  a == b ? "identical" : "DIFFER", la.size(), la == lb ? "identical" : "DIFFER")};
}

Outcome criterion_12() {
  const VoxelGrid g = gen_primitive(Primitive::sphere({16, 16, 16}, 12.0), 32);
  const std::size_t dense = write_dense(g).size();
  const std::size_t payload = g.cell_count();
  const std::size_t vtz = write_vtz(tubelize(g, Axis::kY)).size();
  return {vtz < payload, fmt("%zu occupied voxels; VTZ %zu bytes vs VOXD payload %zu (file %zu), ratio %.4f",
                             g.occupied_count(), vtz, payload, dense,
                             static_cast<double>(vtz) / static_cast<double>(payload))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"codec losslessness", criterion_1}},
      {2, {"R=5 tube fixture", criterion_2}},
      {3, {"gradient oracle", criterion_3}},
      {4, {"desk-scale learning (Y axis)", criterion_4}},
      {5, {"axis indifference (X, Z)", criterion_5}},
      {6, {"R^2 decoder sessions", criterion_6}},
      {7, {"decode validity", criterion_7}},
      {8, {"attention properties", criterion_8}},
      {9, {"test-time latent fitting", criterion_9}},
      {10, {"shared embeddings and no attention", criterion_10}},
      {11, {"determinism", criterion_11}},
      {12, {"storage", criterion_12}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s: %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", entry.first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
