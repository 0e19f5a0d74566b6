// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

// tubeseq command-line tool.
//
// Exit codes: 0 success, 1 runtime or format failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tubeseq/config.hpp"
#include "tubeseq/error.hpp"
#include "tubeseq/eval.hpp"
#include "tubeseq/gradcheck.hpp"
#include "tubeseq/grid.hpp"
#include "tubeseq/pipeline.hpp"
#include "tubeseq/train.hpp"
#include "tubeseq/tubelize.hpp"

namespace fs = std::filesystem;
using namespace tubeseq;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

void write_map(const ScalarMap& map, const fs::path& dir, const std::string& stem) {
  write_ppm(map, join(dir, stem + ".ppm"));
  write_csv(map, join(dir, stem + ".csv"));
}

// --- gen-data ---------------------------------------------------------------

struct GenDataArgs {
  std::string kind;
  int resolution = 0;
  int count = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  const ShapeSet shapes = generate_shapes(a.kind, a.resolution, a.count, a.seed);
  for (const std::string& p : write_shape_dir(shapes, a.out)) std::cout << p << '\n';
  return 0;
}

// --- tubelize / detubelize ----------------------------------------------------

int run_tubelize(const std::string& in, const std::string& axis, const std::string& out) {
  const VoxelGrid g = read_dense(read_file(in));
  write_file(out, write_vtz(tubelize(g, parse_axis(axis))));
  return 0;
}

int run_detubelize(const std::string& in, const std::string& out) {
  write_file(out, write_dense(detubelize(read_vtz(read_file(in)))));
  return 0;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
};

RunConfig config_or_usage_error(const std::string& path) {
  try {
    return load_run_config(path);
  } catch (const InvalidArgument& e) {
    throw UsageError(path + ": " + e.what());
  }
}

int run_train(TrainArgs a) {
  const RunConfig cfg = config_or_usage_error(a.config);
  if (a.data.empty()) a.data = cfg.data_dir;
  if (a.out.empty()) a.out = cfg.out_path;
  if (a.data.empty()) throw UsageError("--data is required (or set 'data' in the config)");
  if (a.out.empty()) throw UsageError("--out is required (or set 'out' in the config)");
  if (a.log.empty()) a.log = a.out + ".metrics";

  const ShapeSet shapes = load_shape_dir(a.data);
  TrainRun run = run_training(cfg, shapes);
  save_checkpoint(run.state, a.out);
  const std::string text = run.log.to_text();
  write_file(a.log, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));

  const auto& losses = run.log.losses;
  std::printf("steps %zu\n", losses.size());
  if (!losses.empty()) std::printf("final_loss %.6f\n", losses.back().loss);
  if (!run.log.ious.empty()) std::printf("train_iou %.4f\n", run.log.ious.back().mean_iou);
  return 0;
}

// --- fit ------------------------------------------------------------------------

struct FitArgs {
  std::string ckpt;
  std::string data;
  std::string out;
  int steps = 0;
};

int run_fit(const FitArgs& a) {
  const TrainingState state = load_checkpoint(a.ckpt);
  const ShapeSet shapes = load_shape_dir(a.data);
  TrainConfig cfg = state.train_cfg;
  if (a.steps > 0) cfg.fit_steps = a.steps;
  const FitResult fit = fit_latents(state.model, shapes.grids, shapes.ids, cfg);
  write_file(a.out, write_features(fit.latents.values()));
  std::printf("initial_loss %.6f\nfinal_loss %.6f\n", fit.initial_loss, fit.final_loss);
  return 0;
}

// --- reconstruct ------------------------------------------------------------------

int run_reconstruct(const std::string& ckpt, const std::string& latent, std::size_t row, const std::string& out) {
  const TrainingState state = load_checkpoint(ckpt);
  const std::vector<double> f = resolve_condition(state, latent, row);
  const Reconstruction rec = state.model.reconstruct_shape(f);
  write_file(out, write_dense(rec.grid));
  std::printf("sessions %zu\noccupied %zu\n", rec.session_count, rec.grid.occupied_count());
  return 0;
}

// --- eval -----------------------------------------------------------------------

int run_eval(const std::string& ckpt, const std::string& latents, const std::string& data,
             const std::string& report_path) {
  const TrainingState state = load_checkpoint(ckpt);
  const ShapeSet shapes = load_shape_dir(data);
  Tensor conditions;
  if (latents.empty()) {
    conditions = latents_for(state, shapes.ids);
  } else {
    conditions = read_features(read_file(latents));
    if (conditions.rows() != shapes.ids.size()) {
      throw InvalidArgument(latents + " holds " + std::to_string(conditions.rows()) + " features for " +
                            std::to_string(shapes.ids.size()) + " shapes");
    }
  }
  const EvalReport report = evaluate(state.model, conditions, shapes.grids, shapes.ids);
  const std::string text = report.to_text();
  write_file(report_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  std::printf("mean %.4f\n", report.mean_iou);
  return 0;
}

// --- inspect ----------------------------------------------------------------------

struct InspectArgs {
  std::string ckpt;
  bool attention = false;
  bool embeddings = false;
  bool segments = false;
  std::vector<std::string> interpolate;
  std::string latent;
  int steps = 3;
  std::string out;
};

int run_inspect(const InspectArgs& a) {
  const int modes = int(a.attention) + int(a.embeddings) + int(a.segments) + int(!a.interpolate.empty());
  if (modes != 1) throw UsageError("exactly one of --attention, --embeddings, --segments, --interpolate is required");
  const TrainingState state = load_checkpoint(a.ckpt);
  const Model& model = state.model;
  const fs::path dir(a.out);
  ensure_dir(a.out);

  auto condition = [&] {
    if (!a.latent.empty()) return resolve_condition(state, a.latent);
    if (state.latents.size() == 0) throw UsageError("--latent is required: the checkpoint holds no latents");
    return state.latents.row(0);
  };

  if (a.attention) {
    const auto f = condition();
    const auto maps = attention_entropy_maps(model, f, a.steps);
    for (std::size_t k = 0; k < maps.size(); ++k) write_map(maps[k], dir, "attention_step" + std::to_string(k + 1));
  } else if (a.embeddings) {
    const int r = model.config().resolution;
    std::vector<std::string> seen;
    for (Axis axis : {Axis::kX, Axis::kY, Axis::kZ}) {
      const std::string name = embedding_name(axis);
      const std::size_t slot = model.params().slot_of(name);
      const std::string& owner = model.params().slot_name(slot);
      if (std::find(seen.begin(), seen.end(), owner) != seen.end()) continue;
      seen.push_back(owner);
      write_map(embedding_distance_matrix(model.params().value(name), r), dir, "embedding_" + to_string(axis));
    }
  } else if (a.segments) {
    const auto f = condition();
    const VoxelGrid g = model.reconstruct_shape(f).grid;
    write_map(segment_count_map(tubelize(g, model.config().axis)), dir, "segments");
  } else {
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(a.interpolate[2], &used);
      if (used != a.interpolate[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw UsageError("--interpolate: sample count '" + a.interpolate[2] + "' is not an integer");
    }
    if (n < 2) throw UsageError("--interpolate: sample count must be >= 2");
    const auto f1 = resolve_condition(state, a.interpolate[0]);
    const auto f2 = resolve_condition(state, a.interpolate[1]);
    const auto grids = interpolate_conditions(model, f1, f2, n);
    for (std::size_t i = 0; i < grids.size(); ++i) {
      write_file(join(dir, "interp_" + std::to_string(i) + ".voxd"), write_dense(grids[i]));
    }
  }
  return 0;
}

// --- gradcheck ----------------------------------------------------------------------

int run_gradcheck(int seeds) {
  bool ok = true;
  double worst = 0.0;
  for (const GradCheckCase& c : gradcheck_suite(seeds)) {
    const bool pass = c.max_rel_error < kGradCheckTolerance;
    ok = ok && pass;
    worst = std::max(worst, c.max_rel_error);
    std::printf("%-4s %-28s %.3e  (%zu entries; worst %s)\n", pass ? "ok" : "FAIL", c.name.c_str(), c.max_rel_error,
                c.entries, c.worst.c_str());
  }
  std::printf("max_rel_error %.3e tolerance %.0e\n", worst, kGradCheckTolerance);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run-length voxel tubes with a recurrent sequence decoder."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tubeseq 0.1.0");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write synthetic primitive shapes as VOXD files");
  gen_cmd->add_option("--kind", gen.kind, "Primitive suite")
      ->required()
      ->check(CLI::IsMember(primitive_suites()));
  gen_cmd->add_option("--R", gen.resolution, "Grid resolution")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--count", gen.count, "Number of shapes")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();

  std::string tub_in, tub_axis, tub_out;
  auto* tub_cmd = app.add_subcommand("tubelize", "Convert a VOXD grid into VTZ tubes");
  tub_cmd->add_option("--in", tub_in, "Input VOXD file")->required();
  tub_cmd->add_option("--axis", tub_axis, "Tube axis")->required()->check(CLI::IsMember({"X", "Y", "Z"}));
  tub_cmd->add_option("--out", tub_out, "Output VTZ file")->required();

  std::string detub_in, detub_out;
  auto* detub_cmd = app.add_subcommand("detubelize", "Convert VTZ tubes back into a VOXD grid");
  detub_cmd->add_option("--in", detub_in, "Input VTZ file")->required();
  detub_cmd->add_option("--out", detub_out, "Output VOXD file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Jointly train the model and per-shape latents");
  train_cmd->add_option("--config", tr.config, "Run configuration (key = value)")->required();
  train_cmd->add_option("--data", tr.data, "Directory of training shapes");
  train_cmd->add_option("--out", tr.out, "Checkpoint path");
  train_cmd->add_option("--log", tr.log, "Metrics log path (default <out>.metrics)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit latents for new shapes against a frozen model");
  fit_cmd->add_option("--ckpt", fit.ckpt, "Checkpoint")->required();
  fit_cmd->add_option("--data", fit.data, "Directory of shapes to fit")->required();
  fit_cmd->add_option("--out", fit.out, "Output FEAT file")->required();
  fit_cmd->add_option("--steps", fit.steps, "Optimizer steps (default: checkpoint fit_steps)")
      ->check(CLI::PositiveNumber);

  std::string rec_ckpt, rec_latent, rec_out;
  std::size_t rec_row = 0;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Decode one shape from a latent");
  rec_cmd->add_option("--ckpt", rec_ckpt, "Checkpoint")->required();
  rec_cmd->add_option("--latent", rec_latent, "Latent id in the checkpoint, or a FEAT file")->required();
  rec_cmd->add_option("--row", rec_row, "Row of the FEAT file");
  rec_cmd->add_option("--out", rec_out, "Output VOXD file")->required();

  std::string ev_ckpt, ev_latents, ev_data, ev_report;
  auto* eval_cmd = app.add_subcommand("eval", "Reconstruct shapes and report IoU");
  eval_cmd->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--latents", ev_latents, "FEAT file aligned with --data (default: checkpoint latents)");
  eval_cmd->add_option("--data", ev_data, "Directory of ground-truth shapes")->required();
  eval_cmd->add_option("--report", ev_report, "Report path")->required();

  InspectArgs ins;
  auto* ins_cmd = app.add_subcommand("inspect", "Write diagnostic maps and interpolations");
  ins_cmd->add_option("--ckpt", ins.ckpt, "Checkpoint")->required();
  ins_cmd->add_flag("--attention", ins.attention, "Attention entropy maps per decoding step");
  ins_cmd->add_flag("--embeddings", ins.embeddings, "Cosine distance between location embeddings");
  ins_cmd->add_flag("--segments", ins.segments, "Segment count map of the reconstruction");
  ins_cmd->add_option("--interpolate", ins.interpolate, "f1 f2 n: decode n conditions between two latents")
      ->expected(3);
  ins_cmd->add_option("--latent", ins.latent, "Latent id or FEAT file (default: first checkpoint latent)");
  ins_cmd->add_option("--steps", ins.steps, "Decoding steps for --attention")->check(CLI::PositiveNumber);
  ins_cmd->add_option("--out", ins.out, "Output directory")->required();

  int gc_seeds = 20;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Compare gradients against central differences");
  gc_cmd->add_option("--seeds", gc_seeds, "Random model configurations")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*tub_cmd) return run_tubelize(tub_in, tub_axis, tub_out);
    if (*detub_cmd) return run_detubelize(detub_in, detub_out);
    if (*train_cmd) return run_train(tr);
    if (*fit_cmd) return run_fit(fit);
    if (*rec_cmd) return run_reconstruct(rec_ckpt, rec_latent, rec_row, rec_out);
    if (*eval_cmd) return run_eval(ev_ckpt, ev_latents, ev_data, ev_report);
    if (*ins_cmd) return run_inspect(ins);
    if (*gc_cmd) return run_gradcheck(gc_seeds);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
