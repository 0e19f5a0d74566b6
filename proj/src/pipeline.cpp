// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/pipeline.hpp"

#include <algorithm>
#include <filesystem>

#include "tubeseq/error.hpp"
#include "tubeseq/tubelize.hpp"

namespace tubeseq {

namespace fs = std::filesystem;

bool natural_less(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

ShapeSet load_shape_dir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".voxd" || ext == ".binvox")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    const std::string sa = a.stem().string(), sb = b.stem().string();
    return sa != sb ? natural_less(sa, sb) : a.extension() < b.extension();
  });
  ShapeSet out;
  for (const fs::path& p : files) {
    const std::string id = p.stem().string();
    if (!out.ids.empty() && out.ids.back() == id) throw InvalidArgument("duplicate shape id " + id + " in " + dir);
    const auto bytes = read_file(p.string());
    out.grids.push_back(p.extension() == ".voxd" ? read_dense(bytes) : import_binvox(bytes));
    out.ids.push_back(id);
  }
  if (out.ids.empty()) throw InvalidArgument("no .voxd or .binvox files in " + dir);
  for (const VoxelGrid& g : out.grids) {
    if (g.resolution() != out.grids.front().resolution()) {
      throw InvalidArgument("mixed resolutions in " + dir);
    }
  }
  return out;
}

ShapeSet generate_shapes(const std::string& suite, int resolution, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("count must be >= 1");
  ShapeSet out;
  for (int i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out.ids.push_back("shape_" + std::to_string(i));
    out.grids.push_back(gen_primitive(random_primitive(suite, resolution, seed, idx), resolution));
  }
  return out;
}

std::vector<std::string> write_shape_dir(const ShapeSet& shapes, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < shapes.grids.size(); ++i) {
    const std::string path = (fs::path(dir) / (shapes.ids[i] + ".voxd")).string();
    write_file(path, write_dense(shapes.grids[i]));
    paths.push_back(path);
  }
  return paths;
}

TrainingState init_training(const RunConfig& cfg, const ShapeSet& shapes) {
  cfg.model.validate();
  cfg.train.validate();
  for (const VoxelGrid& g : shapes.grids) {
    if (g.resolution() != cfg.model.resolution) {
      throw InvalidArgument("shape resolution " + std::to_string(g.resolution()) + " differs from config resolution " +
                            std::to_string(cfg.model.resolution));
    }
  }
  const std::uint64_t seed = cfg.train.seed;
  return TrainingState(Model(cfg.model, model_init_seed(seed)),
                       LatentTable(shapes.ids, cfg.model.embed_dim, latent_init_seed(seed)), cfg.train);
}

TrainRun run_training(const RunConfig& cfg, const ShapeSet& shapes, const StepCallback& on_step) {
  TrainingState state = init_training(cfg, shapes);
  const auto dataset =
      make_dataset(shapes.grids, cfg.model.axis, cfg.train.empty_tube_keep_ratio, dataset_seed(cfg.train.seed));
  MetricsLog log = train(state, dataset, shapes.grids, on_step);
  return {std::move(state), std::move(log)};
}

std::vector<double> resolve_condition(const TrainingState& state, const std::string& id_or_path, std::size_t row) {
  const auto& ids = state.latents.ids();
  if (std::find(ids.begin(), ids.end(), id_or_path) != ids.end()) {
    return state.latents.row(state.latents.find(id_or_path));
  }
  std::error_code ec;
  if (!fs::is_regular_file(id_or_path, ec)) {
    throw InvalidArgument("'" + id_or_path + "' is neither a latent id in the checkpoint nor a feature file");
  }
  const Tensor feats = read_features(read_file(id_or_path));
  if (row >= feats.rows()) {
    throw InvalidArgument("row " + std::to_string(row) + " outside " + std::to_string(feats.rows()) + " features");
  }
  if (static_cast<int>(feats.cols()) != state.model.config().embed_dim) {
    throw InvalidArgument("feature dimension " + std::to_string(feats.cols()) + " differs from model D " +
                          std::to_string(state.model.config().embed_dim));
  }
  return {feats.data().begin() + static_cast<std::ptrdiff_t>(row * feats.cols()),
          feats.data().begin() + static_cast<std::ptrdiff_t>((row + 1) * feats.cols())};
}

Tensor latents_for(const TrainingState& state, const std::vector<std::string>& ids) {
  const auto d = static_cast<std::size_t>(state.latents.dim());
  Tensor out(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::vector<double> row = state.latents.row(state.latents.find(ids[i]));
    std::copy(row.begin(), row.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return out;
}

}  // namespace tubeseq
