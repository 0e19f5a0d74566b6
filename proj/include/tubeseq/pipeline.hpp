// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

// Directory-level compositions shared by the command-line tool, the Python
// module and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tubeseq/config.hpp"
#include "tubeseq/grid.hpp"
#include "tubeseq/train.hpp"

namespace tubeseq {

struct ShapeSet {
  std::vector<std::string> ids;
  std::vector<VoxelGrid> grids;
};

/// Loads every *.voxd and *.binvox file of `dir`. Ids are file stems, ordered
/// so that shape_2 precedes shape_10.
ShapeSet load_shape_dir(const std::string& dir);

/// Orders ids by length, then lexicographically.
bool natural_less(const std::string& a, const std::string& b);

/// `count` primitives of `suite`, deterministic in (suite, R, seed).
ShapeSet generate_shapes(const std::string& suite, int resolution, int count, std::uint64_t seed);

/// Writes shape_<i>.voxd files into `dir` (created if missing) and returns their paths.
std::vector<std::string> write_shape_dir(const ShapeSet& shapes, const std::string& dir);

/// Fresh model, latents and optimizer state for `shapes` under `cfg`.
TrainingState init_training(const RunConfig& cfg, const ShapeSet& shapes);

struct TrainRun {
  TrainingState state;
  MetricsLog log;
};

TrainRun run_training(const RunConfig& cfg, const ShapeSet& shapes, const StepCallback& on_step = {});

/// Latent row for `id_or_path`: a latent id of `state`, or else a FEAT file
/// whose row `row` is returned.
std::vector<double> resolve_condition(const TrainingState& state, const std::string& id_or_path, std::size_t row = 0);

/// Checkpoint latents matched to `ids` by name.
Tensor latents_for(const TrainingState& state, const std::vector<std::string>& ids);

}  // namespace tubeseq
