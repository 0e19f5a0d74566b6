// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "tubeseq/model.hpp"
#include "tubeseq/train.hpp"

namespace tubeseq {

/// Experiment description read from a `key = value` file. Text after '#' and
/// blank lines are ignored; unknown keys and ill-typed values are rejected
/// before any work starts.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir;  // optional default for --data
  std::string out_path;  // optional default for --out
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string format_run_config(const RunConfig& cfg);

/// Seeds derived from the run seed for each random consumer.
inline std::uint64_t model_init_seed(std::uint64_t seed) { return seed * 4 + 1; }
inline std::uint64_t latent_init_seed(std::uint64_t seed) { return seed * 4 + 2; }
inline std::uint64_t dataset_seed(std::uint64_t seed) { return seed * 4 + 3; }

}  // namespace tubeseq
