// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tubeseq/model.hpp"
#include "tubeseq/tensor.hpp"

namespace tubeseq {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
  std::string worst;  // "param[index] analytic numeric"

};

inline constexpr double kGradCheckTolerance = 1e-4;

/// Central-difference checks of every primitive op, each reduced to a scalar
/// through a fixed random weighting.
std::vector<GradCheckCase> gradcheck_primitives(std::uint64_t seed);

/// Checks the teacher-forced sequence loss of a random model on a few random
/// targets, over model parameters and the shape condition.
GradCheckCase gradcheck_sequence_loss(const ModelConfig& cfg, std::uint64_t seed);

/// Primitives plus the sequence loss for `seeds` random R=4, D=H=8 configs.
std::vector<GradCheckCase> gradcheck_suite(int seeds);

}  // namespace tubeseq
