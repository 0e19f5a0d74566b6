// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "tubeseq/grid.hpp"
#include "tubeseq/model.hpp"
#include "tubeseq/tensor.hpp"

namespace tubeseq {

struct EvalEntry {
  std::string id;
  double iou = 0.0;  // x100
  std::size_t sessions = 0;
  double millis = 0.0;
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  double mean_iou = 0.0;  // x100

  /// One "shape_id iou sessions millis" line per shape, then "mean <iou>".
  std::string to_text() const;
};

/// Reconstructs every shape from its condition row and scores it. Throws
/// InvalidState if any reconstruction does not take exactly R^2 sessions.
EvalReport evaluate(const Model& model, const Tensor& conditions, std::span<const VoxelGrid> ground_truth,
                    std::span<const std::string> ids);

/// Row-major rows x cols values; `present[i] == false` marks an absent entry.
struct ScalarMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<bool> present;

  ScalarMap() = default;
  ScalarMap(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0), present(r * c, true) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline constexpr double kNoStepSentinel = -1.0;

/// Entropy in bits of a weight vector; 0 * log 0 counts as 0.
double entropy_bits(std::span<const double> weights);

/// Attention-entropy images for decoder steps 1..first_k over all R^2 tubes.
/// Coordinates whose decoding ended before step k hold kNoStepSentinel and
/// are marked absent; the remaining entries are divided by the map maximum
/// (unchanged when the maximum is 0). Throws InvalidState without attention.
std::vector<ScalarMap> attention_entropy_maps(const Model& model, std::span<const double> f, int first_k);
/// Same, but keeps raw entropies (no normalization).
std::vector<ScalarMap> attention_entropy_maps_raw(const Model& model, std::span<const double> f, int first_k);

/// 1 - cos between the first `locations` rows of an embedding matrix. Rows
/// with zero norm make their row and column absent.
ScalarMap embedding_distance_matrix(const Tensor& embedding, int locations);

/// Segment counts of the tubelized shape as a map.
ScalarMap segment_count_map(const TubelizedShape& t);

/// Reconstructions at f1 + t (f2 - f1) for n evenly spaced t in [0, 1].
std::vector<VoxelGrid> interpolate_conditions(const Model& model, std::span<const double> f1,
                                              std::span<const double> f2, int n);

/// Binary PPM (P6), one pixel per entry. Present values are mapped linearly
/// from [min, max] onto gray 0..255; absent entries are pure red.
std::vector<std::uint8_t> encode_ppm(const ScalarMap& map);
void write_ppm(const ScalarMap& map, const std::string& path);

/// Comma-separated rows at 17 significant digits; absent entries as "nan".
std::string encode_csv(const ScalarMap& map);
void write_csv(const ScalarMap& map, const std::string& path);
ScalarMap parse_csv(const std::string& text);

}  // namespace tubeseq
