// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "tubeseq/error.hpp"

namespace tubeseq {

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed;
  for (const auto& e : entries) {
    os << e.id << ' ' << std::setprecision(4) << e.iou << ' ' << e.sessions << ' ' << std::setprecision(3)
       << e.millis << '\n';
  }
  os << "mean " << std::setprecision(4) << mean_iou << '\n';
  return os.str();
}

EvalReport evaluate(const Model& model, const Tensor& conditions, std::span<const VoxelGrid> ground_truth,
                    std::span<const std::string> ids) {
  const ModelConfig& cfg = model.config();
  if (conditions.rows() != ground_truth.size() || ids.size() != ground_truth.size()) {
    throw InvalidArgument("evaluate: " + std::to_string(conditions.rows()) + " conditions, " +
                          std::to_string(ids.size()) + " ids and " + std::to_string(ground_truth.size()) +
                          " shapes");
  }
  if (conditions.cols() != static_cast<std::size_t>(cfg.embed_dim)) {
    throw InvalidArgument("evaluate: conditions have dimension " + std::to_string(conditions.cols()) +
                          ", model expects " + std::to_string(cfg.embed_dim));
  }
  const auto sessions_expected = static_cast<std::size_t>(cfg.resolution) * cfg.resolution;
  EvalReport report;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (ground_truth[i].resolution() != cfg.resolution) {
      throw InvalidArgument("evaluate: shape '" + ids[i] + "' has resolution " +
                            std::to_string(ground_truth[i].resolution()) + ", model uses " +
                            std::to_string(cfg.resolution));
    }
    const auto row = conditions.data().subspan(i * conditions.cols(), conditions.cols());
    const auto t0 = std::chrono::steady_clock::now();
    const Reconstruction rec = model.reconstruct_shape(row);
    const auto t1 = std::chrono::steady_clock::now();
    if (rec.session_count != sessions_expected) {
      throw InvalidState("reconstruction of '" + ids[i] + "' took " + std::to_string(rec.session_count) +
                         " decoder sessions, expected " + std::to_string(sessions_expected));
    }
    EvalEntry e;
    e.id = ids[i];
    e.iou = 100.0 * volumetric_iou(rec.grid, ground_truth[i]);
    e.sessions = rec.session_count;
    e.millis = std::chrono::duration<double, std::milli>(t1 - t0).count();
    report.entries.push_back(std::move(e));
  }
  if (!report.entries.empty()) {
    double total = 0.0;
    for (const auto& e : report.entries) total += e.iou;
    report.mean_iou = total / static_cast<double>(report.entries.size());
  }
  return report;
}

double entropy_bits(std::span<const double> weights) {
  double h = 0.0;
  for (double a : weights) {
    if (a > 0.0) h -= a * std::log2(a);
  }
  return h;
}

std::vector<ScalarMap> attention_entropy_maps_raw(const Model& model, std::span<const double> f, int first_k) {
  if (!model.config().use_attention) throw InvalidState("attention maps need a model with attention enabled");
  if (first_k < 1) throw InvalidArgument("first_k must be >= 1");
  const Reconstruction rec = model.reconstruct_shape(f);
  const auto r = static_cast<std::size_t>(model.config().resolution);
  std::vector<ScalarMap> maps(static_cast<std::size_t>(first_k), ScalarMap(r, r));
  for (std::size_t i = 0; i < rec.traces.size(); ++i) {
    const auto& att = rec.traces[i].attention;
    for (std::size_t k = 0; k < maps.size(); ++k) {
      if (k < att.size()) {
        maps[k].values[i] = entropy_bits(att[k]);
      } else {
        maps[k].values[i] = kNoStepSentinel;
        maps[k].present[i] = false;
      }
    }
  }
  return maps;
}

std::vector<ScalarMap> attention_entropy_maps(const Model& model, std::span<const double> f, int first_k) {
  std::vector<ScalarMap> maps = attention_entropy_maps_raw(model, f, first_k);
  for (ScalarMap& m : maps) {
    double mx = 0.0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.present[i]) mx = std::max(mx, m.values[i]);
    }
    if (mx <= 0.0) continue;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.present[i]) m.values[i] /= mx;
    }
  }
  return maps;
}

ScalarMap embedding_distance_matrix(const Tensor& embedding, int locations) {
  if (locations < 1 || static_cast<std::size_t>(locations) > embedding.rows()) {
    throw InvalidArgument("distance matrix over " + std::to_string(locations) + " rows of " +
                          shape_string(embedding));
  }
  const auto n = static_cast<std::size_t>(locations);
  const std::size_t d = embedding.cols();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += embedding(i, c) * embedding(i, c);
    norms[i] = std::sqrt(s);
  }
  ScalarMap out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        out.at(i, j) = std::numeric_limits<double>::quiet_NaN();
        out.present[i * n + j] = false;
        continue;
      }
      if (i == j) {
        out.at(i, j) = 0.0;
        continue;
      }
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) dot += embedding(i, c) * embedding(j, c);
      const double cosine = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      out.at(i, j) = 1.0 - cosine;
    }
  }
  // Exact symmetry regardless of summation order.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.at(j, i) = out.at(i, j);
  }
  return out;
}

ScalarMap segment_count_map(const TubelizedShape& t) {
  const auto r = static_cast<std::size_t>(t.resolution);
  ScalarMap m(r, r);
  const std::vector<int> counts = segment_count_image(t);
  for (std::size_t i = 0; i < counts.size(); ++i) m.values[i] = counts[i];
  return m;
}

std::vector<VoxelGrid> interpolate_conditions(const Model& model, std::span<const double> f1,
                                              std::span<const double> f2, int n) {
  if (f1.size() != f2.size()) {
    throw InvalidArgument("interpolation endpoints have dimensions " + std::to_string(f1.size()) + " and " +
                          std::to_string(f2.size()));
  }
  if (n < 2) throw InvalidArgument("interpolation needs n >= 2");
  std::vector<VoxelGrid> out;
  std::vector<double> f(f1.size());
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    for (std::size_t c = 0; c < f.size(); ++c) {
      // Endpoints reproduce f1 and f2 bit for bit.
      f[c] = i == 0 ? f1[c] : i == n - 1 ? f2[c] : f1[c] + t * (f2[c] - f1[c]);
    }
    out.push_back(model.reconstruct_shape(f).grid);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output files

std::vector<std::uint8_t> encode_ppm(const ScalarMap& map) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!map.present[i]) continue;
    if (!std::isfinite(map.values[i])) throw InvalidArgument("PPM input has a non-finite present value");
    lo = std::min(lo, map.values[i]);
    hi = std::max(hi, map.values[i]);
  }
  const std::string header = "P6\n" + std::to_string(map.cols) + " " + std::to_string(map.rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!map.present[i]) {
      out.insert(out.end(), {255, 0, 0});
      continue;
    }
    const double t = hi > lo ? (map.values[i] - lo) / (hi - lo) : 0.0;
    const auto g = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(t, 0.0, 1.0)));
    out.insert(out.end(), {g, g, g});
  }
  return out;
}

void write_ppm(const ScalarMap& map, const std::string& path) { write_file(path, encode_ppm(map)); }

std::string encode_csv(const ScalarMap& map) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t r = 0; r < map.rows; ++r) {
    for (std::size_t c = 0; c < map.cols; ++c) {
      if (c) os << ',';
      const std::size_t i = r * map.cols + c;
      if (map.present[i]) {
        os << map.values[i];
      } else {
        os << "nan";
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_csv(const ScalarMap& map, const std::string& path) {
  const std::string text = encode_csv(map);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

ScalarMap parse_csv(const std::string& text) {
  ScalarMap m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ls, cell, ',')) {
      if (cell == "nan") {
        m.values.push_back(std::numeric_limits<double>::quiet_NaN());
        m.present.push_back(false);
      } else {
        try {
          m.values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw FormatError("bad-csv", "unparsable cell '" + cell + "'");
        }
        m.present.push_back(true);
      }
      ++cols;
    }
    if (m.rows == 0) m.cols = cols;
    if (cols != m.cols) throw FormatError("bad-csv", "ragged CSV row " + std::to_string(m.rows));
    ++m.rows;
  }
  return m;
}

}  // namespace tubeseq
