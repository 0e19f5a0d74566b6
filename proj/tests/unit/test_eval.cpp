// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "tubeseq/error.hpp"
#include "tubeseq/eval.hpp"

using namespace tubeseq;

namespace {

ModelConfig tiny(int r = 4) {
  ModelConfig cfg;
  cfg.resolution = r;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 6;
  return cfg;
}

// Zero network whose output bias prefers FALSE: every tube decodes to [FALSE, EOS].
Model always_empty(const ModelConfig& cfg) {
  Model m(cfg, 0);
  for (std::size_t s = 0; s < m.params().slot_count(); ++s) m.params().slot_value(s).fill(0.0);
  m.params().value("out.b")[static_cast<std::size_t>(token_class(Token::False(), cfg.resolution))] = 4.0;
  return m;
}

}  // namespace

TEST_CASE("evaluation report") {
  const ModelConfig cfg = tiny();
  const Model m = always_empty(cfg);
  const std::vector<VoxelGrid> empty{VoxelGrid(4), VoxelGrid(4)};
  const std::vector<std::string> ids{"a", "b"};
  const Tensor conds(2, 6);
  const EvalReport perfect = evaluate(m, conds, empty, ids);
  CHECK(perfect.mean_iou == 100.0);
  for (const EvalEntry& e : perfect.entries) CHECK(e.sessions == 16);

  std::vector<VoxelGrid> full = empty;
  full[1].set(1, 2, 3, true);
  const EvalReport half = evaluate(m, conds, full, ids);
  CHECK(half.entries[0].iou == 100.0);
  CHECK(half.entries[1].iou == 0.0);
  CHECK(half.mean_iou == 50.0);

  const std::string text = half.to_text();
  std::istringstream in(text);
  std::string id, line;
  double iou = 0, millis = 0;
  std::size_t sessions = 0;
  in >> id >> iou >> sessions >> millis;
  CHECK(id == "a");
  CHECK(iou == 100.0);
  CHECK(sessions == 16);
  CHECK(text.rfind("mean 50.0000\n") == text.size() - 13);

  CHECK_THROWS_AS(evaluate(m, Tensor(1, 6), full, ids), InvalidArgument);
}

TEST_CASE("entropy") {
  const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(entropy_bits(uniform) == doctest::Approx(std::log2(3.0)).epsilon(1e-14));
  CHECK(entropy_bits(std::vector<double>{0.0, 1.0, 0.0}) == 0.0);
  CHECK(entropy_bits(std::vector<double>{0.5, 0.5}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("attention entropy maps") {
  SUBCASE("uniform attention and the sentinel rule") {
    const Model m = always_empty(tiny());
    const std::vector<double> f(6, 0.0);
    const auto raw = attention_entropy_maps_raw(m, f, 5);
    REQUIRE(raw.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
      for (std::size_t i = 0; i < 16; ++i) {
        if (k < 2) {
          CHECK(raw[k].present[i]);
          CHECK(raw[k].values[i] == doctest::Approx(std::log2(3.0)).epsilon(1e-14));
        } else {
          CHECK_FALSE(raw[k].present[i]);
          CHECK(raw[k].values[i] == kNoStepSentinel);
        }
      }
    }
    const auto norm = attention_entropy_maps(m, f, 5);
    CHECK(norm[0].values[3] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(norm[4].values[3] == kNoStepSentinel);
  }

  SUBCASE("random models stay in range") {
    Model m(tiny(5), 3);
    const std::vector<double> f{0.5, -0.3, 0.2, 0.9, -1.0, 0.1};
    const auto raw = attention_entropy_maps_raw(m, f, 4);
    for (const ScalarMap& map : raw) {
      for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (map.present[i]) {
          CHECK(map.values[i] >= 0.0);
          CHECK(map.values[i] <= std::log2(3.0) + 1e-12);
        }
      }
    }
    for (const ScalarMap& map : attention_entropy_maps(m, f, 4)) {
      for (std::size_t i = 0; i < map.values.size(); ++i) {
        if (map.present[i]) CHECK((map.values[i] >= 0.0 && map.values[i] <= 1.0));
      }
    }
  }

  SUBCASE("requires attention") {
    ModelConfig cfg = tiny();
    cfg.use_attention = false;
    const Model m(cfg, 1);
    CHECK_THROWS_AS(attention_entropy_maps(m, std::vector<double>(6, 0.0), 3), InvalidState);
  }
}

TEST_CASE("embedding distance matrix") {
  const Tensor e = Tensor::matrix({{1, 0, 0}, {0, 2, 0}, {3, 0, 0}, {0, 0, 0}, {9, 9, 9}});
  const ScalarMap d = embedding_distance_matrix(e, 4);
  CHECK(d.rows == 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(d.at(i, i) == 0.0);
  CHECK(d.at(0, 1) == 1.0);
  CHECK(d.at(0, 2) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(d.at(1, 2) == d.at(2, 1));
  CHECK_FALSE(d.present[3 * 4 + 0]);
  CHECK_FALSE(d.present[0 * 4 + 3]);
  CHECK_THROWS_AS(embedding_distance_matrix(e, 6), InvalidArgument);
}

TEST_CASE("segment count map") {
  VoxelGrid g(5);
  for (int z : {0, 2, 3, 4}) g.set(4, 4, z, true);
  const ScalarMap m = segment_count_map(tubelize(g, Axis::kZ));
  CHECK(m.at(4, 4) == 2.0);
  CHECK(m.at(0, 0) == 0.0);
}

TEST_CASE("latent interpolation") {
  const Model m(tiny(5), 8);
  const std::vector<double> f1{0.5, -0.5, 1.0, 0.0, 0.3, -0.8};
  const std::vector<double> f2{-1.0, 0.7, 0.0, 0.9, -0.3, 0.4};
  const auto grids = interpolate_conditions(m, f1, f2, 5);
  REQUIRE(grids.size() == 5);
  CHECK(grids.front() == m.reconstruct_shape(f1).grid);
  CHECK(grids.back() == m.reconstruct_shape(f2).grid);
  for (int i = 1; i < 4; ++i) {
    std::vector<double> f(6);
    for (std::size_t c = 0; c < 6; ++c) f[c] = f1[c] + 0.25 * i * (f2[c] - f1[c]);
    CHECK(grids[i] == m.reconstruct_shape(f).grid);
  }
  for (const VoxelGrid& g : interpolate_conditions(m, f1, f1, 4)) CHECK(g == grids.front());
  CHECK_THROWS_AS(interpolate_conditions(m, f1, f2, 1), InvalidArgument);
}

TEST_CASE("PPM and CSV output") {
  ScalarMap constant(16, 16);
  for (double& v : constant.values) v = 0.7;
  const auto ppm = encode_ppm(constant);
  const std::string header = "P6\n16 16\n255\n";
  REQUIRE(ppm.size() == header.size() + 16 * 16 * 3);
  CHECK(std::string(ppm.begin(), ppm.begin() + static_cast<std::ptrdiff_t>(header.size())) == header);
  for (std::size_t i = header.size(); i < ppm.size(); ++i) CHECK(ppm[i] == ppm[header.size()]);

  ScalarMap ramp(1, 3);
  ramp.values = {0.0, 0.5, 1.0};
  ramp.present = {true, false, true};
  const auto img = encode_ppm(ramp);
  const std::size_t off = std::string("P6\n3 1\n255\n").size();
  CHECK(img[off] == 0);
  CHECK(img[off + 3] == 255);
  CHECK(img[off + 4] == 0);
  CHECK(img[off + 5] == 0);
  CHECK(img[off + 6] == 255);
  CHECK(img[off + 7] == 255);

  ScalarMap m(2, 3);
  m.values = {0.1, -2.5, 1e-300, 3.0, 0.0, 7.25};
  m.present = {true, true, true, false, true, true};
  m.values[3] = kNoStepSentinel;
  const std::string csv = encode_csv(m);
  CHECK(csv.substr(csv.find('\n') + 1, 4) == "nan,");
  const ScalarMap back = parse_csv(csv);
  CHECK(back.rows == 2);
  CHECK(back.cols == 3);
  CHECK(back.present == m.present);
  for (std::size_t i = 0; i < 6; ++i) {
    if (m.present[i]) CHECK(back.values[i] == m.values[i]);
  }
  CHECK_THROWS(parse_csv("1,2\n3\n"));
}
