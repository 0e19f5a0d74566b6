// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "tubeseq/error.hpp"
#include "tubeseq/eval.hpp"
#include "tubeseq/train.hpp"

using namespace tubeseq;
using testing::format_kind;
using testing::format_message;

namespace {

ModelConfig small_model(int r, int width, Axis axis = Axis::kY) {
  ModelConfig cfg;
  cfg.resolution = r;
  cfg.embed_dim = width;
  cfg.hidden_dim = width;
  cfg.axis = axis;
  return cfg;
}

TrainConfig quick(int steps, int batch = 16) {
  TrainConfig cfg;
  cfg.max_steps = steps;
  cfg.batch_size = batch;
  cfg.eval_interval = steps;
  return cfg;
}

VoxelGrid r5_fixture_grid() {
  VoxelGrid g(5);
  for (int z : {1, 3, 4, 5}) g.set(4, 4, z - 1, true);
  return g;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

// Adam with bias correction, written out for one scalar.
double adam_oracle(double theta, const std::vector<double>& grads, double lr, double b1, double b2, double eps) {
  double m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  return theta;
}

}  // namespace

TEST_CASE("train configuration") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.adam_beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.empty_tube_keep_ratio = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.fit_steps = 0;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("dataset construction") {
  std::vector<VoxelGrid> two{testing::random_grid(4, 1), testing::random_grid(4, 2)};
  const auto all = make_dataset(two, Axis::kY, 1.0, 0);
  CHECK(all.size() == 32);
  CHECK(all[17].shape_id == 1);
  CHECK(all[17].coord == Coord{0, 1});
  CHECK(all[17].target == to_tokens(tubelize(two[1], Axis::kY).at(0, 1)));

  std::vector<VoxelGrid> empty{VoxelGrid(4)};
  for (const TubeSample& s : make_dataset(empty, Axis::kX, 1.0, 0)) {
    CHECK(s.target == TokenSequence{Token::False(), Token::Eos()});
  }

  std::vector<VoxelGrid> big_empty{VoxelGrid(8)};
  const auto a = make_dataset(big_empty, Axis::kY, 0.5, 42);
  const auto b = make_dataset(big_empty, Axis::kY, 0.5, 42);
  CHECK(a.size() == b.size());
  CHECK(a.size() > 10);
  CHECK(a.size() < 54);

  // Occupied tubes are always kept.
  std::vector<VoxelGrid> sphere{gen_primitive(Primitive::sphere({4, 4, 4}, 2.5), 8)};
  std::size_t occupied = 0;
  for (const Tube& t : tubelize(sphere[0], Axis::kY).tubes) occupied += !t.segments.empty();
  std::size_t kept_occupied = 0;
  for (const TubeSample& s : make_dataset(sphere, Axis::kY, 0.05, 7)) kept_occupied += s.target.size() > 2;
  CHECK(kept_occupied == occupied);

  std::vector<VoxelGrid> mixed{VoxelGrid(4), VoxelGrid(5)};
  CHECK_THROWS_AS(make_dataset(mixed, Axis::kY, 1.0, 0), InvalidArgument);
}

TEST_CASE("latent table") {
  const LatentTable t(ids_for(200), 50, 9);
  CHECK(t.size() == 200);
  CHECK(t.dim() == 50);
  const auto& v = t.values().data();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  CHECK(std::abs(mean) < 0.001);
  CHECK(sd == doctest::Approx(0.01).epsilon(0.03));
  CHECK(LatentTable(ids_for(200), 50, 9).values() == t.values());
  CHECK(t.find("s7") == 7);
  CHECK_THROWS_AS(t.find("nope"), InvalidArgument);
  CHECK(t.row(3).size() == 50);
}

TEST_CASE("adam") {
  const AdamConfig cfg{0.1, 0.9, 0.999, 8e-6};

  SUBCASE("first step with unit gradient") {
    Tensor p = Tensor::row({1.0}), m(1, 1), v(1, 1);
    adam_update(p, Tensor::row({1.0}), m, v, 1, cfg);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 8e-6)).epsilon(1e-15));
  }

  SUBCASE("zero gradient leaves parameters and decays moments") {
    Tensor p = Tensor::row({2.0}), m(1, 1), v(1, 1);
    adam_update(p, Tensor::row({0.0}), m, v, 1, cfg);
    CHECK(p[0] == 2.0);
    CHECK(m[0] == 0.0);
    Tensor m2 = Tensor::row({0.5}), v2 = Tensor::row({0.25});
    adam_update(p, Tensor::row({0.0}), m2, v2, 3, cfg);
    CHECK(m2[0] == doctest::Approx(0.45).epsilon(1e-15));
    CHECK(v2[0] == doctest::Approx(0.25 * 0.999).epsilon(1e-15));
  }

  SUBCASE("matches the closed form over many steps") {
    const std::vector<double> grads{0.3, -1.2, 0.05, 2.0, 0.0, -0.7, 1.1};
    Tensor p = Tensor::row({0.4}), m(1, 1), v(1, 1);
    for (std::size_t t = 0; t < grads.size(); ++t) {
      adam_update(p, Tensor::row({grads[t]}), m, v, static_cast<std::int64_t>(t + 1), cfg);
    }
    CHECK(p[0] == doctest::Approx(adam_oracle(0.4, grads, 0.1, 0.9, 0.999, 8e-6)).epsilon(1e-13));
  }

  SUBCASE("adam_step updates every slot once, aliases included") {
    ParamStore store;
    store.add("a", Tensor::row({1.0, 1.0}));
    store.alias("b", "a");
    store.grad("a") = Tensor::row({1.0, -1.0});
    AdamState st = AdamState::for_params(store);
    adam_step(store, st, cfg);
    CHECK(st.step == 1);
    CHECK(store.value("b")[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 8e-6)).epsilon(1e-15));
    CHECK(store.value("b")[1] == doctest::Approx(1.0 + 0.1 / (1.0 + 8e-6)).epsilon(1e-15));
  }

  CHECK(adam_config(TrainConfig{}).eps == 8e-6);
  CHECK(adam_config(TrainConfig{}).learning_rate == 1e-3);
}

TEST_CASE("training loop") {
  SUBCASE("step-0 loss equals the uniform-output loss") {
    std::vector<VoxelGrid> shapes{testing::random_grid(4, 3)};
    const auto data = make_dataset(shapes, Axis::kY, 1.0, 0);
    TrainingState st(Model(small_model(4, 8), 1), LatentTable(ids_for(1), 8, 2), quick(1, 16));
    double first = 0.0;
    train(st, data, shapes, [&](int step, double loss) {
      if (step == 1) first = loss;
    });
    // The zero-initialized output layer makes every step-0 prediction uniform,
    // so the batch loss is the mean of L ln(R+4) over the sampled targets.
    // Recompute it over the whole dataset and over the first batch bounds.
    double lo = 1e9, hi = 0.0;
    for (const TubeSample& s : data) {
      const double l = static_cast<double>(s.target.size()) * std::log(8.0);
      lo = std::min(lo, l);
      hi = std::max(hi, l);
    }
    CHECK(first >= lo - 1e-12);
    CHECK(first <= hi + 1e-12);
    const double mean_len = dataset_loss(Model(small_model(4, 8), 1), LatentTable(ids_for(1), 8, 2), data);
    double expected = 0.0;
    for (const TubeSample& s : data) expected += static_cast<double>(s.target.size()) * std::log(8.0);
    CHECK(mean_len == doctest::Approx(expected / static_cast<double>(data.size())).epsilon(1e-13));
  }

  SUBCASE("a single sequence is memorized") {
    VoxelGrid g = r5_fixture_grid();
    std::vector<VoxelGrid> shapes{g};
    std::vector<TubeSample> data;
    for (const TubeSample& s : make_dataset(shapes, Axis::kZ, 1.0, 0)) {
      if (s.coord == Coord{4, 4}) data.push_back(s);
    }
    REQUIRE(data.size() == 1);
    TrainConfig tc = quick(300, 1);
    tc.learning_rate = 1e-2;
    TrainingState st(Model(small_model(5, 16, Axis::kZ), 3), LatentTable(ids_for(1), 16, 4), tc);
    const MetricsLog log = train(st, data, shapes);
    CHECK(log.losses.back().loss < 0.01);
    CHECK(dataset_loss(st.model, st.latents, data) < 0.01);
  }

  SUBCASE("identical runs are bitwise identical") {
    std::vector<VoxelGrid> shapes{testing::random_grid(4, 5), testing::random_grid(4, 6)};
    const auto data = make_dataset(shapes, Axis::kY, 1.0, 1);
    auto run = [&] {
      TrainingState st(Model(small_model(4, 8), 11), LatentTable(ids_for(2), 8, 12), quick(20, 8));
      const MetricsLog log = train(st, data, shapes);
      return std::pair{write_checkpoint(st), log.to_text()};
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }

  SUBCASE("metrics log format") {
    MetricsLog log;
    log.losses = {{1, 2.5}, {2, 0.1}};
    log.ious = {{2, 50.0}};
    CHECK(log.to_text() == "loss 1 2.5\nloss 2 0.10000000000000001\niou 2 50\n");
  }
}

TEST_CASE("overfitting small shapes") {
  SUBCASE("the R=5 fixture tube decodes exactly") {
    std::vector<VoxelGrid> shapes{r5_fixture_grid()};
    const auto data = make_dataset(shapes, Axis::kZ, 1.0, 0);
    TrainConfig tc = quick(400, 25);
    tc.learning_rate = 1e-2;
    TrainingState st(Model(small_model(5, 16, Axis::kZ), 5), LatentTable(ids_for(1), 16, 6), tc);
    train(st, data, shapes);
    const TokenSequence seq = st.model.greedy_decode(st.latents.row(0), {4, 4});
    using T = Token;
    CHECK(seq == TokenSequence{T::True(), T::Loc(1), T::Loc(1), T::Loc(3), T::Loc(5), T::Eos()});
  }

  SUBCASE("a sphere at R=8") {
    std::vector<VoxelGrid> shapes{gen_primitive(Primitive::sphere({4, 4, 4}, 3.0), 8)};
    const auto data = make_dataset(shapes, Axis::kY, 1.0, 0);
    TrainConfig tc = quick(600, 32);
    tc.learning_rate = 5e-3;
    tc.eval_interval = 100;
    TrainingState st(Model(small_model(8, 24), 7), LatentTable(ids_for(1), 24, 8), tc);
    const MetricsLog log = train(st, data, shapes);
    const Reconstruction rec = st.model.reconstruct_shape(st.latents.row(0));
    CHECK(volumetric_iou(rec.grid, shapes[0]) >= 0.99);
    // The evaluator agrees with the training loop's IoU.
    const std::vector<std::string> ids{"s0"};
    const EvalReport report = evaluate(st.model, st.latents.values(), shapes, ids);
    CHECK(std::abs(report.mean_iou - log.ious.back().mean_iou) <= 0.1);
  }
}

TEST_CASE("fitting latents") {
  std::vector<VoxelGrid> shapes{gen_primitive(Primitive::box({1, 1, 1}, {5, 4, 6}), 6),
                                gen_primitive(Primitive::sphere({3, 3, 3}, 2.0), 6)};
  const auto data = make_dataset(shapes, Axis::kY, 1.0, 0);
  TrainConfig tc = quick(400, 24);
  tc.learning_rate = 5e-3;
  TrainingState st(Model(small_model(6, 16), 9), LatentTable(ids_for(2), 16, 10), tc);
  train(st, data, shapes);
  const double trained = dataset_loss(st.model, st.latents, data);

  SUBCASE("zero steps returns the initial latents") {
    TrainConfig fc = tc;
    fc.fit_steps = 0;
    const FitResult fit = fit_latents(st.model, shapes, ids_for(2), fc);
    CHECK(fit.latents.values() == LatentTable(ids_for(2), 16, fc.seed).values());
    CHECK(fit.loss_trace.empty());
  }

  SUBCASE("fitting from scratch approaches the trained loss and leaves the model alone") {
    const std::uint64_t before = st.model.params().checksum();
    TrainConfig fc = tc;
    fc.fit_steps = 400;
    fc.learning_rate = 1e-2;
    const FitResult fit = fit_latents(st.model, shapes, ids_for(2), fc);
    CHECK(st.model.params().checksum() == before);
    CHECK(fit.final_loss < fit.initial_loss);
    CHECK(fit.final_loss <= 2.0 * trained);
    // Smoothed over 50-step windows, the trace does not increase.
    REQUIRE(fit.loss_trace.size() == 400);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w + 50 <= fit.loss_trace.size(); w += 50) {
      const double mean =
          std::accumulate(fit.loss_trace.begin() + static_cast<std::ptrdiff_t>(w),
                          fit.loss_trace.begin() + static_cast<std::ptrdiff_t>(w + 50), 0.0) / 50.0;
      CHECK(mean <= prev);
      prev = mean;
    }
  }
}

TEST_CASE("checkpoints") {
  std::vector<VoxelGrid> shapes{testing::random_grid(4, 8)};
  const auto data = make_dataset(shapes, Axis::kY, 1.0, 0);
  TrainingState st(Model(small_model(4, 6), 13), LatentTable(ids_for(1), 6, 14), quick(5, 8));
  train(st, data, shapes);
  const auto bytes = write_checkpoint(st);

  SUBCASE("round trip") {
    const TrainingState back = read_checkpoint(bytes);
    CHECK(back.model.config() == st.model.config());
    CHECK(back.train_cfg == st.train_cfg);
    CHECK(back.model.params().checksum() == st.model.params().checksum());
    CHECK(back.latents.ids() == st.latents.ids());
    CHECK(back.latents.values() == st.latents.values());
    CHECK(back.model_opt == st.model_opt);
    CHECK(back.latent_opt == st.latent_opt);
    CHECK(dataset_loss(back.model, back.latents, data) == dataset_loss(st.model, st.latents, data));
    CHECK(write_checkpoint(back) == bytes);
  }

  SUBCASE("tampering is detected") {
    auto cut = bytes;
    cut.resize(cut.size() - 8);
    CHECK(format_kind([&] { read_checkpoint(cut); }) == "truncated");
    auto extra = bytes;
    extra.push_back(0);
    CHECK(format_kind([&] { read_checkpoint(extra); }) == "trailing-bytes");
    auto version = bytes;
    version[5] = '9';
    CHECK(format_kind([&] { read_checkpoint(version); }) == "version-mismatch");
    CHECK(format_kind([&] { read_checkpoint(testing::bytes_of("nonsense")); }) != "<none>");
  }

  SUBCASE("a mismatched configuration names the tensor") {
    ModelConfig wider = st.model.config();
    wider.hidden_dim = 7;
    const std::string msg = format_message([&] { read_checkpoint(bytes, wider); });
    CHECK(msg.find("enc.fwd.W") != std::string::npos);
    CHECK(format_kind([&] { read_checkpoint(bytes, wider); }) == "shape-mismatch");
    CHECK_NOTHROW(read_checkpoint(bytes, st.model.config()));
  }

  SUBCASE("feature files") {
    const Tensor f = Tensor::matrix({{1.5, -2.0, 0.0}, {1e-300, 3.25, -0.0}});
    const auto enc = write_features(f);
    CHECK(enc.size() == 4 + 4 + 4 + 6 * 8);
    CHECK(std::string(enc.begin(), enc.begin() + 4) == "FEAT");
    CHECK(read_features(enc) == f);
    auto cut = enc;
    cut.pop_back();
    CHECK(format_kind([&] { read_features(cut); }) == "truncated");
    auto magic = enc;
    magic[0] = 'X';
    CHECK(format_kind([&] { read_features(magic); }) == "bad-magic");
  }
}
