// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <string>

#include "tubeseq/error.hpp"
#include "tubeseq/grid.hpp"
#include "helpers.hpp"

using namespace tubeseq;

using testing::bytes_of;
using testing::format_kind;
using testing::random_grid;

TEST_CASE("empty grids of several sizes") {
  CHECK(VoxelGrid(1).cell_count() == 1);
  CHECK(VoxelGrid(5).cell_count() == 125);
  VoxelGrid g(32);
  CHECK(g.cell_count() == 32768);
  CHECK(g.occupied_count() == 0);
  CHECK_THROWS_AS(VoxelGrid(0), InvalidArgument);
  CHECK_THROWS_AS(VoxelGrid(-3), InvalidArgument);
}

TEST_CASE("get and set") {
  VoxelGrid g(4);
  g.set(0, 0, 0, true);
  CHECK(g.get(0, 0, 0));
  CHECK_FALSE(g.get(0, 0, 1));
  g.set(0, 0, 0, false);
  CHECK_FALSE(g.get(0, 0, 0));
  CHECK_THROWS_AS(g.get(4, 0, 0), InvalidArgument);
  CHECK_THROWS_AS(g.set(0, -1, 0, true), InvalidArgument);
}

TEST_CASE("storage is x-major") {
  VoxelGrid g(3);
  g.set(1, 2, 0, true);
  CHECK(g.index(1, 2, 0) == 1 * 9 + 2 * 3 + 0);
  CHECK(g.cells()[15] == 1);
}

TEST_CASE("volumetric IoU") {
  VoxelGrid a = random_grid(6, 1);
  CHECK(volumetric_iou(a, a) == 1.0);

  VoxelGrid lo(4), hi(4);
  lo.set(0, 0, 0, true);
  hi.set(3, 3, 3, true);
  CHECK(volumetric_iou(lo, hi) == 0.0);

  // 2x2x2 block and the same block shifted by one along x.
  VoxelGrid b1(4), b2(4);
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) {
        b1.set(x, y, z, true);
        b2.set(x + 1, y, z, true);
      }
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < b1.cell_count(); ++i) {
    inter += b1.cells()[i] & b2.cells()[i];
    uni += b1.cells()[i] | b2.cells()[i];
  }
  CHECK(inter == 4);
  CHECK(uni == 12);
  CHECK(volumetric_iou(b1, b2) == doctest::Approx(4.0 / 12.0).epsilon(1e-15));

  CHECK(volumetric_iou(VoxelGrid(3), VoxelGrid(3)) == 1.0);
  CHECK_THROWS_AS(volumetric_iou(VoxelGrid(3), VoxelGrid(4)), InvalidArgument);
}

TEST_CASE("primitive rasterization") {
  SUBCASE("box spanning the grid fills it") {
    const VoxelGrid g = gen_primitive(Primitive::box({0, 0, 0}, {8, 8, 8}), 8);
    CHECK(g.occupied_count() == 512);
  }
  SUBCASE("sphere of radius 0.5 at a cell center") {
    const VoxelGrid g = gen_primitive(Primitive::sphere({2.5, 3.5, 1.5}, 0.5), 8);
    CHECK(g.occupied_count() == 1);
    CHECK(g.get(2, 3, 1));
  }
  SUBCASE("sphere of radius 2.5 matches a brute-force center test") {
    const double c = 4.0, rad = 2.5;
    int expected = 0;
    for (int i = 0; i < 512; ++i) {
      const double x = i / 64 + 0.5, y = (i / 8) % 8 + 0.5, z = i % 8 + 0.5;
      if ((x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c) <= rad * rad) ++expected;
    }
    const VoxelGrid g = gen_primitive(Primitive::sphere({c, c, c}, rad), 8);
    CHECK(static_cast<int>(g.occupied_count()) == expected);
    CHECK(expected == 56);
  }
  SUBCASE("cylinder along y") {
    const VoxelGrid g = gen_primitive(Primitive::cylinder(1, {4, 0, 4}, 1.0, 2, 6), 8);
    // Cross-section: centers (3.5,3.5),(3.5,4.5),(4.5,3.5),(4.5,4.5) within radius 1; 4 layers.
    CHECK(g.occupied_count() == 16);
    CHECK(g.get(3, 2, 4));
    CHECK_FALSE(g.get(3, 1, 4));
  }
  SUBCASE("union covers both parts") {
    const auto a = Primitive::box({0, 0, 0}, {2, 2, 2});
    const auto b = Primitive::box({1, 1, 1}, {3, 3, 3});
    const VoxelGrid g = gen_primitive(Primitive::make_union({a, b}), 4);
    CHECK(g.occupied_count() == 8 + 8 - 1);
  }
  SUBCASE("degenerate or escaping shapes are rejected") {
    CHECK_THROWS_AS(gen_primitive(Primitive::sphere({4, 4, 4}, 0.0), 8), InvalidArgument);
    CHECK_THROWS_AS(gen_primitive(Primitive::sphere({1, 1, 1}, 3.0), 8), InvalidArgument);
    CHECK_THROWS_AS(gen_primitive(Primitive::box({2, 2, 2}, {1, 3, 3}), 8), InvalidArgument);
  }
  SUBCASE("random suites are deterministic and non-empty") {
    for (const std::string& suite : primitive_suites()) {
      for (std::size_t i = 0; i < 6; ++i) {
        const VoxelGrid a = gen_primitive(random_primitive(suite, 16, 11, i), 16);
        const VoxelGrid b = gen_primitive(random_primitive(suite, 16, 11, i), 16);
        CHECK(a == b);
        CHECK(a.occupied_count() > 0);
      }
    }
    CHECK_THROWS_AS(random_primitive("torus", 16, 0, 0), InvalidArgument);
  }
}

TEST_CASE("VOXD format") {
  const auto smallest = write_dense(VoxelGrid(1));
  const std::string expected("VOXD 1\n\0", 8);
  CHECK(smallest == bytes_of(expected));

  for (std::uint64_t s = 0; s < 5; ++s) {
    const VoxelGrid g = random_grid(7, s);
    const auto bytes = write_dense(g);
    CHECK(bytes.size() == 7 + 343);
    CHECK(read_dense(bytes) == g);
  }

  auto bad = write_dense(VoxelGrid(2));
  bad.back() = 2;
  CHECK(format_kind([&] { read_dense(bad); }) == "bad-cell");
  CHECK(format_kind([&] { read_dense(bytes_of("VOXX 2\n")); }) == "bad-magic");
  auto truncated = write_dense(VoxelGrid(2));
  truncated.pop_back();
  CHECK(format_kind([&] { read_dense(truncated); }) == "truncated");
  auto longer = write_dense(VoxelGrid(2));
  longer.push_back(0);
  CHECK(format_kind([&] { read_dense(longer); }) == "trailing-bytes");
  CHECK(format_kind([&] { read_dense(bytes_of("VOXD 0\n")); }) != "<none>");
}

TEST_CASE("binvox import") {
  auto binvox = [](int dim, std::vector<std::uint8_t> runs) {
    std::string head = "#binvox 1\ndim " + std::to_string(dim) + " " + std::to_string(dim) + " " +
                       std::to_string(dim) + "\ntranslate 0 0 0\nscale 1\ndata\n";
    std::vector<std::uint8_t> out(head.begin(), head.end());
    out.insert(out.end(), runs.begin(), runs.end());
    return out;
  };
  CHECK(import_binvox(binvox(4, {0, 64})).occupied_count() == 0);
  CHECK(import_binvox(binvox(4, {1, 64})).occupied_count() == 64);

  // Binvox index i = x*D*D + z*D + y. Index 0 is (0,0,0); index 1 is y=1.
  const VoxelGrid one = import_binvox(binvox(2, {1, 1, 0, 7}));
  CHECK(one.occupied_count() == 1);
  CHECK(one.get(0, 0, 0));
  const VoxelGrid second = import_binvox(binvox(2, {0, 1, 1, 1, 0, 6}));
  CHECK(second.occupied_count() == 1);
  CHECK(second.get(0, 1, 0));
  const VoxelGrid third = import_binvox(binvox(2, {0, 2, 1, 1, 0, 5}));
  CHECK(third.get(0, 0, 1));

  CHECK(format_kind([&] { import_binvox(binvox(2, {1, 9})); }) == "run-overflow");
  CHECK(format_kind([&] { import_binvox(binvox(2, {1, 3})); }) == "run-underflow");
  CHECK(format_kind([&] { import_binvox(binvox(2, {3, 8})); }) == "bad-cell");
  const std::string nc = "#binvox 1\ndim 2 2 3\ndata\n";
  CHECK(format_kind([&] { import_binvox(bytes_of(nc)); }) == "non-cubic");
}
