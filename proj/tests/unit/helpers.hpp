// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tubeseq/error.hpp"
#include "tubeseq/grid.hpp"

namespace testing {

inline tubeseq::VoxelGrid random_grid(int r, std::uint64_t seed, double density = 0.4) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(density);
  tubeseq::VoxelGrid g(r);
  for (int x = 0; x < r; ++x)
    for (int y = 0; y < r; ++y)
      for (int z = 0; z < r; ++z) g.set(x, y, z, bit(rng));
  return g;
}

inline std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

/// Kind of the FormatError thrown by `f`, "<none>" if it returns normally.
inline std::string format_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const tubeseq::FormatError& e) {
    return e.kind();
  }
  return "<none>";
}

/// Message of the FormatError thrown by `f`.
inline std::string format_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const tubeseq::FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace testing
