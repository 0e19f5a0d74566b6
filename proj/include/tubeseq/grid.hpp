// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace tubeseq {

/// Dense binary occupancy grid of R^3 cells.
///
/// Cells are stored x-major: index = x*R*R + y*R + z, all coordinates 0-based.
class VoxelGrid {
 public:
  /// Creates an empty grid. Throws InvalidArgument when `resolution` is 0.
  explicit VoxelGrid(int resolution);

  int resolution() const noexcept { return resolution_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }

  bool get(int x, int y, int z) const;
  void set(int x, int y, int z, bool occupied);

  /// Number of occupied cells.
  std::size_t occupied_count() const noexcept;

  /// Raw storage in canonical order, one byte (0 or 1) per cell.
  std::span<const std::uint8_t> cells() const noexcept { return cells_; }
  std::span<std::uint8_t> mutable_cells() noexcept { return cells_; }

  std::size_t index(int x, int y, int z) const noexcept {
    return (static_cast<std::size_t>(x) * resolution_ + y) * resolution_ + z;
  }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  void check_coord(int x, int y, int z) const;

  int resolution_;
  std::vector<std::uint8_t> cells_;
};

/// |a ∩ b| / |a ∪ b|. Two empty grids score 1.0.
double volumetric_iou(const VoxelGrid& a, const VoxelGrid& b);

// ---------------------------------------------------------------------------
// Primitive rasterization. Coordinates are continuous voxel units: cell i spans
// [i, i+1) and its center sits at i + 0.5.

enum class PrimitiveKind { kSphere, kBox, kCylinder, kUnion };

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  Vec3 center;           // sphere, cylinder (axis coordinate ignored)
  double radius = 0.0;   // sphere, cylinder
  Vec3 lo, hi;           // box corners; cylinder extent uses the axis component
  int axis = 2;          // cylinder axis: 0=X, 1=Y, 2=Z
  std::vector<Primitive> children;  // union

  static Primitive sphere(Vec3 center, double radius);
  static Primitive box(Vec3 lo, Vec3 hi);
  static Primitive cylinder(int axis, Vec3 center, double radius, double lo, double hi);
  static Primitive make_union(std::vector<Primitive> parts);
};

/// Rasterizes a primitive: a cell is occupied iff its center lies inside.
/// Throws InvalidArgument for degenerate shapes or shapes leaving [0, R]^3.
VoxelGrid gen_primitive(const Primitive& spec, int resolution);

/// Named random families used for synthetic datasets: "sphere", "box",
/// "cylinder", "union", or "mixed" (cycles through all four).
std::vector<std::string> primitive_suites();
Primitive random_primitive(const std::string& suite, int resolution, std::uint64_t seed,
                           std::size_t index);

// ---------------------------------------------------------------------------
// Serialization.

/// "VOXD <R>\n" followed by R^3 bytes in canonical order.
std::vector<std::uint8_t> write_dense(const VoxelGrid& g);
VoxelGrid read_dense(std::span<const std::uint8_t> bytes);

/// Parses a cubic binvox file (run-length (value, count) pairs, y fastest,
/// then z, then x) into canonical order.
VoxelGrid import_binvox(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace tubeseq
