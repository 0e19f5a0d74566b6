// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tubeseq/grid.hpp"

namespace tubeseq {

enum class Axis : std::uint8_t { kX = 0, kY = 1, kZ = 2 };

std::string to_string(Axis a);
/// Accepts "X", "Y", "Z" (case-insensitive).
Axis parse_axis(const std::string& text);

/// The two axes spanning the index plane of tubes along `a`, in X<Y<Z order.
std::pair<Axis, Axis> plane_axes(Axis a);

/// A maximal run of occupied voxels, 1-based inclusive.
struct OccupancySegment {
  int start = 1;
  int end = 1;
  friend bool operator==(const OccupancySegment&, const OccupancySegment&) = default;
};

struct Coord {
  int u = 0;
  int v = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

struct Tube {
  Coord coord;
  std::vector<OccupancySegment> segments;
  friend bool operator==(const Tube&, const Tube&) = default;
};

/// R*R tubes in row-major (u, v) order.
struct TubelizedShape {
  int resolution = 1;
  Axis axis = Axis::kY;
  std::vector<Tube> tubes;

  const Tube& at(int u, int v) const { return tubes[static_cast<std::size_t>(u) * resolution + v]; }
  friend bool operator==(const TubelizedShape&, const TubelizedShape&) = default;
};

/// Throws FormatError unless segments are sorted, maximal (gap >= 1 voxel)
/// and inside [1, R].
void validate_segments(std::span<const OccupancySegment> segments, int resolution);

/// Bit line through the grid at plane coordinate (u, v).
///   X: line[k] = voxel(k, u, v)   Y: voxel(u, k, v)   Z: voxel(u, v, k)
std::vector<std::uint8_t> extract_line(const VoxelGrid& g, Axis axis, int u, int v);

std::vector<OccupancySegment> segments_of_line(std::span<const std::uint8_t> line);

TubelizedShape tubelize(const VoxelGrid& g, Axis axis);
VoxelGrid detubelize(const TubelizedShape& t);

/// R x R map of segment counts, row-major (u, v).
std::vector<int> segment_count_image(const TubelizedShape& t);

// ---------------------------------------------------------------------------
// Decoder tokens. Class ids double as embedding row ids:
//   Loc(k) -> k-1 for k in [1, R]; TRUE -> R; FALSE -> R+1; SOS -> R+2; EOS -> R+3.

enum class TokenKind : std::uint8_t { kFalse, kTrue, kLoc, kSos, kEos };

struct Token {
  TokenKind kind = TokenKind::kEos;
  int loc = 0;  // 1-based, only for kLoc

  static Token False() { return {TokenKind::kFalse, 0}; }
  static Token True() { return {TokenKind::kTrue, 0}; }
  static Token Sos() { return {TokenKind::kSos, 0}; }
  static Token Eos() { return {TokenKind::kEos, 0}; }
  static Token Loc(int k) { return {TokenKind::kLoc, k}; }

  friend bool operator==(const Token&, const Token&) = default;
};

using TokenSequence = std::vector<Token>;

inline int vocab_size(int resolution) { return resolution + 4; }
/// Throws InvalidArgument for Loc outside [1, R].
int token_class(const Token& t, int resolution);
/// Throws InvalidArgument for ids outside [0, R+4).
Token token_from_class(int cls, int resolution);
std::string to_string(const Token& t);

/// [FALSE, EOS] for an empty tube, else [TRUE, s1, e1, ..., EOS].
TokenSequence to_tokens(const Tube& tube);
/// Parses the target grammar. The returned tube has coord (0, 0).
Tube from_tokens(std::span<const Token> seq, int resolution);

// ---------------------------------------------------------------------------
// VTZ1 binary format: "VTZ1", u32 R, u8 axis, then per tube u16 J followed by
// J (u16 start, u16 end) pairs. Little-endian throughout.

std::vector<std::uint8_t> write_vtz(const TubelizedShape& t);
TubelizedShape read_vtz(std::span<const std::uint8_t> bytes);

}  // namespace tubeseq
