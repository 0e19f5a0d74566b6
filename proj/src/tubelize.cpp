// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/tubelize.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "tubeseq/error.hpp"

namespace tubeseq {

std::string to_string(Axis a) {
  switch (a) {
    case Axis::kX: return "X";
    case Axis::kY: return "Y";
    case Axis::kZ: return "Z";
  }
  return "?";
}

Axis parse_axis(const std::string& text) {
  if (text.size() == 1) {
    switch (std::toupper(static_cast<unsigned char>(text[0]))) {
      case 'X': return Axis::kX;
      case 'Y': return Axis::kY;
      case 'Z': return Axis::kZ;
      default: break;
    }
  }
  throw InvalidArgument("axis must be X, Y or Z, got '" + text + "'");
}

std::pair<Axis, Axis> plane_axes(Axis a) {
  switch (a) {
    case Axis::kX: return {Axis::kY, Axis::kZ};
    case Axis::kY: return {Axis::kX, Axis::kZ};
    case Axis::kZ: return {Axis::kX, Axis::kY};
  }
  return {Axis::kX, Axis::kY};
}

namespace {

// Voxel coordinates of position k along the tube at (u, v).
std::array<int, 3> voxel_of(Axis axis, int u, int v, int k) {
  switch (axis) {
    case Axis::kX: return {k, u, v};
    case Axis::kY: return {u, k, v};
    case Axis::kZ: return {u, v, k};
  }
  return {u, v, k};
}

void check_plane(int r, int u, int v) {
  if (u < 0 || u >= r || v < 0 || v >= r) {
    throw InvalidArgument("tube coordinate (" + std::to_string(u) + "," + std::to_string(v) +
                          ") outside [0," + std::to_string(r) + ")^2");
  }
}

}  // namespace

void validate_segments(std::span<const OccupancySegment> segments, int resolution) {
  int prev_end = -1;
  for (const auto& s : segments) {
    if (s.start < 1 || s.end > resolution) {
      throw FormatError("out-of-range", "segment (" + std::to_string(s.start) + "," +
                                            std::to_string(s.end) + ") outside [1," +
                                            std::to_string(resolution) + "]");
    }
    if (s.end < s.start) {
      throw FormatError("end-before-start", "segment (" + std::to_string(s.start) + "," +
                                                std::to_string(s.end) + ")");
    }
    if (prev_end >= 0 && s.start < prev_end + 2) {
      throw FormatError("overlap", "segment starting at " + std::to_string(s.start) +
                                       " touches or overlaps the run ending at " +
                                       std::to_string(prev_end));
    }
    prev_end = s.end;
  }
}

std::vector<std::uint8_t> extract_line(const VoxelGrid& g, Axis axis, int u, int v) {
  const int r = g.resolution();
  check_plane(r, u, v);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(r));
  auto cells = g.cells();
  for (int k = 0; k < r; ++k) {
    const auto p = voxel_of(axis, u, v, k);
    line[static_cast<std::size_t>(k)] = cells[g.index(p[0], p[1], p[2])];
  }
  return line;
}

std::vector<OccupancySegment> segments_of_line(std::span<const std::uint8_t> line) {
  std::vector<OccupancySegment> out;
  const int n = static_cast<int>(line.size());
  int k = 0;
  while (k < n) {
    if (!line[static_cast<std::size_t>(k)]) {
      ++k;
      continue;
    }
    const int start = k;
    while (k < n && line[static_cast<std::size_t>(k)]) ++k;
    out.push_back({start + 1, k});
  }
  return out;
}

TubelizedShape tubelize(const VoxelGrid& g, Axis axis) {
  TubelizedShape t;
  t.resolution = g.resolution();
  t.axis = axis;
  t.tubes.reserve(static_cast<std::size_t>(t.resolution) * t.resolution);
  for (int u = 0; u < t.resolution; ++u) {
    for (int v = 0; v < t.resolution; ++v) {
      t.tubes.push_back({{u, v}, segments_of_line(extract_line(g, axis, u, v))});
    }
  }
  return t;
}

VoxelGrid detubelize(const TubelizedShape& t) {
  const int r = t.resolution;
  if (r < 1) throw FormatError("bad-resolution", "resolution must be >= 1");
  const auto expected = static_cast<std::size_t>(r) * r;
  if (t.tubes.size() != expected) {
    throw FormatError("tube-count", "expected " + std::to_string(expected) + " tubes, got " +
                                        std::to_string(t.tubes.size()));
  }
  VoxelGrid g(r);
  auto cells = g.mutable_cells();
  for (std::size_t i = 0; i < t.tubes.size(); ++i) {
    const Tube& tube = t.tubes[i];
    const int u = static_cast<int>(i) / r;
    const int v = static_cast<int>(i) % r;
    if (tube.coord.u != u || tube.coord.v != v) {
      throw FormatError("tube-order", "tube " + std::to_string(i) + " has coordinate (" +
                                          std::to_string(tube.coord.u) + "," +
                                          std::to_string(tube.coord.v) + ")");
    }
    validate_segments(tube.segments, r);
    for (const auto& s : tube.segments) {
      for (int k = s.start - 1; k < s.end; ++k) {
        const auto p = voxel_of(t.axis, u, v, k);
        cells[g.index(p[0], p[1], p[2])] = 1;
      }
    }
  }
  return g;
}

std::vector<int> segment_count_image(const TubelizedShape& t) {
  std::vector<int> out;
  out.reserve(t.tubes.size());
  for (const auto& tube : t.tubes) out.push_back(static_cast<int>(tube.segments.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Tokens

int token_class(const Token& t, int resolution) {
  switch (t.kind) {
    case TokenKind::kLoc:
      if (t.loc < 1 || t.loc > resolution) {
        throw InvalidArgument("location token " + std::to_string(t.loc) + " outside [1," +
                              std::to_string(resolution) + "]");
      }
      return t.loc - 1;
    case TokenKind::kTrue: return resolution;
    case TokenKind::kFalse: return resolution + 1;
    case TokenKind::kSos: return resolution + 2;
    case TokenKind::kEos: return resolution + 3;
  }
  throw InvalidArgument("unknown token kind");
}

Token token_from_class(int cls, int resolution) {
  if (cls >= 0 && cls < resolution) return Token::Loc(cls + 1);
  if (cls == resolution) return Token::True();
  if (cls == resolution + 1) return Token::False();
  if (cls == resolution + 2) return Token::Sos();
  if (cls == resolution + 3) return Token::Eos();
  throw InvalidArgument("token class " + std::to_string(cls) + " outside the alphabet");
}

std::string to_string(const Token& t) {
  switch (t.kind) {
    case TokenKind::kFalse: return "FALSE";
    case TokenKind::kTrue: return "TRUE";
    case TokenKind::kSos: return "SOS";
    case TokenKind::kEos: return "EOS";
    case TokenKind::kLoc: return std::to_string(t.loc);
  }
  return "?";
}

TokenSequence to_tokens(const Tube& tube) {
  TokenSequence seq;
  if (tube.segments.empty()) return {Token::False(), Token::Eos()};
  seq.reserve(2 * tube.segments.size() + 2);
  seq.push_back(Token::True());
  for (const auto& s : tube.segments) {
    seq.push_back(Token::Loc(s.start));
    seq.push_back(Token::Loc(s.end));
  }
  seq.push_back(Token::Eos());
  return seq;
}

Tube from_tokens(std::span<const Token> seq, int resolution) {
  if (seq.empty()) throw FormatError("empty", "token sequence is empty");
  if (seq.back().kind != TokenKind::kEos) throw FormatError("missing-eos", "sequence must end with EOS");
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    if (seq[i].kind == TokenKind::kEos) throw FormatError("early-eos", "EOS before the last position");
  }
  Tube tube;
  if (seq.front().kind == TokenKind::kFalse) {
    if (seq.size() != 2) throw FormatError("false-with-segments", "FALSE must be followed by EOS only");
    return tube;
  }
  if (seq.front().kind != TokenKind::kTrue) {
    throw FormatError("missing-indicator", "sequence must start with TRUE or FALSE");
  }
  const auto body = seq.subspan(1, seq.size() - 2);
  if (body.empty()) throw FormatError("true-without-segments", "TRUE must be followed by segments");
  if (body.size() % 2 != 0) throw FormatError("odd-pairs", "location tokens must come in pairs");
  for (const auto& t : body) {
    if (t.kind != TokenKind::kLoc) {
      throw FormatError("unexpected-token", "expected a location token, got " + to_string(t));
    }
  }
  for (std::size_t i = 0; i < body.size(); i += 2) {
    tube.segments.push_back({body[i].loc, body[i + 1].loc});
  }
  validate_segments(tube.segments, resolution);
  return tube;
}

// ---------------------------------------------------------------------------
// VTZ1

namespace {

constexpr std::uint8_t kVtzMagic[4] = {'V', 'T', 'Z', '1'};

void put_u16(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  put_u16(out, v & 0xffff);
  put_u16(out, v >> 16);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u8() { return take(1)[0]; }
  std::uint32_t u16() {
    auto b = take(2);
    return b[0] | (static_cast<std::uint32_t>(b[1]) << 8);
  }
  std::uint32_t u32() {
    auto b = take(4);
    return b[0] | (static_cast<std::uint32_t>(b[1]) << 8) | (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated", "unexpected end of VTZ data");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> write_vtz(const TubelizedShape& t) {
  if (t.resolution < 1 || t.resolution > 0xffff) {
    throw InvalidArgument("VTZ resolution must be in [1, 65535]");
  }
  std::vector<std::uint8_t> out(std::begin(kVtzMagic), std::end(kVtzMagic));
  put_u32(out, static_cast<std::uint32_t>(t.resolution));
  out.push_back(static_cast<std::uint8_t>(t.axis));
  for (const auto& tube : t.tubes) {
    put_u16(out, static_cast<std::uint32_t>(tube.segments.size()));
    for (const auto& s : tube.segments) {
      put_u16(out, static_cast<std::uint32_t>(s.start));
      put_u16(out, static_cast<std::uint32_t>(s.end));
    }
  }
  return out;
}

TubelizedShape read_vtz(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (bytes.size() < 4 || !std::equal(std::begin(kVtzMagic), std::end(kVtzMagic), bytes.begin())) {
    throw FormatError("bad-magic", "VTZ data must start with 'VTZ1'");
  }
  in.take(4);
  TubelizedShape t;
  const std::uint32_t r = in.u32();
  if (r < 1 || r > 0xffff) throw FormatError("bad-resolution", "VTZ resolution " + std::to_string(r));
  t.resolution = static_cast<int>(r);
  const std::uint32_t axis = in.u8();
  if (axis > 2) throw FormatError("bad-axis", "VTZ axis byte " + std::to_string(axis));
  t.axis = static_cast<Axis>(axis);
  t.tubes.reserve(static_cast<std::size_t>(r) * r);
  for (int u = 0; u < t.resolution; ++u) {
    for (int v = 0; v < t.resolution; ++v) {
      Tube tube{{u, v}, {}};
      const std::uint32_t j = in.u16();
      if (j > (r + 1) / 2) throw FormatError("too-many-segments", "tube has " + std::to_string(j) + " segments");
      for (std::uint32_t i = 0; i < j; ++i) {
        const int s = static_cast<int>(in.u16());
        const int e = static_cast<int>(in.u16());
        tube.segments.push_back({s, e});
      }
      validate_segments(tube.segments, t.resolution);
      t.tubes.push_back(std::move(tube));
    }
  }
  if (!in.done()) throw FormatError("trailing-bytes", "data after the last tube");
  return t;
}

}  // namespace tubeseq
