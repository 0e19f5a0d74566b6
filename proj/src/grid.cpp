// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/grid.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "tubeseq/error.hpp"

namespace tubeseq {

VoxelGrid::VoxelGrid(int resolution) : resolution_(resolution) {
  if (resolution < 1) {
    throw InvalidArgument("grid resolution must be >= 1, got " + std::to_string(resolution));
  }
  const auto r = static_cast<std::size_t>(resolution);
  cells_.assign(r * r * r, 0);
}

void VoxelGrid::check_coord(int x, int y, int z) const {
  auto bad = [this](int c) { return c < 0 || c >= resolution_; };
  if (bad(x) || bad(y) || bad(z)) {
    std::ostringstream os;
    os << "voxel (" << x << "," << y << "," << z << ") outside [0," << resolution_ << ")^3";
    throw InvalidArgument(os.str());
  }
}

bool VoxelGrid::get(int x, int y, int z) const {
  check_coord(x, y, z);
  return cells_[index(x, y, z)] != 0;
}

void VoxelGrid::set(int x, int y, int z, bool occupied) {
  check_coord(x, y, z);
  cells_[index(x, y, z)] = occupied ? 1 : 0;
}

std::size_t VoxelGrid::occupied_count() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double volumetric_iou(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.resolution() != b.resolution()) {
    throw InvalidArgument("IoU of grids with resolutions " + std::to_string(a.resolution()) +
                          " and " + std::to_string(b.resolution()));
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ca = a.cells();
  auto cb = b.cells();
  for (std::size_t i = 0; i < ca.size(); ++i) {
    inter += ca[i] & cb[i];
    uni += ca[i] | cb[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kDenseMagic = "VOXD ";

// Reads one '\n'-terminated line starting at `pos`; returns false at end of input.
bool next_line(std::span<const std::uint8_t> bytes, std::size_t& pos, std::string& line) {
  if (pos >= bytes.size()) return false;
  line.clear();
  while (pos < bytes.size() && bytes[pos] != '\n') line.push_back(static_cast<char>(bytes[pos++]));
  if (pos >= bytes.size()) return false;
  ++pos;
  return true;
}

int parse_resolution(const std::string& text, const char* what) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      text.size() > 6) {
    throw FormatError("bad-header", std::string("unparsable ") + what + " '" + text + "'");
  }
  int r = std::stoi(text);
  if (r < 1) throw FormatError("bad-header", std::string(what) + " must be >= 1");
  return r;
}

}  // namespace

std::vector<std::uint8_t> write_dense(const VoxelGrid& g) {
  const std::string header = std::string(kDenseMagic) + std::to_string(g.resolution()) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  auto cells = g.cells();
  out.insert(out.end(), cells.begin(), cells.end());
  return out;
}

VoxelGrid read_dense(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kDenseMagic.size() ||
      !std::equal(kDenseMagic.begin(), kDenseMagic.end(), bytes.begin())) {
    throw FormatError("bad-magic", "dense grid must start with 'VOXD '");
  }
  std::size_t pos = kDenseMagic.size();
  std::string line;
  if (!next_line(bytes, pos, line)) throw FormatError("truncated", "missing header newline");
  VoxelGrid g(parse_resolution(line, "resolution"));
  const std::size_t n = g.cell_count();
  if (bytes.size() - pos != n) {
    throw FormatError(bytes.size() - pos < n ? "truncated" : "trailing-bytes",
                      "expected " + std::to_string(n) + " payload bytes, got " +
                          std::to_string(bytes.size() - pos));
  }
  auto cells = g.mutable_cells();
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t b = bytes[pos + i];
    if (b > 1) {
      throw FormatError("bad-cell", "payload byte " + std::to_string(i) + " is " + std::to_string(b));
    }
    cells[i] = b;
  }
  return g;
}

VoxelGrid import_binvox(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  std::string line;
  if (!next_line(bytes, pos, line) || line.rfind("#binvox", 0) != 0) {
    throw FormatError("bad-magic", "binvox must start with '#binvox'");
  }
  int dim = 0;
  bool have_data = false;
  while (next_line(bytes, pos, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "data") {
      have_data = true;
      break;
    }
    if (key == "dim") {
      long d0 = 0, d1 = 0, d2 = 0;
      if (!(ls >> d0 >> d1 >> d2)) throw FormatError("bad-header", "malformed dim line");
      if (d0 != d1 || d1 != d2) throw FormatError("non-cubic", "binvox dims " + line.substr(4));
      if (d0 < 1 || d0 > 4096) throw FormatError("bad-header", "binvox dim out of range");
      dim = static_cast<int>(d0);
    } else if (key != "translate" && key != "scale") {
      throw FormatError("bad-header", "unexpected binvox header line '" + line + "'");
    }
  }
  if (!have_data) throw FormatError("bad-header", "binvox header has no 'data' line");
  if (dim == 0) throw FormatError("bad-header", "binvox header has no 'dim' line");

  VoxelGrid g(dim);
  const std::size_t total = g.cell_count();
  const auto d = static_cast<std::size_t>(dim);
  std::size_t filled = 0;
  while (pos < bytes.size()) {
    if (pos + 1 >= bytes.size()) throw FormatError("truncated", "dangling binvox run byte");
    const std::uint8_t value = bytes[pos];
    const std::size_t count = bytes[pos + 1];
    pos += 2;
    if (value > 1) throw FormatError("bad-cell", "binvox run value " + std::to_string(value));
    if (filled + count > total) throw FormatError("run-overflow", "binvox runs exceed D^3");
    for (std::size_t i = filled; i < filled + count; ++i) {
      // binvox linear index = x*D*D + z*D + y
      const auto x = static_cast<int>(i / (d * d));
      const auto z = static_cast<int>((i / d) % d);
      const auto y = static_cast<int>(i % d);
      if (value) g.set(x, y, z, true);
    }
    filled += count;
  }
  if (filled != total) {
    throw FormatError("run-underflow", "binvox runs cover " + std::to_string(filled) + " of " +
                                           std::to_string(total) + " voxels");
  }
  return g;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace tubeseq
