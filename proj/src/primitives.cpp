// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "tubeseq/error.hpp"
#include "tubeseq/grid.hpp"

namespace tubeseq {

Primitive Primitive::sphere(Vec3 center, double radius) {
  Primitive p;
  p.kind = PrimitiveKind::kSphere;
  p.center = center;
  p.radius = radius;
  return p;
}

Primitive Primitive::box(Vec3 lo, Vec3 hi) {
  Primitive p;
  p.kind = PrimitiveKind::kBox;
  p.lo = lo;
  p.hi = hi;
  return p;
}

Primitive Primitive::cylinder(int axis, Vec3 center, double radius, double lo, double hi) {
  Primitive p;
  p.kind = PrimitiveKind::kCylinder;
  p.axis = axis;
  p.center = center;
  p.radius = radius;
  p.lo = {lo, lo, lo};
  p.hi = {hi, hi, hi};
  return p;
}

Primitive Primitive::make_union(std::vector<Primitive> parts) {
  Primitive p;
  p.kind = PrimitiveKind::kUnion;
  p.children = std::move(parts);
  return p;
}

namespace {

double component(const Vec3& v, int axis) { return axis == 0 ? v.x : axis == 1 ? v.y : v.z; }

void validate(const Primitive& p, int r) {
  const double rr = r;
  auto inside = [rr](double lo, double hi) { return lo >= 0.0 && hi <= rr; };
  switch (p.kind) {
    case PrimitiveKind::kSphere:
      if (!(p.radius > 0.0)) throw InvalidArgument("sphere radius must be > 0");
      for (int a = 0; a < 3; ++a) {
        const double c = component(p.center, a);
        if (!inside(c - p.radius, c + p.radius)) throw InvalidArgument("sphere leaves the grid");
      }
      break;
    case PrimitiveKind::kBox:
      for (int a = 0; a < 3; ++a) {
        const double lo = component(p.lo, a);
        const double hi = component(p.hi, a);
        if (!(hi > lo)) throw InvalidArgument("box is empty along axis " + std::to_string(a));
        if (!inside(lo, hi)) throw InvalidArgument("box leaves the grid");
      }
      break;
    case PrimitiveKind::kCylinder: {
      if (p.axis < 0 || p.axis > 2) throw InvalidArgument("cylinder axis must be 0, 1 or 2");
      if (!(p.radius > 0.0)) throw InvalidArgument("cylinder radius must be > 0");
      const double lo = component(p.lo, p.axis);
      const double hi = component(p.hi, p.axis);
      if (!(hi > lo)) throw InvalidArgument("cylinder has empty extent");
      if (!inside(lo, hi)) throw InvalidArgument("cylinder leaves the grid");
      for (int a = 0; a < 3; ++a) {
        if (a == p.axis) continue;
        const double c = component(p.center, a);
        if (!inside(c - p.radius, c + p.radius)) throw InvalidArgument("cylinder leaves the grid");
      }
      break;
    }
    case PrimitiveKind::kUnion:
      if (p.children.empty()) throw InvalidArgument("union needs at least one part");
      for (const auto& c : p.children) validate(c, r);
      break;
  }
}

bool contains(const Primitive& p, const std::array<double, 3>& q) {
  switch (p.kind) {
    case PrimitiveKind::kSphere: {
      const double dx = q[0] - p.center.x, dy = q[1] - p.center.y, dz = q[2] - p.center.z;
      return dx * dx + dy * dy + dz * dz <= p.radius * p.radius;
    }
    case PrimitiveKind::kBox:
      for (int a = 0; a < 3; ++a) {
        if (q[a] < component(p.lo, a) || q[a] > component(p.hi, a)) return false;
      }
      return true;
    case PrimitiveKind::kCylinder: {
      const double t = q[p.axis];
      if (t < component(p.lo, p.axis) || t > component(p.hi, p.axis)) return false;
      double d2 = 0.0;
      for (int a = 0; a < 3; ++a) {
        if (a == p.axis) continue;
        const double d = q[a] - component(p.center, a);
        d2 += d * d;
      }
      return d2 <= p.radius * p.radius;
    }
    case PrimitiveKind::kUnion:
      return std::any_of(p.children.begin(), p.children.end(),
                         [&](const Primitive& c) { return contains(c, q); });
  }
  return false;
}

// Portable uniform draw in [lo, hi); std distributions are not specified bit-for-bit.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Primitive random_sphere(std::mt19937_64& rng, double r, double scale) {
  const double radius = uniform(rng, 0.25, 0.45) * r * scale;
  auto c = [&] { return uniform(rng, radius, r - radius); };
  Vec3 center;
  center.x = c();
  center.y = c();
  center.z = c();
  return Primitive::sphere(center, radius);
}

Primitive random_box(std::mt19937_64& rng, double r, double scale) {
  std::array<double, 3> lo{}, hi{};
  for (int a = 0; a < 3; ++a) {
    const double size = uniform(rng, 0.3, 0.9) * r * scale;
    lo[a] = uniform(rng, 0.0, r - size);
    hi[a] = lo[a] + size;
  }
  return Primitive::box({lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]});
}

Primitive random_cylinder(std::mt19937_64& rng, double r, double scale) {
  const int axis = static_cast<int>(rng() % 3);
  const double radius = uniform(rng, 0.2, 0.4) * r * scale;
  const double length = uniform(rng, 0.4, 0.9) * r * scale;
  const double lo = uniform(rng, 0.0, r - length);
  std::array<double, 3> c{};
  for (int a = 0; a < 3; ++a) c[a] = uniform(rng, radius, r - radius);
  return Primitive::cylinder(axis, {c[0], c[1], c[2]}, radius, lo, lo + length);
}

Primitive random_union(std::mt19937_64& rng, double r) {
  const int parts = 2 + static_cast<int>(rng() % 2);
  std::vector<Primitive> children;
  for (int i = 0; i < parts; ++i) {
    switch (rng() % 3) {
      case 0: children.push_back(random_sphere(rng, r, 0.6)); break;
      case 1: children.push_back(random_box(rng, r, 0.6)); break;
      default: children.push_back(random_cylinder(rng, r, 0.6)); break;
    }
  }
  return Primitive::make_union(std::move(children));
}

}  // namespace

VoxelGrid gen_primitive(const Primitive& spec, int resolution) {
  VoxelGrid g(resolution);
  validate(spec, resolution);
  for (int x = 0; x < resolution; ++x) {
    for (int y = 0; y < resolution; ++y) {
      for (int z = 0; z < resolution; ++z) {
        if (contains(spec, {x + 0.5, y + 0.5, z + 0.5})) g.set(x, y, z, true);
      }
    }
  }
  return g;
}

std::vector<std::string> primitive_suites() { return {"sphere", "box", "cylinder", "union", "mixed"}; }

Primitive random_primitive(const std::string& suite, int resolution, std::uint64_t seed,
                           std::size_t index) {
  if (resolution < 1) throw InvalidArgument("resolution must be >= 1");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const double r = resolution;
  std::string kind = suite;
  if (suite == "mixed") {
    static const char* kCycle[] = {"sphere", "box", "cylinder", "union"};
    kind = kCycle[index % 4];
  }
  if (kind == "sphere") return random_sphere(rng, r, 1.0);
  if (kind == "box") return random_box(rng, r, 1.0);
  if (kind == "cylinder") return random_cylinder(rng, r, 1.0);
  if (kind == "union") return random_union(rng, r);
  throw InvalidArgument("unknown primitive suite '" + suite + "'");
}

}  // namespace tubeseq
