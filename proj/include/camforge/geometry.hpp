// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace camforge {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

inline Vec3 normalized(Vec3 a) { return a * (1.0 / norm(a)); }

constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Axis-aligned box. A zero extent along one axis makes it a rectangle.
struct Aabb {
  Vec3 lo;
  Vec3 hi;

  constexpr Vec3 center() const { return (lo + hi) * 0.5; }
  constexpr Vec3 size() const { return hi - lo; }

  constexpr bool contains(Vec3 p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
  }

  constexpr void expand(const Aabb& o) {
    lo = {std::min(lo.x, o.lo.x), std::min(lo.y, o.lo.y), std::min(lo.z, o.lo.z)};
    hi = {std::max(hi.x, o.hi.x), std::max(hi.y, o.hi.y), std::max(hi.z, o.hi.z)};
  }

  friend constexpr bool operator==(const Aabb&, const Aabb&) = default;
};

/// Ray with an unnormalized direction; hit distances are in units of |dir|.
struct Ray {
  Vec3 origin;
  Vec3 dir;
};

/// Slab test. On a hit writes the entry parameter and the entry face
/// (axis 0..2, sign -1/+1 of the outward normal).
inline bool intersect(const Ray& ray, const Aabb& box, double t_min, double t_max,
                      double& t_hit, int& axis, int& sign) {
  double t0 = t_min;
  double t1 = t_max;
  int enter_axis = -1;
  int enter_sign = 0;
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a];
    const double d = ray.dir[a];
    if (d == 0.0) {
      if (o < box.lo[a] || o > box.hi[a]) return false;
      continue;
    }
    const double inv = 1.0 / d;
    double tn = (box.lo[a] - o) * inv;
    double tf = (box.hi[a] - o) * inv;
    // Entry is through the low face when moving +axis; also decides planes.
    const int s = d > 0.0 ? -1 : +1;
    if (d < 0.0) std::swap(tn, tf);
    if (tn > t0) {
      t0 = tn;
      enter_axis = a;
      enter_sign = s;
    }
    t1 = std::min(t1, tf);
    if (t0 > t1) return false;
  }
  if (enter_axis < 0) return false;  // origin inside the box
  t_hit = t0;
  axis = enter_axis;
  sign = enter_sign;
  return true;
}

}  // namespace camforge
