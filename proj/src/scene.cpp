// SPDX-License-Identifier: Apache-2.0
#include "camforge/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "camforge/error.hpp"
#include "camforge/rng.hpp"

namespace camforge {

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::kIndoor: return "indoor";
    case SceneKind::kOutdoorStrip: return "outdoor_strip";
    case SceneKind::kColorbar: return "colorbar";
  }
  return "?";
}

SceneKind scene_kind_from_string(const std::string& s) {
  if (s == "indoor") return SceneKind::kIndoor;
  if (s == "outdoor_strip") return SceneKind::kOutdoorStrip;
  if (s == "colorbar") return SceneKind::kColorbar;
  throw ConfigError("unknown scene kind '" + s + "'");
}

namespace {

double cell_hash(std::int64_t i, std::int64_t j, std::uint64_t salt) {
  const std::uint64_t h = splitmix64(splitmix64(static_cast<std::uint64_t>(i) ^ (salt * 0x9E37ULL)) ^
                                     static_cast<std::uint64_t>(j) * 0xD1B54A32D192ED03ULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

}  // namespace

Rgb Texture::albedo_at(Vec3 p, int normal_axis) const {
  const int ua = (normal_axis + 1) % 3;
  const int va = (normal_axis + 2) % 3;
  const double cells_per_m = 2.0 * cycles_per_m;
  switch (kind) {
    case TextureKind::kFlat:
      return base;
    case TextureKind::kChecker: {
      const auto i = static_cast<std::int64_t>(std::floor(p[ua] * cells_per_m));
      const auto j = static_cast<std::int64_t>(std::floor(p[va] * cells_per_m));
      return ((i + j) & 1) ? alt : base;
    }
    case TextureKind::kStripes: {
      const auto i = static_cast<std::int64_t>(std::floor(p[ua] * cells_per_m));
      return (i & 1) ? alt : base;
    }
    case TextureKind::kCells: {
      const auto i = static_cast<std::int64_t>(std::floor(p[ua] * cells_per_m));
      const auto j = static_cast<std::int64_t>(std::floor(p[va] * cells_per_m));
      return mix(alt, base, cell_hash(i, j, salt + static_cast<std::uint64_t>(normal_axis)));
    }
    case TextureKind::kGradedCells: {
      const double y = std::max(0.0, p.y);
      const double grow = 1.0 + y / graded_ref_m;
      auto coord = [&](int axis) {
        if (axis == 1) return graded_ref_m * cells_per_m * std::log(grow);
        return p[axis] * cells_per_m / grow;
      };
      // Three octaves: a magnified view still finds texture inside a coarse cell.
      double t = 0.0;
      double scale = 1.0;
      for (const double weight : {0.5, 0.3, 0.2}) {
        const auto i = static_cast<std::int64_t>(std::floor(coord(ua) * scale));
        const auto j = static_cast<std::int64_t>(std::floor(coord(va) * scale));
        t += weight * cell_hash(i, j, salt + static_cast<std::uint64_t>(normal_axis) + (scale > 1.0 ? 7 : 0));
        scale *= 3.0;
      }
      return mix(alt, base, t);
    }
  }
  return base;
}

namespace {

constexpr double kWallThickness = 0.1;
constexpr double kDoorHeight = 2.1;
constexpr double kPathClearance = 0.6;
constexpr double kDoorClearance = 1.3;
constexpr double kDoorApproach = 0.7;

struct Region {
  double x0, y0, x1, y1;
};

struct WallSplit {
  int axis;    // wall normal axis: 0 -> wall at x = pos, 1 -> wall at y = pos
  double pos;
  double lo, hi;  // extent along the other axis
};

double snap_half(double v) { return std::round(v * 2.0) / 2.0; }

void partition(const Region& r, int depth, double min_len, Rng& rng, std::vector<Room>& rooms,
               std::vector<WallSplit>& walls) {
  const double w = r.x1 - r.x0;
  const double l = r.y1 - r.y0;
  const bool can_x = w >= 2.0 * min_len;
  const bool can_y = l >= 2.0 * min_len;
  const bool split = (can_x || can_y) && (depth == 0 || uniform(rng, 0.0, 1.0) < 0.75);
  if (!split) {
    rooms.push_back({r.x0, r.y0, r.x1, r.y1});
    return;
  }
  int axis;
  if (can_x && can_y)
    axis = (w > l) ? 0 : (l > w ? 1 : (uniform(rng, 0.0, 1.0) < 0.5 ? 0 : 1));
  else
    axis = can_x ? 0 : 1;
  const double lo = axis == 0 ? r.x0 : r.y0;
  const double hi = axis == 0 ? r.x1 : r.y1;
  double pos = snap_half(uniform(rng, lo + min_len, hi - min_len));
  pos = std::clamp(pos, lo + min_len, hi - min_len);
  if (axis == 0) {
    walls.push_back({0, pos, r.y0, r.y1});
    partition({r.x0, r.y0, pos, r.y1}, depth + 1, min_len, rng, rooms, walls);
    partition({pos, r.y0, r.x1, r.y1}, depth + 1, min_len, rng, rooms, walls);
  } else {
    walls.push_back({1, pos, r.x0, r.x1});
    partition({r.x0, r.y0, r.x1, pos}, depth + 1, min_len, rng, rooms, walls);
    partition({r.x0, pos, r.x1, r.y1}, depth + 1, min_len, rng, rooms, walls);
  }
}

int room_at(const std::vector<Room>& rooms, double x, double y) {
  for (std::size_t i = 0; i < rooms.size(); ++i)
    if (rooms[i].contains_xy(x, y)) return static_cast<int>(i);
  return -1;
}

/// Distance from point to an axis-aligned footprint rectangle.
double point_rect_distance(double px, double py, double x0, double y0, double x1, double y1) {
  const double dx = std::max({x0 - px, 0.0, px - x1});
  const double dy = std::max({y0 - py, 0.0, py - y1});
  return std::hypot(dx, dy);
}

double segment_rect_distance(Vec3 a, Vec3 b, double x0, double y0, double x1, double y1) {
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const int n = std::max(2, static_cast<int>(len / 0.05));
  double best = 1e300;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    best = std::min(best, point_rect_distance(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), x0, y0, x1,
                                              y1));
  }
  return best;
}

struct ClassShape {
  double sx, sy, sz, lift;
  Rgb color;
};

// Footprint/height per object class 1..10, plus a base color.
constexpr std::array<ClassShape, 10> kClassShapes{{
    {2.0, 0.9, 0.8, 0.0, {0.70, 0.20, 0.20}},   // sofa
    {2.0, 1.6, 0.5, 0.0, {0.20, 0.30, 0.70}},   // bed
    {1.2, 0.8, 0.75, 0.0, {0.55, 0.40, 0.25}},  // table
    {0.5, 0.5, 0.9, 0.0, {0.20, 0.60, 0.30}},   // chair
    {1.7, 0.8, 0.6, 0.0, {0.90, 0.90, 0.85}},   // bathtub
    {0.6, 0.5, 0.9, 0.0, {0.60, 0.80, 0.90}},   // basin
    {1.0, 0.15, 0.6, 0.6, {0.10, 0.10, 0.12}},  // computer/tv
    {0.4, 0.4, 1.2, 0.0, {0.10, 0.50, 0.10}},   // plant
    {0.3, 0.3, 1.6, 0.0, {0.90, 0.80, 0.30}},   // lamp
    {0.3, 0.3, 0.3, 0.0, {0.90, 0.40, 0.70}},   // toy
}};

void add_box(SceneInstance& s, Aabb box, int class_id, int& next_instance, const Texture& tex,
             PrimitiveKind kind = PrimitiveKind::kBox) {
  s.primitives.push_back({kind, box, class_id, next_instance++, tex});
}

SceneInstance generate_indoor(const SceneSpec& spec) {
  const double W = spec.extent_m.x;
  const double L = spec.extent_m.y;
  const double H = spec.extent_m.z;
  if (W < 2.0 * spec.min_room_length_m && L < 2.0 * spec.min_room_length_m)
    throw InfeasibleSpec(fmt::format("extent {}x{} m cannot hold two rooms of {} m", W, L,
                                     spec.min_room_length_m));
  if (spec.object_class_count < 1 || spec.object_class_count > 10)
    throw PreconditionError("object_class_count must lie in [1, 10]");

  Rng rng(derive_seed(spec.seed, Purpose::kScene, {0}));
  SceneInstance s;
  s.kind = SceneKind::kIndoor;
  s.bounds = {{0, 0, 0}, {W, L, H}};
  s.illuminance_lux = spec.illuminance_lux;
  s.ambient = 0.25;
  s.sky = 0.0;

  std::vector<WallSplit> walls;
  partition({0, 0, W, L}, 0, spec.min_room_length_m, rng, s.rooms, walls);

  // Door positions keep clear of perpendicular walls ending on the wall.
  const double dw = spec.door_width_m;
  for (const WallSplit& wall : walls) {
    std::vector<double> blockers;
    for (const WallSplit& other : walls) {
      if (other.axis == wall.axis) continue;
      const bool touches = std::abs(other.lo - wall.pos) < 1e-9 || std::abs(other.hi - wall.pos) < 1e-9;
      if (touches && other.pos > wall.lo && other.pos < wall.hi) blockers.push_back(other.pos);
    }
    std::vector<double> candidates;
    for (double c = wall.lo + dw / 2 + kPathClearance; c <= wall.hi - dw / 2 - kPathClearance; c += 0.1) {
      bool ok = true;
      for (double b : blockers) ok = ok && std::abs(c - b) >= dw / 2 + kPathClearance + 0.5;
      if (ok) candidates.push_back(c);
    }
    if (candidates.empty()) throw InfeasibleSpec("no feasible door position on an interior wall");
    const auto pick = std::min<std::size_t>(candidates.size() - 1,
                                            static_cast<std::size_t>(uniform(rng, 0.0, 1.0) * candidates.size()));
    const double c = candidates[pick];
    Doorway d;
    d.wall_axis = wall.axis;
    d.width = dw;
    if (wall.axis == 0) {
      d.x = wall.pos;
      d.y = c;
      d.room_a = room_at(s.rooms, wall.pos - 0.2, c);
      d.room_b = room_at(s.rooms, wall.pos + 0.2, c);
    } else {
      d.x = c;
      d.y = wall.pos;
      d.room_a = room_at(s.rooms, c, wall.pos - 0.2);
      d.room_b = room_at(s.rooms, c, wall.pos + 0.2);
    }
    s.doorways.push_back(d);
  }

  int next_instance = 1;
  const double cpm = spec.texture_cycles_per_m;
  const Texture wall_tex{TextureKind::kCells, {0.85, 0.82, 0.75}, {0.35, 0.33, 0.30}, cpm, 10.0, 11};
  const Texture floor_tex{TextureKind::kChecker, {0.55, 0.45, 0.35}, {0.30, 0.24, 0.18}, cpm / 2, 10.0, 0};
  const Texture ceiling_tex{TextureKind::kFlat, {0.9, 0.9, 0.9}, {0.9, 0.9, 0.9}, cpm, 10.0, 0};

  add_box(s, {{0, 0, -0.05}, {W, L, 0}}, kBackgroundClass, next_instance, floor_tex, PrimitiveKind::kPlane);
  add_box(s, {{0, 0, H}, {W, L, H + 0.05}}, kBackgroundClass, next_instance, ceiling_tex, PrimitiveKind::kPlane);
  const double t = kWallThickness;
  add_box(s, {{-t, -t, 0}, {0, L + t, H}}, kBackgroundClass, next_instance, wall_tex);
  add_box(s, {{W, -t, 0}, {W + t, L + t, H}}, kBackgroundClass, next_instance, wall_tex);
  add_box(s, {{0, -t, 0}, {W, 0, H}}, kBackgroundClass, next_instance, wall_tex);
  add_box(s, {{0, L, 0}, {W, L + t, H}}, kBackgroundClass, next_instance, wall_tex);

  for (std::size_t i = 0; i < walls.size(); ++i) {
    const WallSplit& wall = walls[i];
    const Doorway& d = s.doorways[i];
    const double c = wall.axis == 0 ? d.y : d.x;
    const double g0 = c - dw / 2;
    const double g1 = c + dw / 2;
    auto seg = [&](double a0, double a1, double z0, double z1) {
      if (a1 - a0 <= 1e-9) return;
      Aabb b = wall.axis == 0 ? Aabb{{wall.pos - t / 2, a0, z0}, {wall.pos + t / 2, a1, z1}}
                              : Aabb{{a0, wall.pos - t / 2, z0}, {a1, wall.pos + t / 2, z1}};
      add_box(s, b, kBackgroundClass, next_instance, wall_tex);
    };
    seg(wall.lo, g0, 0, H);
    seg(g1, wall.hi, 0, H);
    seg(g0, g1, kDoorHeight, H);
  }

  const Texture obstacle_tex{TextureKind::kStripes, {0.85, 0.65, 0.20}, {0.60, 0.45, 0.12}, 4.0, 10.0, 0};
  for (std::size_t i = 0; i < s.doorways.size(); ++i) {
    const Doorway& d = s.doorways[i];
    const double half_t = 0.075;
    Aabb b = d.wall_axis == 0
                 ? Aabb{{d.x - half_t, d.y - dw / 2, 0}, {d.x + half_t, d.y + dw / 2, spec.obstacle_height_m}}
                 : Aabb{{d.x - dw / 2, d.y - half_t, 0}, {d.x + dw / 2, d.y + half_t, spec.obstacle_height_m}};
    const int id = next_instance;
    add_box(s, b, kObstacleClass, next_instance, obstacle_tex);
    s.obstacles.push_back({b, id, static_cast<int>(i)});
  }

  for (const Room& room : s.rooms) {
    const Vec3 c = room.center(H - 0.1);
    s.lights.push_back({c, 0.7 * (H - 0.1) * (H - 0.1)});
  }

  // Objects avoid the star of corridors from each room center to its doors.
  for (std::size_t ri = 0; ri < s.rooms.size(); ++ri) {
    const Room& room = s.rooms[ri];
    std::vector<std::pair<Vec3, Vec3>> corridors;
    std::vector<Vec3> doors;
    for (const Doorway& d : s.doorways) {
      if (d.room_a == static_cast<int>(ri) || d.room_b == static_cast<int>(ri)) {
        const Vec3 approach = doorway_side_point(d, d.room_b == static_cast<int>(ri), kDoorApproach);
        corridors.emplace_back(room.center(), approach);
        corridors.emplace_back(approach, Vec3{d.x, d.y, 0});
        doors.push_back({d.x, d.y, 0});
      }
    }
    std::vector<Aabb> placed;
    for (int k = 0; k < spec.objects_per_room; ++k) {
      const int cls = 1 + static_cast<int>(uniform(rng, 0.0, 1.0) * spec.object_class_count) %
                              spec.object_class_count;
      const ClassShape& shape = kClassShapes[static_cast<std::size_t>(cls - 1)];
      const bool rotate = uniform(rng, 0.0, 1.0) < 0.5;
      const double sx = rotate ? shape.sy : shape.sx;
      const double sy = rotate ? shape.sx : shape.sy;
      for (int attempt = 0; attempt < 200; ++attempt) {
        const double x0 = uniform(rng, room.x0 + 0.15, room.x1 - 0.15 - sx);
        const double y0 = uniform(rng, room.y0 + 0.15, room.y1 - 0.15 - sy);
        const double x1 = x0 + sx;
        const double y1 = y0 + sy;
        bool ok = true;
        for (const auto& [a, b] : corridors)
          ok = ok && segment_rect_distance(a, b, x0, y0, x1, y1) >= kPathClearance;
        for (const Vec3& d : doors) ok = ok && point_rect_distance(d.x, d.y, x0, y0, x1, y1) >= kDoorClearance;
        for (const Aabb& o : placed)
          ok = ok && (x1 + 0.1 < o.lo.x || o.hi.x + 0.1 < x0 || y1 + 0.1 < o.lo.y || o.hi.y + 0.1 < y0);
        if (!ok) continue;
        const Aabb box{{x0, y0, shape.lift}, {x1, y1, shape.lift + shape.sz}};
        const Rgb alt{shape.color[0] * 0.55, shape.color[1] * 0.55, shape.color[2] * 0.55};
        const Texture tex{TextureKind::kChecker, shape.color, alt, 3.0, 10.0, 0};
        const int id = next_instance;
        add_box(s, box, cls, next_instance, tex);
        s.gt_boxes.push_back({box, cls, id});
        placed.push_back(box);
        break;
      }
    }
  }
  return s;
}

SceneInstance generate_outdoor(const SceneSpec& spec) {
  Rng rng(derive_seed(spec.seed, Purpose::kScene, {1}));
  SceneInstance s;
  s.kind = SceneKind::kOutdoorStrip;
  s.bounds = {{-250, -10, -0.1}, {250, 330, 60}};
  s.illuminance_lux = spec.illuminance_lux;
  s.ambient = 0.35;
  s.sky = 0.8;
  const Vec3 sun{2000.0, -3000.0, 4000.0};
  s.lights.push_back({sun, 0.6 * dot(sun, sun)});

  int next_instance = 1;
  const double cpm = spec.texture_cycles_per_m;
  auto graded = [&](Rgb base, Rgb alt, std::uint64_t salt) {
    // Cell size grows with distance so texture keeps a roughly constant
    // angular size along the strip.
    return Texture{TextureKind::kGradedCells, base, alt, cpm / 4.0, 10.0, salt};
  };
  add_box(s, {{-250, -10, -0.1}, {250, 330, 0}}, kBackgroundClass, next_instance,
          graded({0.50, 0.50, 0.48}, {0.12, 0.12, 0.12}, 1), PrimitiveKind::kPlane);

  auto add_object = [&](Aabb box, int cls, const Texture& tex) {
    const int id = next_instance;
    add_box(s, box, cls, next_instance, tex);
    s.gt_boxes.push_back({box, cls, id});
  };

  // Skyline wall closing the strip.
  add_object({{-250, 300, 0}, {250, 310, 20}}, 1, graded({0.75, 0.70, 0.65}, {0.25, 0.22, 0.20}, 2));

  // Footbridges spanning the road at mid and long range.
  for (double y : {uniform(rng, 35.0, 55.0), uniform(rng, 90.0, 140.0)})
    add_object({{-25, y, 5.5}, {25, y + 3.0, 7.5}}, 4, graded({0.7, 0.72, 0.75}, {0.2, 0.2, 0.22}, 50 + next_instance));

  // Buildings flanking the road at geometrically graded depths.
  for (int side = -1; side <= 1; side += 2) {
    double y = 8.0 + uniform(rng, 0.0, 3.0);
    while (y < 285.0) {
      const double gap = 0.35 * y + uniform(rng, 1.0, 4.0);
      const double inner = 3.5 + 0.12 * y + uniform(rng, 0.0, 2.0);
      const double depth = std::max(4.0, 0.7 * gap);
      const double width = uniform(rng, 8.0, 20.0);
      const double height = uniform(rng, 8.0, 30.0);
      const double x0 = side < 0 ? -inner - width : inner;
      const double x1 = side < 0 ? -inner : inner + width;
      const Rgb base{uniform(rng, 0.55, 0.9), uniform(rng, 0.5, 0.85), uniform(rng, 0.45, 0.8)};
      add_object({{x0, y, 0}, {x1, std::min(y + depth, 299.0), height}}, 1,
                 graded(base, {base[0] * 0.3, base[1] * 0.3, base[2] * 0.3}, 3 + next_instance));
      y += gap;
    }
  }

  // Vehicles beside the lane, from a couple of meters out to mid range.
  for (double y : {2.5, 4.0, 6.0, 9.0, 14.0, 22.0, 35.0, 55.0, 90.0}) {
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double inner = uniform(rng, 1.5, 3.5);
    const double x0 = side < 0 ? -inner - 1.8 : inner;
    const Rgb base{uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9), uniform(rng, 0.2, 0.9)};
    add_object({{x0, y, 0}, {x0 + 1.8, y + 4.2, 1.5}}, 2,
               graded(base, {base[0] * 0.35, base[1] * 0.35, base[2] * 0.35}, 100 + next_instance));
  }

  // Poles along both curbs.
  for (double y = 3.0; y < 120.0; y += 12.0) {
    for (double x : {-2.6, 2.4}) {
      add_object({{x, y, 0}, {x + 0.2, y + 0.2, 4.0}}, 3,
                 Texture{TextureKind::kStripes, {0.8, 0.8, 0.8}, {0.2, 0.2, 0.2}, 2.0, 10.0, 0});
    }
  }
  return s;
}

}  // namespace

SceneInstance generate_scene(const SceneSpec& spec) {
  if (!(spec.extent_m.x > 0 && spec.extent_m.y > 0 && spec.extent_m.z > 0))
    throw PreconditionError("scene extents must be positive");
  if (spec.kind == SceneKind::kIndoor &&
      (spec.min_room_length_m > spec.extent_m.x || spec.min_room_length_m > spec.extent_m.y))
    throw InfeasibleSpec("min_room_length_m exceeds the extent");
  switch (spec.kind) {
    case SceneKind::kIndoor: return generate_indoor(spec);
    case SceneKind::kOutdoorStrip: return generate_outdoor(spec);
    case SceneKind::kColorbar: return make_colorbar_target(11);
  }
  throw PreconditionError("unknown scene kind");
}

SceneInstance make_colorbar_target(int n_levels) {
  if (n_levels < 2) throw PreconditionError("colorbar target needs at least 2 levels");
  SceneInstance s;
  s.kind = SceneKind::kColorbar;
  s.bounds = {{-0.5, 1.0, -0.5}, {0.5, 1.0, 0.5}};
  s.ambient = 1.0;
  s.sky = 0.0;
  for (int k = 0; k < n_levels; ++k) {
    const double a = static_cast<double>(k) / (n_levels - 1);
    const double x0 = -0.5 + static_cast<double>(k) / n_levels;
    const double x1 = -0.5 + static_cast<double>(k + 1) / n_levels;
    Primitive p;
    p.kind = PrimitiveKind::kPlane;
    p.box = {{x0, 1.0, -0.5}, {x1, 1.0, 0.5}};
    p.class_id = k + 1;
    p.instance_id = k + 1;
    p.texture = Texture{TextureKind::kFlat, {a, a, a}, {a, a, a}, 1.0, 10.0, 0};
    s.primitives.push_back(p);
  }
  return s;
}

void write_mesh_listing(const SceneInstance& scene, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open for writing: " + path.string());
  os << "# kind class instance lo_x lo_y lo_z hi_x hi_y hi_z texture\n";
  for (const Primitive& p : scene.primitives) {
    os << fmt::format("{} {} {} {:.6g} {:.6g} {:.6g} {:.6g} {:.6g} {:.6g} {}\n",
                      p.kind == PrimitiveKind::kBox ? "box" : "plane", p.class_id, p.instance_id,
                      p.box.lo.x, p.box.lo.y, p.box.lo.z, p.box.hi.x, p.box.hi.y, p.box.hi.z,
                      static_cast<int>(p.texture.kind));
  }
}

Vec3 doorway_side_point(const Doorway& d, bool high_side, double offset) {
  const double sgn = high_side ? 1.0 : -1.0;
  return d.wall_axis == 0 ? Vec3{d.x + sgn * offset, d.y, 0} : Vec3{d.x, d.y + sgn * offset, 0};
}

bool inside_geometry(const SceneInstance& scene, Vec3 p) {
  for (const Primitive& prim : scene.primitives)
    if (prim.box.contains(p)) return true;
  return false;
}

}  // namespace camforge
