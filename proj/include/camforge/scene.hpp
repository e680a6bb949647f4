// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "camforge/geometry.hpp"

namespace camforge {

using Rgb = std::array<double, 3>;

enum class SceneKind { kIndoor, kOutdoorStrip, kColorbar };

std::string to_string(SceneKind kind);
SceneKind scene_kind_from_string(const std::string& s);

enum class TextureKind {
  kFlat,
  kChecker,
  kStripes,
  kCells,        // hashed per-cell albedo, aperiodic
  kGradedCells,  // kCells whose cell size grows linearly with +y
};

/// Procedural Lambertian albedo. Evaluated on the two axes tangent to the
/// hit face.
struct Texture {
  TextureKind kind = TextureKind::kFlat;
  Rgb base{0.5, 0.5, 0.5};
  Rgb alt{0.2, 0.2, 0.2};
  double cycles_per_m = 8.0;
  /// kGradedCells: cell size is (1 + y / graded_ref_m) / (2 * cycles_per_m),
  /// plus octaves of cells three and nine times smaller.
  double graded_ref_m = 10.0;
  std::uint64_t salt = 0;

  Rgb albedo_at(Vec3 p, int normal_axis) const;
  friend bool operator==(const Texture&, const Texture&) = default;
};

enum class PrimitiveKind { kBox, kPlane };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  Aabb box;
  int class_id = 0;
  int instance_id = 0;
  Texture texture;
  friend bool operator==(const Primitive&, const Primitive&) = default;
};

struct Light {
  Vec3 position;
  double intensity = 0.0;  // shading units at 1 m, inverse-square falloff
  friend bool operator==(const Light&, const Light&) = default;
};

/// Rectangle of the floor plan, meters.
struct Room {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  Vec3 center(double z = 0.0) const { return {(x0 + x1) / 2, (y0 + y1) / 2, z}; }
  double width() const { return x1 - x0; }
  double length() const { return y1 - y0; }
  bool contains_xy(double x, double y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
  friend bool operator==(const Room&, const Room&) = default;
};

/// Opening in an interior wall. `wall_axis` is the axis the wall is normal to.
struct Doorway {
  double x = 0, y = 0;
  int wall_axis = 0;
  double width = 1.0;
  int room_a = -1;  // on the low side of the wall
  int room_b = -1;  // on the high side
  friend bool operator==(const Doorway&, const Doorway&) = default;
};

struct Obstacle {
  Aabb box;
  int instance_id = 0;
  int doorway = -1;
  friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct GtBox {
  Aabb box;
  int class_id = 0;
  int instance_id = 0;
  friend bool operator==(const GtBox&, const GtBox&) = default;
};

inline constexpr int kBackgroundClass = 0;
inline constexpr int kObstacleClass = 11;

struct SceneSpec {
  SceneKind kind = SceneKind::kIndoor;
  Vec3 extent_m{15.0, 15.0, 3.0};
  double min_room_length_m = 5.0;
  int object_class_count = 10;
  int objects_per_room = 4;
  double obstacle_height_m = 0.08;
  double door_width_m = 1.0;
  double texture_cycles_per_m = 8.0;
  double illuminance_lux = 20.0;
  std::uint64_t seed = 0;
  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

/// Immutable generated environment.
struct SceneInstance {
  SceneKind kind = SceneKind::kIndoor;
  Aabb bounds;
  std::vector<Primitive> primitives;
  std::vector<Light> lights;
  double ambient = 0.0;
  double sky = 0.0;  // shading factor returned by rays that escape
  double illuminance_lux = 20.0;
  std::vector<Room> rooms;
  std::vector<Doorway> doorways;
  std::vector<Obstacle> obstacles;
  std::vector<GtBox> gt_boxes;
  friend bool operator==(const SceneInstance&, const SceneInstance&) = default;
};

SceneInstance generate_scene(const SceneSpec& spec);

/// Grey colorbar test target: `n_levels` vertical bars with albedo k/(n-1),
/// a fronto-parallel plane one meter in front of the origin facing -y,
/// lit by ambient light only. Bar k carries class id k + 1.
SceneInstance make_colorbar_target(int n_levels);

/// One primitive per line, for inspection.
void write_mesh_listing(const SceneInstance& scene, const std::filesystem::path& path);

struct PathStep {
  Vec3 position;  // z is the camera height
  double yaw_deg = 0.0;
  double camera_height_m = 0.0;
  int approaching_obstacle = -1;  // within the approach window, before crossing
  int crossed_obstacle = -1;      // crossing happens on this step
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct AgentPath {
  std::vector<PathStep> steps;
  friend bool operator==(const AgentPath&, const AgentPath&) = default;
};

struct PathOptions {
  double step_length_m = 0.2;
  double turn_rate_deg = 30.0;
  double approach_window_m = 1.0;
  double min_height_m = 1.0;
  double max_height_m = 2.0;
  double outdoor_height_m = 2.0;
};

AgentPath plan_path(const SceneInstance& scene, int n_steps, std::uint64_t seed,
                    const PathOptions& options = {});

/// Point `offset` meters from the doorway center along the wall normal, on
/// the high (+axis) or low side.
Vec3 doorway_side_point(const Doorway& d, bool high_side, double offset);

/// True if `p` lies strictly inside any primitive.
bool inside_geometry(const SceneInstance& scene, Vec3 p);

}  // namespace camforge
