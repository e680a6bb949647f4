// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "camforge/error.hpp"
#include "camforge/rng.hpp"
#include "camforge/scene.hpp"

namespace camforge {

namespace {

constexpr double kDoorApproach = 0.7;

struct Waypoint {
  Vec3 p;           // z unused
  int door = -1;    // set on the far-side point of a doorway traversal
  bool leg_start = false;
};

double yaw_of(Vec3 from, Vec3 to) { return rad2deg(std::atan2(to.x - from.x, to.y - from.y)); }

double wrap180(double a) {
  while (a > 180.0) a -= 360.0;
  while (a <= -180.0) a += 360.0;
  return a;
}

/// Depth-first tour over the room graph, returning to the start room.
void dfs_tour(const SceneInstance& scene, int room, std::vector<bool>& seen, Rng& rng,
              std::vector<Waypoint>& out) {
  seen[static_cast<std::size_t>(room)] = true;
  std::vector<int> doors;
  for (std::size_t i = 0; i < scene.doorways.size(); ++i) {
    const Doorway& d = scene.doorways[i];
    if (d.room_a == room || d.room_b == room) doors.push_back(static_cast<int>(i));
  }
  std::shuffle(doors.begin(), doors.end(), rng);
  for (int di : doors) {
    const Doorway& d = scene.doorways[static_cast<std::size_t>(di)];
    const int next = d.room_a == room ? d.room_b : d.room_a;
    if (next < 0 || seen[static_cast<std::size_t>(next)]) continue;
    const bool here_high = d.room_b == room;
    out.push_back({doorway_side_point(d, here_high, kDoorApproach), -1, false});
    out.push_back({doorway_side_point(d, !here_high, kDoorApproach), di, false});
    out.push_back({scene.rooms[static_cast<std::size_t>(next)].center(), -1, true});
    dfs_tour(scene, next, seen, rng, out);
    out.push_back({doorway_side_point(d, !here_high, kDoorApproach), -1, false});
    out.push_back({doorway_side_point(d, here_high, kDoorApproach), di, false});
    out.push_back({scene.rooms[static_cast<std::size_t>(room)].center(), -1, true});
  }
}

AgentPath plan_indoor(const SceneInstance& scene, int n_steps, std::uint64_t seed,
                      const PathOptions& opt) {
  Rng rng(derive_seed(seed, Purpose::kPath, {0}));
  AgentPath path;
  Vec3 pos = scene.rooms.front().center();
  double height = uniform(rng, opt.min_height_m, opt.max_height_m);
  double yaw = 0.0;
  bool have_yaw = false;

  auto emit = [&](int approaching, int crossed) {
    PathStep s;
    s.position = {pos.x, pos.y, height};
    s.yaw_deg = yaw;
    s.camera_height_m = height;
    s.approaching_obstacle = approaching;
    s.crossed_obstacle = crossed;
    path.steps.push_back(s);
    return static_cast<int>(path.steps.size()) >= n_steps;
  };

  while (true) {
    std::vector<Waypoint> tour;
    std::vector<bool> seen(scene.rooms.size(), false);
    dfs_tour(scene, 0, seen, rng, tour);
    if (tour.empty()) {
      // Single room: pace between opposite corners of a shrunken rectangle.
      const Room& r = scene.rooms.front();
      tour.push_back({{r.x0 + 1.0, r.y0 + 1.0, 0}, -1, true});
      tour.push_back({r.center(), -1, false});
    }
    for (std::size_t wi = 0; wi < tour.size(); ++wi) {
      const Waypoint& wp = tour[wi];
      if (wp.leg_start) height = uniform(rng, opt.min_height_m, opt.max_height_m);
      const double seg_len = std::hypot(wp.p.x - pos.x, wp.p.y - pos.y);
      if (seg_len < 1e-9) continue;
      // The doorway crossed at the end of this segment or the next one.
      int upcoming = wp.door;
      if (upcoming < 0 && wi + 1 < tour.size()) upcoming = tour[wi + 1].door;
      const Doorway* door = upcoming >= 0 ? &scene.doorways[static_cast<std::size_t>(upcoming)] : nullptr;
      auto near_door = [&] {
        return door != nullptr && std::hypot(pos.x - door->x, pos.y - door->y) <= opt.approach_window_m;
      };

      const double target_yaw = yaw_of(pos, wp.p);
      if (!have_yaw) {
        yaw = target_yaw;
        have_yaw = true;
      }
      // Turn in place, bounded by the turn rate.
      while (std::abs(wrap180(target_yaw - yaw)) > 1e-9) {
        const double delta = std::clamp(wrap180(target_yaw - yaw), -opt.turn_rate_deg, opt.turn_rate_deg);
        yaw = wrap180(yaw + delta);
        if (emit(near_door() ? upcoming : -1, -1)) return path;
      }
      const Vec3 start = pos;
      const int n = std::max(1, static_cast<int>(std::ceil(seg_len / opt.step_length_m - 1e-9)));
      bool crossed = false;
      for (int i = 1; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        pos = {start.x + t * (wp.p.x - start.x), start.y + t * (wp.p.y - start.y), 0};
        int approaching = -1;
        int crossing = -1;
        if (wp.door >= 0) {
          // One obstacle per doorway, sharing its index.
          const double before = door->wall_axis == 0 ? (start.x - door->x) : (start.y - door->y);
          const double now = door->wall_axis == 0 ? (pos.x - door->x) : (pos.y - door->y);
          if (!crossed && before * now <= 0.0) {
            crossing = upcoming;
            crossed = true;
          } else if (!crossed && near_door()) {
            approaching = upcoming;
          }
        } else if (near_door()) {
          approaching = upcoming;
        }
        if (emit(approaching, crossing)) return path;
      }
    }
  }
}

}  // namespace

AgentPath plan_path(const SceneInstance& scene, int n_steps, std::uint64_t seed,
                    const PathOptions& options) {
  if (n_steps < 1) throw PreconditionError("plan_path needs n_steps >= 1");
  if (scene.primitives.empty()) throw EmptyScene("scene has no geometry");
  switch (scene.kind) {
    case SceneKind::kIndoor:
      if (scene.rooms.empty()) throw EmptyScene("indoor scene has no rooms");
      return plan_indoor(scene, n_steps, seed, options);
    case SceneKind::kOutdoorStrip: {
      AgentPath path;
      for (int i = 0; i < n_steps; ++i) {
        PathStep s;
        s.position = {0.0, i * options.step_length_m, options.outdoor_height_m};
        s.camera_height_m = options.outdoor_height_m;
        path.steps.push_back(s);
      }
      return path;
    }
    case SceneKind::kColorbar: {
      AgentPath path;
      path.steps.assign(static_cast<std::size_t>(n_steps), PathStep{});
      return path;
    }
  }
  throw EmptyScene("unknown scene kind");
}

}  // namespace camforge
