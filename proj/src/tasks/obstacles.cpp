// SPDX-License-Identifier: Apache-2.0
#include "camforge/tasks/obstacles.hpp"

#include <algorithm>
#include <functional>
#include <vector>

#include "camforge/error.hpp"

namespace camforge {

namespace {

int instance_of(const SceneInstance& scene, int obstacle) {
  if (obstacle < 0 || obstacle >= static_cast<int>(scene.obstacles.size()))
    throw PreconditionError("path refers to an obstacle the scene does not have");
  return scene.obstacles[static_cast<std::size_t>(obstacle)].instance_id;
}

// Walks the path; `pixels(step, id)` returns how many pixels of `id` step shows.
ObstacleReport count_crossings(const AgentPath& path, const SceneInstance& scene, int min_px,
                               const std::function<int(std::size_t, int)>& pixels) {
  ObstacleReport r;
  std::vector<std::size_t> window_start(scene.obstacles.size(), 0);
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const int o = path.steps[k].crossed_obstacle;
    if (o < 0) continue;
    const int id = instance_of(scene, o);
    ++r.o_total;
    for (std::size_t j = window_start[static_cast<std::size_t>(o)]; j < k; ++j)
      if (pixels(j, id) >= min_px) {
        ++r.o_seen;
        break;
      }
    window_start[static_cast<std::size_t>(o)] = k + 1;
  }
  return r;
}

int count_id(const ImageI& map, int id) {
  const auto d = map.data();
  return static_cast<int>(std::count(d.begin(), d.end(), id));
}

}  // namespace

ObstacleReport obstacle_visibility(std::span<const ImageI> instance_maps, const AgentPath& path,
                                   const SceneInstance& scene, int min_px) {
  if (instance_maps.size() != path.steps.size())
    throw PreconditionError("one instance map per path step is required");
  return count_crossings(path, scene, min_px,
                         [&](std::size_t j, int id) { return count_id(instance_maps[j], id); });
}

ObstacleReport obstacle_visibility(const SceneInstance& scene, const AgentPath& path, const CameraDesign& design,
                                   const RenderOptions& options, int min_px) {
  // Labels are rendered lazily and at most once per step.
  std::vector<ImageI> cache(path.steps.size());
  return count_crossings(path, scene, min_px, [&](std::size_t j, int id) {
    if (cache[j].empty())
      cache[j] = render_labels(scene, pose_from_step(path.steps[j], design), design, options).instance;
    return count_id(cache[j], id);
  });
}

}  // namespace camforge
