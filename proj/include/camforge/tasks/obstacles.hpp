// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "camforge/camera.hpp"
#include "camforge/scene.hpp"

namespace camforge {

struct ObstacleReport {
  int o_seen = 0;
  int o_total = 0;
  /// Fraction of crossings that were seen beforehand; 1 when nothing was crossed.
  double ratio() const noexcept { return o_total > 0 ? static_cast<double>(o_seen) / o_total : 1.0; }
  friend bool operator==(const ObstacleReport&, const ObstacleReport&) = default;
};

inline constexpr int kDefaultObstacleMinPx = 25;

/// Every crossing step of the path is one event. It counts as seen when at
/// least `min_px` pixels of the obstacle's instance id appear in some frame
/// after the previous crossing of the same obstacle and before this one.
/// `instance_maps[i]` belongs to path step i; throws PreconditionError on a
/// length mismatch.
ObstacleReport obstacle_visibility(std::span<const ImageI> instance_maps, const AgentPath& path,
                                   const SceneInstance& scene, int min_px = kDefaultObstacleMinPx);

/// Renders label maps for the steps that can contribute and applies the rule above.
ObstacleReport obstacle_visibility(const SceneInstance& scene, const AgentPath& path, const CameraDesign& design,
                                   const RenderOptions& options, int min_px = kDefaultObstacleMinPx);

}  // namespace camforge
