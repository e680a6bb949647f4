// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "camforge/geometry.hpp"
#include "camforge/scene.hpp"

namespace camforge::detail {

struct Hit {
  double t = 0.0;
  int primitive = -1;
  int axis = 0;
  int sign = 0;
};

/// Median-split bounding volume hierarchy over scene primitives.
class Bvh {
 public:
  explicit Bvh(const std::vector<Primitive>& prims);

  bool closest(const Ray& ray, double t_min, double t_max, Hit& hit) const;
  bool occluded(const Ray& ray, double t_min, double t_max) const;

 private:
  struct Node {
    Aabb box;
    int left = -1;   // child index, or -1 for a leaf
    int right = -1;
    int first = 0;   // leaf range in order_
    int count = 0;
  };

  int build(int first, int count);

  const std::vector<Primitive>& prims_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

}  // namespace camforge::detail
