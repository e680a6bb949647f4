// SPDX-License-Identifier: Apache-2.0
#include "bvh.hpp"

#include <algorithm>
#include <numeric>

namespace camforge::detail {

namespace {

constexpr int kLeafSize = 4;

bool hits_box(const Ray& ray, const Aabb& box, double t_min, double t_max) {
  double t = 0.0;
  int axis = 0;
  int sign = 0;
  // Origin-inside counts as a hit for traversal purposes.
  if (box.contains(ray.origin)) return true;
  return intersect(ray, box, t_min, t_max, t, axis, sign);
}

}  // namespace

Bvh::Bvh(const std::vector<Primitive>& prims) : prims_(prims), order_(prims.size()) {
  std::iota(order_.begin(), order_.end(), 0);
  if (!prims.empty()) {
    nodes_.reserve(2 * prims.size());
    build(0, static_cast<int>(prims.size()));
  }
}

int Bvh::build(int first, int count) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Aabb box = prims_[static_cast<std::size_t>(order_[static_cast<std::size_t>(first)])].box;
  for (int i = 1; i < count; ++i)
    box.expand(prims_[static_cast<std::size_t>(order_[static_cast<std::size_t>(first + i)])].box);
  nodes_[static_cast<std::size_t>(index)].box = box;
  if (count <= kLeafSize) {
    nodes_[static_cast<std::size_t>(index)].first = first;
    nodes_[static_cast<std::size_t>(index)].count = count;
    return index;
  }
  const Vec3 size = box.size();
  const int axis = size.x >= size.y && size.x >= size.z ? 0 : (size.y >= size.z ? 1 : 2);
  const auto begin = order_.begin() + first;
  std::nth_element(begin, begin + count / 2, begin + count, [&](int a, int b) {
    const double ca = prims_[static_cast<std::size_t>(a)].box.center()[axis];
    const double cb = prims_[static_cast<std::size_t>(b)].box.center()[axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(first, count / 2);
  const int right = build(first + count / 2, count - count / 2);
  nodes_[static_cast<std::size_t>(index)].left = left;
  nodes_[static_cast<std::size_t>(index)].right = right;
  return index;
}

bool Bvh::closest(const Ray& ray, double t_min, double t_max, Hit& hit) const {
  if (nodes_.empty()) return false;
  bool found = false;
  double best = t_max;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (!hits_box(ray, node.box, t_min, best)) continue;
    if (node.left < 0) {
      for (int i = 0; i < node.count; ++i) {
        const int p = order_[static_cast<std::size_t>(node.first + i)];
        double t = 0.0;
        int axis = 0;
        int sign = 0;
        if (intersect(ray, prims_[static_cast<std::size_t>(p)].box, t_min, best, t, axis, sign)) {
          // Equal distances resolve to the lowest primitive index.
          if (t < best || (t == best && p < hit.primitive)) {
            best = t;
            hit = {t, p, axis, sign};
            found = true;
          }
        }
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return found;
}

bool Bvh::occluded(const Ray& ray, double t_min, double t_max) const {
  if (nodes_.empty()) return false;
  int stack[64];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[static_cast<std::size_t>(stack[--top])];
    if (!hits_box(ray, node.box, t_min, t_max)) continue;
    if (node.left < 0) {
      for (int i = 0; i < node.count; ++i) {
        const int p = order_[static_cast<std::size_t>(node.first + i)];
        double t = 0.0;
        int axis = 0;
        int sign = 0;
        if (intersect(ray, prims_[static_cast<std::size_t>(p)].box, t_min, t_max, t, axis, sign)) return true;
      }
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return false;
}

}  // namespace camforge::detail
