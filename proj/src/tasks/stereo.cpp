// SPDX-License-Identifier: Apache-2.0
#include "camforge/tasks/stereo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "camforge/error.hpp"

namespace camforge {

namespace {

constexpr float kNoCost = std::numeric_limits<float>::infinity();

}  // namespace

DisparityMap block_match(const ImageF& left, const ImageF& right, const BlockMatchOptions& opt) {
  if (!left.same_shape(right)) throw ImagesMismatch("left and right images differ in shape");
  if (opt.window < 3 || opt.window % 2 == 0) throw PreconditionError("window must be odd and >= 3");
  if (opt.d_max < 0) throw PreconditionError("d_max must be non-negative");
  const int w = left.width();
  const int h = left.height();
  const int ch = left.channels();
  const int r = opt.window / 2;
  const int n_disp = std::min(opt.d_max, w - 1) + 1;
  const auto n_px = static_cast<std::size_t>(w) * h;

  // cost[d * n_px + y * w + x]: SAD over the (row-clipped) window.
  std::vector<float> cost(static_cast<std::size_t>(n_disp) * n_px, kNoCost);
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1));
  auto I = [&](int x, int y) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int d = 0; d < n_disp; ++d) {
    for (int y = 0; y < h; ++y) {
      double row = 0.0;
      for (int x = 0; x < w; ++x) {
        double ad = 0.0;
        if (x >= d)
          for (int c = 0; c < ch; ++c) ad += std::abs(left.at(x, y, c) - right.at(x - d, y, c));
        row += ad;
        I(x + 1, y + 1) = I(x + 1, y) + row;
      }
    }
    float* plane = cost.data() + static_cast<std::size_t>(d) * n_px;
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - r);
      const int y1 = std::min(h - 1, y + r);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - r);
        const int x1 = std::min(w - 1, x + r);
        if (x0 < d) continue;  // window would sample outside the right image
        plane[static_cast<std::size_t>(y) * w + x] =
            static_cast<float>(I(x1 + 1, y1 + 1) - I(x0, y1 + 1) - I(x1 + 1, y0) + I(x0, y0));
      }
    }
  }

  auto negative_cost = [&](int x, int y) -> double {
    const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
    if (x1 + 1 >= w) return kNoCost;
    double c = 0.0;
    for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
      for (int xx = x0; xx <= x1; ++xx)
        for (int k = 0; k < ch; ++k) c += std::abs(left.at(xx, yy, k) - right.at(xx + 1, yy, k));
    return static_cast<float>(c);
  };

  DisparityMap out{ImageF(w, h, 1, 0.0), Mask(w, h, 1, 0)};
  auto C = [&](int d, int x, int y) { return cost[static_cast<std::size_t>(d) * n_px + static_cast<std::size_t>(y) * w + x]; };
  std::vector<int> best_left(n_px, -1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = -1;
      float best_c = kNoCost;
      for (int d = 0; d < n_disp; ++d)
        if (C(d, x, y) < best_c) {
          best_c = C(d, x, y);
          best = d;
        }
      if (best < 0) continue;
      // Runner-up away from the minimum's immediate neighbors; without one the
      // match cannot be shown to be unique.
      float second = kNoCost;
      for (int d = 0; d < n_disp; ++d)
        if (std::abs(d - best) > 1) second = std::min(second, C(d, x, y));
      const double tol = opt.uniqueness * best_c + 1e-12;
      if (second == kNoCost || second - best_c <= tol) continue;
      double disp = best;
      // At d = 0 the left neighbor of the minimum is the cost at d = -1.
      const double cm = best > 0 ? C(best - 1, x, y) : negative_cost(x, y);
      // A zero-cost match is exact and needs no refinement.
      if (best_c > 0.0f && best + 1 < n_disp && cm != kNoCost && C(best + 1, x, y) != kNoCost) {
        const double cp = C(best + 1, x, y);
        // Equiangular (V) fit: SAD grows linearly away from the true shift.
        const double denom = 2.0 * (std::max(cm, cp) - best_c);
        if (denom > 0.0) disp = std::max(0.0, disp + std::clamp((cm - cp) / denom, -0.5, 0.5));
      }
      out.disparity.at(x, y) = disp;
      out.valid.at(x, y) = 1;
      best_left[static_cast<std::size_t>(y) * w + x] = best;
    }
  }

  if (opt.left_right_check) {
    for (int y = 0; y < h; ++y) {
      // Right-view winner for each right column, from the same cost volume.
      std::vector<int> best_right(static_cast<std::size_t>(w), -1);
      for (int xr = 0; xr < w; ++xr) {
        float bc = kNoCost;
        for (int d = 0; d < n_disp && xr + d < w; ++d)
          if (C(d, xr + d, y) < bc) {
            bc = C(d, xr + d, y);
            best_right[static_cast<std::size_t>(xr)] = d;
          }
      }
      for (int x = 0; x < w; ++x) {
        if (!out.valid.at(x, y)) continue;
        const int xr = x - static_cast<int>(std::lround(out.disparity.at(x, y)));
        const int dr = xr >= 0 ? best_right[static_cast<std::size_t>(xr)] : -1;
        if (dr < 0 || std::abs(out.disparity.at(x, y) - dr) > 1.0) {
          out.valid.at(x, y) = 0;
          out.disparity.at(x, y) = 0.0;
        }
      }
    }
  }
  return out;
}

DisparityMap block_match(const ImageF& left, const ImageF& right, int d_max, int window) {
  BlockMatchOptions opt;
  opt.d_max = d_max;
  opt.window = window;
  return block_match(left, right, opt);
}

DisparityMap fill_invalid(const DisparityMap& map) {
  DisparityMap out = map;
  const int w = map.disparity.width();
  for (int y = 0; y < map.disparity.height(); ++y) {
    int last_valid = -1;
    for (int x = 0; x < w; ++x) {
      if (map.valid.at(x, y)) {
        last_valid = x;
        continue;
      }
      int next = x + 1;
      while (next < w && !map.valid.at(next, y)) ++next;
      const bool has_left = last_valid >= 0;
      const bool has_right = next < w;
      double v = 0.0;
      if (has_left && has_right)
        v = std::min(map.disparity.at(last_valid, y), map.disparity.at(next, y));
      else if (has_left)
        v = map.disparity.at(last_valid, y);
      else if (has_right)
        v = map.disparity.at(next, y);
      for (int k = x; k < next; ++k) out.disparity.at(k, y) = v;
      x = next - 1;
    }
  }
  return out;
}

ImageF disparity_to_depth(const ImageF& disparity, double f_px, double baseline_m) {
  ImageF out(disparity.width(), disparity.height(), 1, kMaxDepthM);
  const double fb = f_px * baseline_m;
  auto src = disparity.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] > 0.0) dst[i] = std::min(kMaxDepthM, fb / src[i]);
  return out;
}

void DepthMetricsAccumulator::add(const ImageF& pred, const ImageF& gt, const Mask* mask) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    throw ImagesMismatch("prediction and ground truth differ in size");
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      const double z = gt.at(x, y);
      const double zh = pred.at(x, y);
      if (!std::isfinite(z) || !(z > 0.0) || !(zh > 0.0)) continue;
      if (mask != nullptr && !mask->at(x, y)) continue;
      sum_log_ += std::abs(std::log(zh) - std::log(z));
      sum_sq_ += (zh - z) * (zh - z);
      ++n_;
    }
}

DepthMetrics DepthMetricsAccumulator::result() const {
  if (n_ == 0) return {};
  return {sum_log_ / static_cast<double>(n_), std::sqrt(sum_sq_ / static_cast<double>(n_)), n_};
}

DepthMetrics depth_metrics(const ImageF& pred, const ImageF& gt, const Mask* mask) {
  DepthMetricsAccumulator acc;
  acc.add(pred, gt, mask);
  return acc.result();
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) { return std::clamp(x, -1.0, 1.0); }

DisparityMap refine_disparity(const DisparityRefiner& model, const DisparityMap& raw) {
  DisparityMap out = raw;
  for (double& d : out.disparity.data()) d = std::max(0.0, model.alpha * d + model.beta);
  return out;
}

void collect_refiner_samples(const DisparityMap& raw, const ImageF& gt_disparity, const Mask& gt_mask,
                             RefinerSample& out) {
  for (int y = 0; y < raw.disparity.height(); ++y)
    for (int x = 0; x < raw.disparity.width(); ++x) {
      const double g = gt_disparity.at(x, y);
      if (!raw.valid.at(x, y) || !gt_mask.at(x, y) || !(g > 0.0)) continue;
      out.raw.push_back(raw.disparity.at(x, y));
      out.gt.push_back(g);
    }
}

double refiner_loss(const DisparityRefiner& m, const RefinerSample& batch) {
  if (batch.raw.empty()) throw EmptyBatch("refiner batch has no gated pixels");
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.raw.size(); ++i)
    loss += smooth_l1((m.alpha * batch.raw[i] + m.beta - batch.gt[i]) / batch.gt[i]);
  return loss / static_cast<double>(batch.raw.size());
}

double refiner_train_step(DisparityRefiner& m, const RefinerSample& batch, double lr) {
  if (batch.raw.empty()) throw EmptyBatch("refiner batch has no gated pixels");
  double loss = 0.0, ga = 0.0, gb = 0.0;
  for (std::size_t i = 0; i < batch.raw.size(); ++i) {
    const double g = batch.gt[i];
    const double res = (m.alpha * batch.raw[i] + m.beta - g) / g;
    loss += smooth_l1(res);
    const double s = smooth_l1_grad(res) / g;
    ga += s * batch.raw[i];
    gb += s;
  }
  const double n = static_cast<double>(batch.raw.size());
  m.alpha -= lr * ga / n;
  m.beta -= lr * gb / n;
  return loss / n;
}

}  // namespace camforge
