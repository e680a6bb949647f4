// SPDX-License-Identifier: Apache-2.0
#include "camforge/tasks/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "camforge/error.hpp"
#include "camforge/rng.hpp"

namespace camforge {

namespace {

struct PatternPair {
  std::int8_t x1, y1, x2, y2;
};

constexpr int kPatternRadius = 12;
constexpr int kOrientationRadius = 12;

// Fixed test-point pairs inside a disc, generated once from a constant seed.
constexpr std::array<PatternPair, 256> make_pattern(std::uint64_t seed) {
  std::array<PatternPair, 256> out{};
  std::uint64_t state = seed;
  auto next_coord = [&state]() {
    for (;;) {
      state = splitmix64(state);
      const int x = static_cast<int>(state % 25) - kPatternRadius;
      const int y = static_cast<int>((state >> 32) % 25) - kPatternRadius;
      if (x * x + y * y <= kPatternRadius * kPatternRadius)
        return std::array<int, 2>{x, y};
    }
  };
  for (auto& p : out) {
    std::array<int, 2> a{}, b{};
    do {
      a = next_coord();
      b = next_coord();
    } while (a[0] == b[0] && a[1] == b[1]);
    p = {static_cast<std::int8_t>(a[0]), static_cast<std::int8_t>(a[1]), static_cast<std::int8_t>(b[0]),
         static_cast<std::int8_t>(b[1])};
  }
  return out;
}

constexpr std::array<PatternPair, 256> kDescriptorPattern = make_pattern(0x5EED0F0B1A5ULL);

// Separable [1 4 6 4 1] / 16 blur with clamped borders.
ImageF binomial_blur(const ImageF& in) {
  constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = in.width(), h = in.height();
  ImageF tmp(w, h, 1), out(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * in.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = s;
    }
  return out;
}

ImageF harris_response(const ImageF& gray, double k) {
  const int w = gray.width(), h = gray.height();
  ImageF xx(w, h, 1), yy(w, h, 1), xy(w, h, 1);
  auto g = [&](int x, int y) { return gray.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1) - g(x - 1, y - 1) - 2 * g(x - 1, y) -
                         g(x - 1, y + 1)) / 8.0;
      const double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1) - g(x - 1, y - 1) - 2 * g(x, y - 1) -
                         g(x + 1, y - 1)) / 8.0;
      xx.at(x, y) = gx * gx;
      yy.at(x, y) = gy * gy;
      xy.at(x, y) = gx * gy;
    }
  const ImageF sxx = binomial_blur(xx), syy = binomial_blur(yy), sxy = binomial_blur(xy);
  ImageF r(w, h, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double a = sxx.at(x, y), b = syy.at(x, y), c = sxy.at(x, y);
      r.at(x, y) = a * b - c * c - k * (a + b) * (a + b);
    }
  return r;
}

double centroid_angle(const ImageF& img, int cx, int cy) {
  double m10 = 0.0, m01 = 0.0;
  for (int dy = -kOrientationRadius; dy <= kOrientationRadius; ++dy)
    for (int dx = -kOrientationRadius; dx <= kOrientationRadius; ++dx) {
      if (dx * dx + dy * dy > kOrientationRadius * kOrientationRadius) continue;
      const double v = img.at(cx + dx, cy + dy);
      m10 += dx * v;
      m01 += dy * v;
    }
  return std::atan2(m01, m10);
}

Descriptor describe(const ImageF& img, int cx, int cy, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const int w = img.width(), h = img.height();
  auto sample = [&](int px, int py) {
    const int x = cx + static_cast<int>(std::lround(c * px - s * py));
    const int y = cy + static_cast<int>(std::lround(s * px + c * py));
    return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
  };
  Descriptor d{};
  for (std::size_t i = 0; i < kDescriptorPattern.size(); ++i) {
    const auto& p = kDescriptorPattern[i];
    if (sample(p.x1, p.y1) < sample(p.x2, p.y2)) d[i / 64] |= std::uint64_t{1} << (i % 64);
  }
  return d;
}

// Indices of the best and second-best Hamming matches of `d` in `set`.
std::pair<int, int> two_nearest(const Descriptor& d, const std::vector<Descriptor>& set, int& best_dist,
                                int& second_dist) {
  int best = -1, second = -1;
  best_dist = second_dist = std::numeric_limits<int>::max();
  for (std::size_t j = 0; j < set.size(); ++j) {
    const int dist = hamming(d, set[j]);
    if (dist < best_dist) {
      second = best, second_dist = best_dist;
      best = static_cast<int>(j), best_dist = dist;
    } else if (dist < second_dist) {
      second = static_cast<int>(j), second_dist = dist;
    }
  }
  return {best, second};
}

double triangle_area2(std::array<double, 2> a, std::array<double, 2> b, std::array<double, 2> c) {
  return std::abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
}

bool has_collinear_triple(const std::array<std::array<double, 2>, 4>& p) {
  constexpr double kEps = 1e-6;
  return triangle_area2(p[0], p[1], p[2]) < kEps || triangle_area2(p[0], p[1], p[3]) < kEps ||
         triangle_area2(p[0], p[2], p[3]) < kEps || triangle_area2(p[1], p[2], p[3]) < kEps;
}

// Similarity taking the points to zero centroid and mean distance sqrt(2).
Eigen::Matrix3d normalizer(const std::array<std::array<double, 2>, 4>& p) {
  double mx = 0.0, my = 0.0;
  for (const auto& q : p) mx += q[0] / 4.0, my += q[1] / 4.0;
  double md = 0.0;
  for (const auto& q : p) md += std::hypot(q[0] - mx, q[1] - my) / 4.0;
  const double s = std::sqrt(2.0) / md;
  Eigen::Matrix3d t;
  t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return t;
}

}  // namespace

FeatureSet detect_corners(const ImageF& image, const CornerOptions& opt) {
  if (image.width() < kMinFeatureImageSize || image.height() < kMinFeatureImageSize) throw PreconditionError("feature detection needs at least 32x32");
  const ImageF gray = to_gray(image);
  const ImageF r = harris_response(gray, opt.harris_k);
  const int w = r.width(), h = r.height();

  double strongest = 0.0;
  for (int y = kFeatureBorder; y < h - kFeatureBorder; ++y)
    for (int x = kFeatureBorder; x < w - kFeatureBorder; ++x) strongest = std::max(strongest, r.at(x, y));
  const double threshold = std::max(opt.abs_threshold, opt.rel_threshold * strongest);

  struct Candidate {
    int x, y;
    double response;
  };
  std::vector<Candidate> cands;
  for (int y = kFeatureBorder; y < h - kFeatureBorder; ++y)
    for (int x = kFeatureBorder; x < w - kFeatureBorder; ++x) {
      const double v = r.at(x, y);
      if (v <= threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double n = r.at(x + dx, y + dy);
          // Plateaus keep only their first pixel in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (n > v || (earlier && n == v)) {
            is_max = false;
            break;
          }
        }
      if (is_max) cands.push_back({x, y, v});
    }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.response > b.response; });
  if (cands.size() > static_cast<std::size_t>(std::max(0, opt.max_n))) cands.resize(static_cast<std::size_t>(std::max(0, opt.max_n)));

  const ImageF smooth = binomial_blur(gray);
  FeatureSet out;
  out.keypoints.reserve(cands.size());
  out.descriptors.reserve(cands.size());
  for (const Candidate& c : cands) {
    const double angle = centroid_angle(smooth, c.x, c.y);
    out.keypoints.push_back({static_cast<double>(c.x), static_cast<double>(c.y), c.response, angle});
    out.descriptors.push_back(describe(smooth, c.x, c.y, angle));
  }
  return out;
}

FeatureSet detect_corners(const ImageF& image, int max_n) {
  CornerOptions opt;
  opt.max_n = max_n;
  return detect_corners(image, opt);
}

int hamming(const Descriptor& a, const Descriptor& b) noexcept {
  int n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] ^ b[i]);
  return n;
}

std::vector<Correspondence> match_features(const FeatureSet& f1, const FeatureSet& f2, double ratio) {
  std::vector<Correspondence> out;
  if (f1.empty() || f2.empty()) return out;
  std::vector<int> back(f2.size(), -1);
  std::vector<bool> back_ok(f2.size(), false);
  for (std::size_t j = 0; j < f2.size(); ++j) {
    int bd = 0, sd = 0;
    const auto [best, second] = two_nearest(f2.descriptors[j], f1.descriptors, bd, sd);
    back[j] = best;
    back_ok[j] = second < 0 || bd < ratio * sd;
  }
  for (std::size_t i = 0; i < f1.size(); ++i) {
    int bd = 0, sd = 0;
    const auto [best, second] = two_nearest(f1.descriptors[i], f2.descriptors, bd, sd);
    if (best < 0) continue;
    if (second >= 0 && !(bd < ratio * sd)) continue;
    const auto j = static_cast<std::size_t>(best);
    if (back[j] != static_cast<int>(i) || !back_ok[j]) continue;
    out.push_back({{f1.keypoints[i].x, f1.keypoints[i].y}, {f2.keypoints[j].x, f2.keypoints[j].y}});
  }
  return out;
}

bool homography_from_4(std::span<const Correspondence, 4> pts, Homography& out) {
  std::array<std::array<double, 2>, 4> a{}, b{};
  for (int i = 0; i < 4; ++i) a[i] = pts[i].a, b[i] = pts[i].b;
  if (has_collinear_triple(a) || has_collinear_triple(b)) return false;
  const Eigen::Matrix3d ta = normalizer(a), tb = normalizer(b);
  Eigen::Matrix<double, 8, 9> m;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = ta * Eigen::Vector3d(a[i][0], a[i][1], 1.0);
    const Eigen::Vector3d q = tb * Eigen::Vector3d(b[i][0], b[i][1], 1.0);
    m.row(2 * i) << -p.x(), -p.y(), -1, 0, 0, 0, q.x() * p.x(), q.x() * p.y(), q.x();
    m.row(2 * i + 1) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(), q.y() * p.y(), q.y();
  }
  const Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(m, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> v = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  Eigen::Matrix3d hm = tb.inverse() * hn * ta;
  if (!hm.allFinite()) return false;
  if (std::abs(hm(2, 2)) > 1e-12) hm /= hm(2, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(3 * r + c)] = hm(r, c);
  return true;
}

std::array<double, 2> apply_homography(const Homography& h, std::array<double, 2> p) {
  const double w = h[6] * p[0] + h[7] * p[1] + h[8];
  const double x = h[0] * p[0] + h[1] * p[1] + h[2];
  const double y = h[3] * p[0] + h[4] * p[1] + h[5];
  if (std::abs(w) < 1e-12) return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  return {x / w, y / w};
}

int ransac_inliers(std::span<const Correspondence> matches, const RansacOptions& opt) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) return 0;
  Rng rng(opt.seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const double thr2 = opt.inlier_px * opt.inlier_px;
  int best = 0;
  for (int it = 0; it < opt.iterations; ++it) {
    std::array<int, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      int c = 0;
      do c = pick(rng);
      while (std::find(idx.begin(), idx.begin() + k, c) != idx.begin() + k);
      idx[static_cast<std::size_t>(k)] = c;
    }
    const std::array<Correspondence, 4> sample = {matches[static_cast<std::size_t>(idx[0])],
                                                  matches[static_cast<std::size_t>(idx[1])],
                                                  matches[static_cast<std::size_t>(idx[2])],
                                                  matches[static_cast<std::size_t>(idx[3])]};
    Homography h{};
    if (!homography_from_4(std::span<const Correspondence, 4>(sample), h)) continue;
    int count = 0;
    for (const Correspondence& m : matches) {
      const auto p = apply_homography(h, m.a);
      const double dx = p[0] - m.b[0], dy = p[1] - m.b[1];
      if (dx * dx + dy * dy < thr2) ++count;
    }
    best = std::max(best, count);
    if (best == n) break;
  }
  return best;
}

MatchResult match_and_ransac(const FeatureSet& f1, const FeatureSet& f2, const RansacOptions& options, double ratio) {
  const auto matches = match_features(f1, f2, ratio);
  MatchResult r;
  r.n_total = static_cast<int>(matches.size());
  r.n_inlier = ransac_inliers(matches, options);
  return r;
}

void write_feature_overlay(const std::filesystem::path& path, const ImageF& image, const FeatureSet& features) {
  const ImageF gray = to_gray(image);
  ImageF rgb(gray.width(), gray.height(), 3);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x)
      for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = gray.at(x, y);
  for (const Keypoint& k : features.keypoints) {
    const int kx = static_cast<int>(k.x), ky = static_cast<int>(k.y);
    for (int d = -2; d <= 2; ++d)
      for (auto [x, y] : {std::pair{kx + d, ky}, std::pair{kx, ky + d}}) {
        if (x < 0 || y < 0 || x >= rgb.width() || y >= rgb.height()) continue;
        rgb.at(x, y, 0) = 1.0;
        rgb.at(x, y, 1) = 0.0;
        rgb.at(x, y, 2) = 0.0;
      }
  }
  write_ppm(path, rgb);
}

}  // namespace camforge
