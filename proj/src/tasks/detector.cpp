// SPDX-License-Identifier: Apache-2.0
#include "camforge/tasks/detector.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "camforge/error.hpp"
#include "text_io.hpp"

namespace camforge {

namespace {

// Summed-area table layout.
enum Table : int {
  kHist0 = 0,
  kGrad0 = kHistogramBins,
  kRed = kGrad0 + kOrientationBins,
  kGreen,
  kBlue,
  kTableCount,
};

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// ln(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double iou(const Box2D& a, const Box2D& b) noexcept {
  const Box2D inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const double i = inter.x1 > inter.x0 && inter.y1 > inter.y0 ? inter.area() : 0.0;
  const double u = a.area() + b.area() - i;
  return u > 0.0 ? i / u : 0.0;
}

std::vector<GtBox2D> gt_boxes_2d(const Frame& frame, const SceneInstance& scene, int min_px, int image) {
  struct Extent {
    int x0 = 1 << 30, y0 = 1 << 30, x1 = -1, y1 = -1, n = 0;
  };
  std::unordered_map<int, std::size_t> index;
  for (std::size_t k = 0; k < scene.gt_boxes.size(); ++k) index.emplace(scene.gt_boxes[k].instance_id, k);
  std::vector<Extent> ext(scene.gt_boxes.size());
  for (int y = 0; y < frame.instance.height(); ++y)
    for (int x = 0; x < frame.instance.width(); ++x) {
      const auto it = index.find(frame.instance.at(x, y));
      if (it == index.end()) continue;
      Extent& e = ext[it->second];
      e.x0 = std::min(e.x0, x), e.y0 = std::min(e.y0, y);
      e.x1 = std::max(e.x1, x), e.y1 = std::max(e.y1, y);
      ++e.n;
    }
  std::vector<GtBox2D> out;
  for (std::size_t k = 0; k < ext.size(); ++k) {
    const Extent& e = ext[k];
    if (e.n == 0 || e.n < min_px) continue;
    out.push_back({{static_cast<double>(e.x0), static_cast<double>(e.y0), e.x1 + 1.0, e.y1 + 1.0},
                   scene.gt_boxes[k].class_id,
                   image});
  }
  return out;
}

WindowFeatures::WindowFeatures(const ImageF& img) : width_(img.width()), height_(img.height()) {
  const ImageF y = to_gray(img);
  const auto yd = y.data();
  frame_mean_ = yd.empty() ? 0.0 : std::accumulate(yd.begin(), yd.end(), 0.0) / static_cast<double>(yd.size());
  const double hist_hi = std::max(2.0 * frame_mean_, 1e-9);
  const std::size_t stride = static_cast<std::size_t>(width_) + 1;
  tables_.assign(kTableCount, std::vector<double>(stride * (static_cast<std::size_t>(height_) + 1), 0.0));
  std::array<double, kTableCount> v{};
  for (int r = 0; r < height_; ++r) {
    std::array<double, kTableCount> run{};
    for (int c = 0; c < width_; ++c) {
      v.fill(0.0);
      const double l = y.at(c, r);
      const int bin = std::clamp(static_cast<int>(l / hist_hi * kHistogramBins), 0, kHistogramBins - 1);
      v[static_cast<std::size_t>(kHist0 + bin)] = 1.0;
      const double gx = 0.5 * (y.at(std::min(c + 1, width_ - 1), r) - y.at(std::max(c - 1, 0), r));
      const double gy = 0.5 * (y.at(c, std::min(r + 1, height_ - 1)) - y.at(c, std::max(r - 1, 0)));
      const double mag = std::hypot(gx, gy);
      if (mag > 0.0) {
        double theta = std::atan2(gy, gx);
        if (theta < 0.0) theta += std::numbers::pi;
        const int ob = std::clamp(static_cast<int>(theta / std::numbers::pi * kOrientationBins), 0,
                                  kOrientationBins - 1);
        v[static_cast<std::size_t>(kGrad0 + ob)] = mag;
      }
      for (int ch = 0; ch < 3; ++ch) v[static_cast<std::size_t>(kRed + ch)] = img.at(c, r, img.channels() == 3 ? ch : 0);
      for (int t = 0; t < kTableCount; ++t) {
        run[static_cast<std::size_t>(t)] += v[static_cast<std::size_t>(t)];
        auto& tab = tables_[static_cast<std::size_t>(t)];
        tab[(r + 1) * stride + c + 1] = tab[r * stride + c + 1] + run[static_cast<std::size_t>(t)];
      }
    }
  }
}

double WindowFeatures::sum(int table, int x0, int y0, int x1, int y1) const {
  const auto& t = tables_[static_cast<std::size_t>(table)];
  const std::size_t s = static_cast<std::size_t>(width_) + 1;
  return t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0];
}

WindowDescriptor WindowFeatures::describe(const Box2D& box) const {
  const int x0 = std::clamp(static_cast<int>(std::lround(box.x0)), 0, width_);
  const int y0 = std::clamp(static_cast<int>(std::lround(box.y0)), 0, height_);
  const int x1 = std::clamp(static_cast<int>(std::lround(box.x1)), x0, width_);
  const int y1 = std::clamp(static_cast<int>(std::lround(box.y1)), y0, height_);
  WindowDescriptor d{};
  const double area = static_cast<double>(x1 - x0) * (y1 - y0);
  if (area <= 0.0) return d;
  for (int k = 0; k < kHistogramBins; ++k) d[static_cast<std::size_t>(k)] = sum(kHist0 + k, x0, y0, x1, y1) / area;
  const double norm = 1.0 / (frame_mean_ + 1e-6);
  for (int k = 0; k < kOrientationBins; ++k)
    d[static_cast<std::size_t>(kHistogramBins + k)] = sum(kGrad0 + k, x0, y0, x1, y1) / area * norm;
  std::array<double, 3> rgb{};
  for (int ch = 0; ch < 3; ++ch) rgb[static_cast<std::size_t>(ch)] = sum(kRed + ch, x0, y0, x1, y1) / area;
  const double grey = (rgb[0] + rgb[1] + rgb[2]) / 3.0 + 1e-3;
  for (int ch = 0; ch < 3; ++ch)
    d[static_cast<std::size_t>(kHistogramBins + kOrientationBins + ch)] = rgb[static_cast<std::size_t>(ch)] / grey - 1.0;

  const double gw = 0.25 * (x1 - x0), gh = 0.25 * (y1 - y0);
  const int ox0 = std::clamp(static_cast<int>(std::lround(x0 - gw)), 0, width_);
  const int oy0 = std::clamp(static_cast<int>(std::lround(y0 - gh)), 0, height_);
  const int ox1 = std::clamp(static_cast<int>(std::lround(x1 + gw)), 0, width_);
  const int oy1 = std::clamp(static_cast<int>(std::lround(y1 + gh)), 0, height_);
  const double ring_area = static_cast<double>(ox1 - ox0) * (oy1 - oy0) - area;
  if (ring_area > 0.0)
    for (int ch = 0; ch < 3; ++ch) {
      const double ring = (sum(kRed + ch, ox0, oy0, ox1, oy1) - rgb[static_cast<std::size_t>(ch)] * area) / ring_area;
      d[static_cast<std::size_t>(kHistogramBins + kOrientationBins + 3 + ch)] =
          (rgb[static_cast<std::size_t>(ch)] - ring) * norm;
    }
  return d;
}

std::vector<Box2D> sliding_windows(int width, int height, const WindowGrid& grid) {
  std::vector<Box2D> out;
  for (double s : grid.scales)
    for (double a : grid.aspects) {
      const double h = std::min(s * height, static_cast<double>(height));
      const double w = std::min(a * h, static_cast<double>(width));
      if (h < 2.0 || w < 2.0) continue;
      const double step = std::max(1.0, grid.stride_fraction * std::min(w, h));
      for (double y = 0.0; y + h <= height + 1e-9; y += step)
        for (double x = 0.0; x + w <= width + 1e-9; x += step) out.push_back({x, y, x + w, y + h});
    }
  return out;
}

DetectorModel::DetectorModel(int n)
    : n_classes(n), weights(static_cast<std::size_t>(n) * kDescriptorLength, 0.0), bias(static_cast<std::size_t>(n), 0.0) {
  if (n <= 0) throw PreconditionError("detector needs at least one class");
}

double DetectorModel::logit(int c, const WindowDescriptor& x) const {
  const double* w = weights.data() + static_cast<std::size_t>(c) * kDescriptorLength;
  double z = bias[static_cast<std::size_t>(c)];
  for (int k = 0; k < kDescriptorLength; ++k) z += w[k] * x[static_cast<std::size_t>(k)];
  return z;
}

bool DetectorModel::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  return std::all_of(weights.begin(), weights.end(), ok) && std::all_of(bias.begin(), bias.end(), ok);
}

void append_training_windows(const ImageF& exposed, std::span<const GtBox2D> gts, DetectorBatch& out,
                             const WindowGrid& grid) {
  const WindowFeatures feats(exposed);
  for (const Box2D& w : sliding_windows(exposed.width(), exposed.height(), grid)) {
    int label = 0;
    double best = 0.5;
    for (const GtBox2D& g : gts) {
      const double o = iou(w, g.box);
      if (o >= best) {
        best = o;
        label = g.class_id;
      }
    }
    out.x.push_back(feats.describe(w));
    out.label.push_back(label);
  }
}

double detector_loss(const DetectorModel& m, const DetectorBatch& b) {
  if (b.empty()) throw EmptyBatch("detector batch is empty");
  double loss = 0.0;
  for (std::size_t i = 0; i < b.x.size(); ++i)
    for (int c = 0; c < m.n_classes; ++c) {
      const double z = m.logit(c, b.x[i]);
      loss += softplus(z) - (b.label[i] == c + 1 ? z : 0.0);
    }
  return loss / (static_cast<double>(b.x.size()) * m.n_classes);
}

DetectorModel detector_gradient(const DetectorModel& m, const DetectorBatch& b) {
  if (b.empty()) throw EmptyBatch("detector batch is empty");
  DetectorModel g(m.n_classes);
  const double scale = 1.0 / (static_cast<double>(b.x.size()) * m.n_classes);
  for (std::size_t i = 0; i < b.x.size(); ++i)
    for (int c = 0; c < m.n_classes; ++c) {
      const double r = (sigmoid(m.logit(c, b.x[i])) - (b.label[i] == c + 1 ? 1.0 : 0.0)) * scale;
      double* w = g.weights.data() + static_cast<std::size_t>(c) * kDescriptorLength;
      for (int k = 0; k < kDescriptorLength; ++k) w[k] += r * b.x[i][static_cast<std::size_t>(k)];
      g.bias[static_cast<std::size_t>(c)] += r;
    }
  return g;
}

double detector_train_step(DetectorModel& m, const DetectorBatch& b, double lr) {
  const double loss = detector_loss(m, b);
  const DetectorModel g = detector_gradient(m, b);
  for (std::size_t k = 0; k < m.weights.size(); ++k) m.weights[k] -= lr * g.weights[k];
  for (std::size_t k = 0; k < m.bias.size(); ++k) m.bias[k] -= lr * g.bias[k];
  return loss;
}

double detector_train_step(DetectorModel& m, const ImageF& exposed, std::span<const GtBox2D> gts, double lr) {
  DetectorBatch b;
  append_training_windows(exposed, gts, b);
  return detector_train_step(m, b, lr);
}

std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> keep;
  for (const Detection& d : dets) {
    bool suppressed = false;
    for (const Detection& k : keep)
      if (k.class_id == d.class_id && k.image == d.image && iou(k.box, d.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) keep.push_back(d);
  }
  return keep;
}

std::vector<Detection> detector_infer(const DetectorModel& m, const ImageF& exposed, const InferenceOptions& opt,
                                      int image, const WindowGrid& grid) {
  const WindowFeatures feats(exposed);
  const auto windows = sliding_windows(exposed.width(), exposed.height(), grid);
  std::vector<Detection> out;
  for (int c = 0; c < m.n_classes; ++c) {
    std::vector<Detection> cls;
    for (const Box2D& w : windows) {
      const double s = sigmoid(m.logit(c, feats.describe(w)));
      if (s >= opt.score_threshold) cls.push_back({w, c + 1, s, image});
    }
    cls = non_max_suppression(std::move(cls), opt.nms_iou);
    if (cls.size() > static_cast<std::size_t>(opt.max_per_class)) cls.resize(static_cast<std::size_t>(opt.max_per_class));
    out.insert(out.end(), cls.begin(), cls.end());
  }
  return out;
}

double average_precision(std::span<const Detection> dets, std::span<const GtBox2D> gts, double thr) {
  std::vector<int> classes;
  for (const GtBox2D& g : gts) classes.push_back(g.class_id);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.empty()) return 0.0;

  double total = 0.0;
  for (int c : classes) {
    std::vector<const GtBox2D*> cg;
    for (const GtBox2D& g : gts)
      if (g.class_id == c) cg.push_back(&g);
    std::vector<const Detection*> cd;
    for (const Detection& d : dets)
      if (d.class_id == c) cd.push_back(&d);
    std::stable_sort(cd.begin(), cd.end(), [](const Detection* a, const Detection* b) { return a->score > b->score; });

    std::vector<bool> used(cg.size(), false);
    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const Detection* d : cd) {
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t k = 0; k < cg.size(); ++k) {
        if (cg[k]->image != d->image) continue;
        const double o = iou(d->box, cg[k]->box);
        if (o > best_iou) best_iou = o, best = static_cast<int>(k);
      }
      if (best >= 0 && best_iou >= thr && !used[static_cast<std::size_t>(best)]) {
        used[static_cast<std::size_t>(best)] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(cg.size()));
    }
    // All-point interpolation: precision envelope integrated over recall.
    for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < recall.size(); ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    total += ap;
  }
  return total / static_cast<double>(classes.size());
}

void save_detector(const DetectorModel& m, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  os << "class_id,bias";
  for (int k = 0; k < kDescriptorLength; ++k) os << ",w" << k;
  os << '\n';
  for (int c = 0; c < m.n_classes; ++c) {
    os << fmt::format("{},{:.17g}", c + 1, m.bias[static_cast<std::size_t>(c)]);
    for (int k = 0; k < kDescriptorLength; ++k)
      os << fmt::format(",{:.17g}", m.weights[static_cast<std::size_t>(c) * kDescriptorLength + k]);
    os << '\n';
  }
}

DetectorModel load_detector(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("detector file not found: " + path.string());
  const auto rows = detail::read_csv_rows(path);
  if (rows.empty() || rows.front().cells.size() != 2 + kDescriptorLength || rows.front().cells[0] != "class_id")
    throw ParseError("unexpected detector header", rows.empty() ? 1 : rows.front().line);
  DetectorModel m(static_cast<int>(rows.size() - 1));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    double id = 0.0;
    if (row.cells.size() != 2 + kDescriptorLength || !detail::parse_double(row.cells[0], id) ||
        static_cast<std::size_t>(id) != r)
      throw ParseError("bad detector row", row.line);
    const auto c = r - 1;
    if (!detail::parse_double(row.cells[1], m.bias[c])) throw ParseError("bad bias", row.line);
    for (int k = 0; k < kDescriptorLength; ++k)
      if (!detail::parse_double(row.cells[static_cast<std::size_t>(2 + k)], m.weights[c * kDescriptorLength + k]))
        throw ParseError("bad weight", row.line);
  }
  if (!m.finite()) throw InvariantViolation("detector weights must be finite");
  return m;
}

void write_detections_csv(const std::filesystem::path& path, std::span<const Detection> dets) {
  auto os = detail::open_for_write(path);
  os << "image,class_id,score,x0,y0,x1,y1\n";
  for (const Detection& d : dets)
    os << fmt::format("{},{},{:.17g},{},{},{},{}\n", d.image, d.class_id, d.score, d.box.x0, d.box.y0, d.box.x1,
                      d.box.y1);
}

}  // namespace camforge
