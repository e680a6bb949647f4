// SPDX-License-Identifier: Apache-2.0
#include "camforge/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bvh.hpp"
#include "camforge/error.hpp"

namespace camforge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kShadowEps = 1e-6;

void check_design(const CameraDesign& d) {
  if (!(d.focal_mm > 0.0) || !(d.sensor_w_mm > 0.0) || !(d.sensor_h_mm > 0.0) || !(d.pixel_um > 0.0))
    throw DegenerateSensor("focal length, sensor size and pixel pitch must be positive");
}

struct Tracer {
  const SceneInstance& scene;
  detail::Bvh bvh;

  explicit Tracer(const SceneInstance& s) : scene(s), bvh(s.primitives) {}

  struct Sample {
    Rgb phi{0.0, 0.0, 0.0};
    double t = kInf;
    int semantic = kBackgroundClass;
    int instance = 0;
  };

  Sample trace(const Ray& ray, bool shade) const {
    Sample out;
    detail::Hit hit;
    if (!bvh.closest(ray, 0.0, kInf, hit)) {
      const double v = scene.sky * scene.illuminance_lux;
      out.phi = {v, v, v};
      return out;
    }
    const Primitive& prim = scene.primitives[static_cast<std::size_t>(hit.primitive)];
    out.t = hit.t;
    out.semantic = prim.class_id;
    out.instance = prim.instance_id;
    if (!shade) return out;

    const Vec3 p = ray.origin + ray.dir * hit.t;
    Vec3 n;
    n[hit.axis] = static_cast<double>(hit.sign);
    double s = scene.ambient;
    for (const Light& light : scene.lights) {
      const Vec3 to_light = light.position - p;
      const double d2 = dot(to_light, to_light);
      const double cos_term = dot(n, to_light) / std::sqrt(d2);
      if (cos_term <= 0.0) continue;
      // Offset along the normal so the surface does not shadow itself.
      const Ray shadow{p + n * kShadowEps, to_light};
      if (bvh.occluded(shadow, kShadowEps, 1.0 - kShadowEps)) continue;
      s += light.intensity * cos_term / d2;
    }
    const Rgb albedo = prim.texture.albedo_at(p, hit.axis);
    for (int c = 0; c < 3; ++c)
      out.phi[static_cast<std::size_t>(c)] = scene.illuminance_lux * albedo[static_cast<std::size_t>(c)] * s;
    return out;
  }
};

Frame render_impl(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
                  const RenderOptions& options, bool shade) {
  if (options.supersample < 1) throw PreconditionError("supersample must be >= 1");
  const Intrinsics intr = render_intrinsics(design, options);
  const CameraBasis basis = camera_basis(pose);
  const Tracer tracer(scene);
  const int w = intr.width;
  const int h = intr.height;

  Frame frame;
  frame.pose = pose;
  frame.intrinsics = intr;
  frame.depth = ImageF(w, h, 1, kInf);
  frame.semantic = ImageI(w, h, 1, kBackgroundClass);
  frame.instance = ImageI(w, h, 1, 0);
  if (shade) frame.irradiance = ImageF(w, h, 3, 0.0);

  auto ray_at = [&](double u, double v) {
    const Vec3 dir = basis.forward + basis.right * ((u - intr.cx) / intr.f_px) +
                     basis.down * ((v - intr.cy) / intr.f_px);
    return Ray{pose.position, dir};
  };

  const int ss = shade ? options.supersample : 1;
  const double inv_n = 1.0 / (ss * ss);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Labels and depth always come from the pixel-center ray.
      const auto center = tracer.trace(ray_at(x + 0.5, y + 0.5), shade && ss == 1);
      frame.depth.at(x, y) = center.t;
      frame.semantic.at(x, y) = center.semantic;
      frame.instance.at(x, y) = center.instance;
      if (!shade) continue;
      if (ss == 1) {
        for (int c = 0; c < 3; ++c) frame.irradiance.at(x, y, c) = center.phi[static_cast<std::size_t>(c)];
        continue;
      }
      Rgb acc{0.0, 0.0, 0.0};
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const auto s = tracer.trace(ray_at(x + (sx + 0.5) / ss, y + (sy + 0.5) / ss), true);
          for (std::size_t c = 0; c < 3; ++c) acc[c] += s.phi[c];
        }
      }
      for (int c = 0; c < 3; ++c) frame.irradiance.at(x, y, c) = acc[static_cast<std::size_t>(c)] * inv_n;
    }
  }
  if (shade) {
    const double kappa = options.kappa ? *options.kappa : default_kappa();
    auto exposed = expose(frame.irradiance, design.exposure_ms, design.gain_db, kappa);
    frame.exposed = std::move(exposed.image);
    frame.clipped = exposed.clipped;
  }
  return frame;
}

}  // namespace

Intrinsics intrinsics_of(const CameraDesign& design) {
  check_design(design);
  Intrinsics in;
  in.width = static_cast<int>(std::floor(1000.0 * design.sensor_w_mm / design.pixel_um + 1e-9));
  in.height = static_cast<int>(std::floor(1000.0 * design.sensor_h_mm / design.pixel_um + 1e-9));
  if (in.width < 8 || in.height < 8)
    throw DegenerateSensor("sensor resolves fewer than 8 pixels along an axis");
  in.f_px = 1000.0 * design.focal_mm / design.pixel_um;
  in.cx = in.width / 2.0;
  in.cy = in.height / 2.0;
  return in;
}

double hfov_deg(const CameraDesign& design) {
  return rad2deg(2.0 * std::atan(design.sensor_w_mm / (2.0 * design.focal_mm)));
}

double vfov_deg(const CameraDesign& design) {
  return rad2deg(2.0 * std::atan(design.sensor_h_mm / (2.0 * design.focal_mm)));
}

double fov_to_focal(double hfov, double w_mm) {
  if (!(hfov > 0.0 && hfov < 180.0)) throw PreconditionError("hfov must lie in (0, 180) degrees");
  return w_mm / (2.0 * std::tan(deg2rad(hfov) / 2.0));
}

double db_to_linear(double gain_db) { return std::pow(10.0, gain_db / 20.0); }

Intrinsics render_intrinsics(const CameraDesign& design, const RenderOptions& options) {
  const Intrinsics native = intrinsics_of(design);
  const double s = std::min({options.scale, static_cast<double>(options.max_width) / native.width,
                             static_cast<double>(options.max_height) / native.height});
  if (s >= 1.0) return native;
  Intrinsics out;
  out.width = std::max(8, static_cast<int>(std::floor(native.width * s)));
  out.height = std::max(8, static_cast<int>(std::floor(native.height * s)));
  // Keep the horizontal field of view exact.
  out.f_px = native.f_px * out.width / native.width;
  out.cx = out.width / 2.0;
  out.cy = out.height / 2.0;
  return out;
}

Pose pose_from_step(const PathStep& step, const CameraDesign& design) {
  Pose p;
  p.position = {step.position.x, step.position.y, step.camera_height_m};
  p.yaw_deg = step.yaw_deg;
  p.pitch_deg = design.pitch_deg;
  return p;
}

CameraBasis camera_basis(const Pose& pose) {
  const double yaw = deg2rad(pose.yaw_deg);
  const double pitch = deg2rad(pose.pitch_deg);
  CameraBasis b;
  b.forward = {std::sin(yaw) * std::cos(pitch), std::cos(yaw) * std::cos(pitch), std::sin(pitch)};
  b.right = {std::cos(yaw), -std::sin(yaw), 0.0};
  b.down = cross(b.forward, b.right);
  return b;
}

std::optional<std::array<double, 2>> project(const Pose& pose, const Intrinsics& intr, Vec3 world) {
  const CameraBasis b = camera_basis(pose);
  const Vec3 rel = world - pose.position;
  const double z = dot(rel, b.forward);
  if (z <= 0.0) return std::nullopt;
  return std::array<double, 2>{intr.cx + intr.f_px * dot(rel, b.right) / z,
                               intr.cy + intr.f_px * dot(rel, b.down) / z};
}

ExposeResult expose(const ImageF& irradiance, double exposure_ms, double gain_db, double kappa) {
  if (!std::isfinite(exposure_ms) || !std::isfinite(gain_db)) throw PreconditionError("exposure and gain must be finite");
  if (!(kappa > 0.0)) throw PreconditionError("kappa must be positive");
  const double k = kappa * exposure_ms * db_to_linear(gain_db);
  ExposeResult out{ImageF(irradiance.width(), irradiance.height(), irradiance.channels()), 0};
  auto src = irradiance.data();
  auto dst = out.image.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = k * src[i];
    if (v > 1.0) ++out.clipped;
    dst[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

Frame render(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
             const RenderOptions& options) {
  return render_impl(scene, pose, design, options, true);
}

Frame render_labels(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
                    const RenderOptions& options) {
  return render_impl(scene, pose, design, options, false);
}

double calibrate_kappa(double lux, double exposure_ms, double gain_db, double target, double albedo) {
  if (!(target > 0.0 && target < 1.0)) throw PreconditionError("target must lie in (0, 1)");
  SceneInstance card = make_colorbar_target(2);
  for (Primitive& p : card.primitives) p.texture.base = p.texture.alt = {albedo, albedo, albedo};
  card.illuminance_lux = lux;
  CameraDesign cam;
  cam.focal_mm = 1.0;
  cam.sensor_w_mm = cam.sensor_h_mm = 0.2;  // narrow view, stays on the card
  cam.pixel_um = 10.0;
  cam.exposure_ms = exposure_ms;
  cam.gain_db = gain_db;
  RenderOptions opt;
  const Pose pose{};
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    opt.kappa = mid;
    const Frame f = render(card, pose, cam, opt);
    double mean = 0.0;
    for (double v : f.exposed.data()) mean += v;
    mean /= static_cast<double>(f.exposed.data().size());
    (mean < target ? lo : hi) = mid;
    if (hi - lo < 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

double default_kappa() {
  static const double kappa = calibrate_kappa(20.0, 30.0, 15.0);
  return kappa;
}

StereoFrame render_stereo(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
                          const RenderOptions& options, double d_max) {
  if (!(design.baseline_m > 0.0)) throw PreconditionError("stereo rendering needs a positive baseline");
  StereoFrame out;
  out.baseline_m = design.baseline_m;
  out.left = render(scene, pose, design, options);
  Pose right = pose;
  right.position = pose.position + camera_basis(pose).right * design.baseline_m;
  out.right = render(scene, right, design, options);

  const Intrinsics& intr = out.left.intrinsics;
  const int w = intr.width;
  const int h = intr.height;
  out.gt_disparity = ImageF(w, h, 1, kDisparitySentinel);
  out.gt_flags = Image<std::uint8_t>(w, h, 1, static_cast<std::uint8_t>(GtFlag::kNoSurface));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double z = out.left.depth.at(x, y);
      if (!std::isfinite(z)) continue;
      const double d = intr.f_px * design.baseline_m / z;
      // Same surface seen from the right camera: same depth at column x - d.
      const double xr = x + 0.5 - d;
      const int xi = static_cast<int>(std::floor(xr));
      bool visible = xi >= 0 && xi < w;
      if (visible) {
        const double zr = out.right.depth.at(xi, y);
        visible = std::isfinite(zr) && std::abs(zr - z) <= 0.02 * z + 1e-6;
      }
      if (!visible) {
        out.gt_flags.at(x, y) = static_cast<std::uint8_t>(GtFlag::kOccluded);
        continue;
      }
      out.gt_disparity.at(x, y) = d;
      out.gt_flags.at(x, y) = static_cast<std::uint8_t>(d >= d_max ? GtFlag::kOutOfRange : GtFlag::kValid);
    }
  }
  return out;
}

}  // namespace camforge
