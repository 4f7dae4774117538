#include "defrad/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include <json.hpp>

#include "defrad/config.hpp"
#include "defrad/errors.hpp"
#include "defrad/io.hpp"
#include "defrad/ply.hpp"

namespace defrad::scene {

namespace {

constexpr int kRayIterations = 8;

double center_z(const SceneConfig& cfg) { return cfg.apex_z + cfg.semi_z; }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

double spacing(double density) { return 1.0 / std::sqrt(density); }

// Node coordinates spanning [-half, half] end to end at roughly spacing h.
std::vector<double> grid_nodes(double half, double h) {
  const auto n = std::max<long>(2, std::lround(2.0 * half / h) + 1);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = -half + 2.0 * half * i / (n - 1);
  return v;
}

}  // namespace

double Bump::profile(double x, double y) const {
  const double dx = x - center_x, dy = y - center_y;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
}

double Bump::value(double x, double y, double t) const {
  return amplitude * std::sin(2.0 * std::numbers::pi * rate * t + phase) * profile(x, y);
}

void SceneConfig::validate() const {
  if (!(semi_x > 0 && semi_y > 0 && semi_z > 0)) throw InvalidArgument("semi-axes must be > 0");
  if (!(apex_z > 0)) throw InvalidArgument("apex_z must be > 0");
  if (!(half_x > 0 && half_y > 0)) throw InvalidArgument("patch half extents must be > 0");
  const double e = (half_x / semi_x) * (half_x / semi_x) + (half_y / semi_y) * (half_y / semi_y);
  if (!(e < 0.9)) throw InvalidArgument("patch reaches the ellipsoid rim");
  if (!(template_density > 0 && camera_density > 0)) throw InvalidArgument("densities must be > 0");
  if (!(template_jitter >= 0 && template_jitter < 0.5))
    throw InvalidArgument("template_jitter must lie in [0, 0.5)");
  if (!(camera_noise_sigma >= 0)) throw InvalidArgument("camera_noise_sigma must be >= 0");
  if (!(duration_s > 0)) throw InvalidArgument("duration_s must be > 0");
  if (!(frame_rate > 0)) throw InvalidArgument("frame_rate must be > 0");
  for (const auto& b : bumps) {
    if (!(b.amplitude >= 0)) throw InvalidArgument("bump amplitude must be >= 0");
    if (!(b.width > 0)) throw InvalidArgument("bump width must be > 0");
    if (!(b.rate >= 0)) throw InvalidArgument("bump rate must be >= 0");
    if (!(frame_rate > 2.0 * b.rate))
      throw InvalidArgument("frame_rate must exceed twice the respiration rate");
  }
}

std::size_t SceneConfig::n_frames() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration_s * frame_rate)));
}

double surface_z(const SceneConfig& cfg, double x, double y) {
  const double q = 1.0 - (x / cfg.semi_x) * (x / cfg.semi_x) - (y / cfg.semi_y) * (y / cfg.semi_y);
  if (!(q > 0.0)) throw InvalidArgument("point outside the ellipsoid footprint");
  return center_z(cfg) - cfg.semi_z * std::sqrt(q);
}

Vec3 surface_normal(const SceneConfig& cfg, double x, double y) {
  const double z = surface_z(cfg, x, y);
  Vec3 g(x / (cfg.semi_x * cfg.semi_x), y / (cfg.semi_y * cfg.semi_y),
         (z - center_z(cfg)) / (cfg.semi_z * cfg.semi_z));
  return g.normalized();
}

double displacement_at(const SceneConfig& cfg, double x, double y, double t) {
  double d = 0.0;
  for (const auto& b : cfg.bumps) d += b.value(x, y, t);
  return d;
}

Point3 deformed_point(const SceneConfig& cfg, double x, double y, double t) {
  return Point3(x, y, surface_z(cfg, x, y)) +
         displacement_at(cfg, x, y, t) * surface_normal(cfg, x, y);
}

Point3 intersect_ray(const SceneConfig& cfg, const Vec3& dir, double t) {
  const Vec3 d = dir.normalized();
  const double a2 = cfg.semi_x * cfg.semi_x, b2 = cfg.semi_y * cfg.semi_y,
               c2 = cfg.semi_z * cfg.semi_z, zc = center_z(cfg);
  const double A = d.x() * d.x() / a2 + d.y() * d.y() / b2 + d.z() * d.z() / c2;
  const double B = -2.0 * d.z() * zc / c2;
  const double C = zc * zc / c2 - 1.0;
  const double disc = B * B - 4.0 * A * C;
  if (!(disc >= 0.0)) throw InvalidArgument("ray misses the surface");
  const double s0 = (-B - std::sqrt(disc)) / (2.0 * A);
  Point3 p = s0 * d;

  // Fixed point: base (x, y) whose displaced surface point lies on the ray,
  // refined by intersecting the ray with the local tangent plane.
  double x = p.x(), y = p.y();
  for (int it = 0; it < kRayIterations; ++it) {
    const Vec3 n = surface_normal(cfg, x, y);
    const double disp = displacement_at(cfg, x, y, t);
    const Point3 q = Point3(x, y, surface_z(cfg, x, y)) + disp * n;
    const double s = q.dot(n) / d.dot(n);
    p = s * d;
    x = p.x() - disp * n.x();
    y = p.y() - disp * n.y();
  }
  return p;
}

std::vector<Vec3> camera_rays(const SceneConfig& cfg) {
  // Pixel rays through a regular grid on the undeformed patch, so the camera
  // footprint matches the template extent.
  const double h = spacing(cfg.camera_density);
  const auto xs = grid_nodes(cfg.half_x, h), ys = grid_nodes(cfg.half_y, h);
  std::vector<Vec3> rays;
  rays.reserve(xs.size() * ys.size());
  for (double y : ys)
    for (double x : xs) rays.push_back(Vec3(x, y, surface_z(cfg, x, y)).normalized());
  return rays;
}

PointCloudFrame gen_template(const SceneConfig& cfg) {
  cfg.validate();
  const double h = spacing(cfg.template_density);
  const auto xs = grid_nodes(cfg.half_x, h), ys = grid_nodes(cfg.half_y, h);
  auto rng = stream(cfg.seed, 0x54454d50, 0);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double jh = cfg.template_jitter * h;

  PointCloudFrame t;
  t.normals.emplace();
  for (double yn : ys) {
    for (double xn : xs) {
      const double x = std::clamp(xn + jh * jitter(rng), -cfg.half_x, cfg.half_x);
      const double y = std::clamp(yn + jh * jitter(rng), -cfg.half_y, cfg.half_y);
      t.points.emplace_back(x, y, surface_z(cfg, x, y));
      t.normals->push_back(surface_normal(cfg, x, y));
    }
  }
  return t;
}

Scene gen_frames(const SceneConfig& cfg) {
  cfg.validate();
  Scene s;
  s.config = cfg;
  s.template_cloud = gen_template(cfg);
  const auto rays = camera_rays(cfg);
  const std::size_t nf = cfg.n_frames();

  s.frames.resize(nf);
  s.truth.times.resize(nf);
  s.truth.site_displacement.assign(cfg.bumps.size(), std::vector<double>(nf));
  s.truth.per_frame_truth.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const double t = static_cast<double>(f) / cfg.frame_rate;
    s.truth.times[f] = t;
    for (std::size_t b = 0; b < cfg.bumps.size(); ++b)
      s.truth.site_displacement[b][f] =
          displacement_at(cfg, cfg.bumps[b].center_x, cfg.bumps[b].center_y, t);

    auto rng = stream(cfg.seed, 0x43414d, f);
    std::normal_distribution<double> noise(0.0, 1.0);
    auto& frame = s.frames[f];
    frame.timestamp = t;
    frame.points.reserve(rays.size());
    for (const auto& d : rays) {
      const Point3 p = intersect_ray(cfg, d, t);
      frame.points.push_back(p + cfg.camera_noise_sigma * noise(rng) * d);
    }

    auto& truth = s.truth.per_frame_truth[f];
    truth.timestamp = t;
    truth.points.reserve(s.template_cloud.size());
    for (const auto& p : s.template_cloud.points)
      truth.points.push_back(deformed_point(cfg, p.x(), p.y(), t));
  }
  return s;
}

Scene gen_two_site_scene(const SceneConfig& cfg, const Bump& second) {
  SceneConfig c = cfg;
  c.bumps.push_back(second);
  return gen_frames(c);
}

void save_scene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "frames");
  save_ply(scene.template_cloud, dir / "template.ply");
  char name[64];
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    std::snprintf(name, sizeof name, "frame_%04zu.ply", f);
    save_ply(scene.frames[f], dir / "frames" / name);
  }
  std::vector<std::string> header{"t_s", "d_m"};
  for (std::size_t b = 1; b < scene.truth.site_displacement.size(); ++b)
    header.push_back("d_site" + std::to_string(b + 1) + "_m");
  std::vector<std::vector<double>> cols{scene.truth.times};
  for (const auto& d : scene.truth.site_displacement) cols.push_back(d);
  io::write_columns_csv(dir / "truth.csv", header, cols);
  io::write_json(dir / "scene.json", config::to_json(scene.config));
}

Scene load_scene(const std::filesystem::path& dir) {
  Scene s;
  s.config = config::scene_from_json(io::read_json(dir / "scene.json"));
  s.template_cloud = load_ply(dir / "template.ply");
  const std::size_t nf = s.config.n_frames();
  char name[64];
  for (std::size_t f = 0; f < nf; ++f) {
    std::snprintf(name, sizeof name, "frame_%04zu.ply", f);
    s.frames.push_back(load_ply(dir / "frames" / name));
  }
  const auto truth = io::read_columns_csv(dir / "truth.csv");
  if (truth.columns.empty()) throw ParseError(1, "truth.csv has no columns");
  s.truth.times = truth.columns.front();
  for (std::size_t c = 1; c < truth.columns.size(); ++c)
    s.truth.site_displacement.push_back(truth.columns[c]);
  s.truth.per_frame_truth.resize(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    auto& tr = s.truth.per_frame_truth[f];
    tr.timestamp = s.truth.times.at(f);
    for (const auto& p : s.template_cloud.points)
      tr.points.push_back(deformed_point(s.config, p.x(), p.y(), tr.timestamp));
  }
  return s;
}

}  // namespace defrad::scene
