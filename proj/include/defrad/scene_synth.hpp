#ifndef DEFRAD_SCENE_SYNTH_HPP
#define DEFRAD_SCENE_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "defrad/geometry.hpp"

namespace defrad::scene {

/// Gaussian displacement bump: d(x, y, t) = amplitude sin(2 pi rate t + phase)
/// exp(-((x - cx)^2 + (y - cy)^2) / (2 width^2)), applied along the normal.
struct Bump {
  double center_x = 0.0;   ///< [m]
  double center_y = 0.0;   ///< [m]
  double width = 0.03;     ///< [m]
  double amplitude = 2e-3; ///< [m], positive = toward the sensor
  double rate = 0.25;      ///< [Hz]
  double phase = 0.0;      ///< [rad]

  double profile(double x, double y) const;
  double value(double x, double y, double t) const;
};

/**
 * @brief Synthetic torso stand-in.
 *
 * The surface is the sensor-facing cap of an ellipsoid whose apex lies on the
 * +z axis at apex_z; the depth camera sits at the origin looking along +z.
 * The patch covers |x| <= half_x, |y| <= half_y. Densities are points per
 * projected square metre.
 */
struct SceneConfig {
  double semi_x = 0.16;
  double semi_y = 0.22;
  double semi_z = 0.12;
  double apex_z = 0.8;
  double half_x = 0.09;
  double half_y = 0.09;
  std::vector<Bump> bumps{Bump{}};
  double template_density = 250000.0; ///< 2 mm spacing, about lambda/2
  double camera_density = 100000.0;   ///< ~3.2 mm spacing
  double template_jitter = 0.3;       ///< in-plane jitter, fraction of spacing
  double camera_noise_sigma = 1.5e-3; ///< [m], along the ray
  double duration_s = 20.0;
  double frame_rate = 15.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t n_frames() const;
};

struct GroundTruth {
  std::vector<double> times;  ///< frame timestamps [s]
  /// [site][frame] noiseless normal displacement at each bump centre [m]
  std::vector<std::vector<double>> site_displacement;
  /// Noiseless deformed template per frame (template indexing).
  std::vector<PointCloudFrame> per_frame_truth;
};

struct Scene {
  SceneConfig config;
  PointCloudFrame template_cloud;      ///< dense, with analytic normals
  std::vector<PointCloudFrame> frames; ///< camera frames, fixed-ray indexing
  GroundTruth truth;
};

/// Undeformed surface height and outward (sensor-facing) unit normal.
double surface_z(const SceneConfig& cfg, double x, double y);
Vec3 surface_normal(const SceneConfig& cfg, double x, double y);

/// Total displacement field (sum of bumps) at (x, y, t).
double displacement_at(const SceneConfig& cfg, double x, double y, double t);

/// Point of the deformed surface above (x, y) at time t.
Point3 deformed_point(const SceneConfig& cfg, double x, double y, double t);

/// Intersection of the ray s * dir (s > 0) with the deformed surface at t.
Point3 intersect_ray(const SceneConfig& cfg, const Vec3& dir, double t);

/// Fixed pseudo-pixel ray directions of the camera.
std::vector<Vec3> camera_rays(const SceneConfig& cfg);

PointCloudFrame gen_template(const SceneConfig& cfg);

/// Template, camera frames and ground truth for the configured bumps.
Scene gen_frames(const SceneConfig& cfg);

/// gen_frames with `second` appended to the bump list.
Scene gen_two_site_scene(const SceneConfig& cfg, const Bump& second);

/// Writes template.ply, frames/frame_%04d.ply, truth.csv and scene.json.
void save_scene(const Scene& scene, const std::filesystem::path& dir);

/// Reads a directory written by save_scene; per_frame_truth is regenerated
/// from the stored configuration.
Scene load_scene(const std::filesystem::path& dir);

}  // namespace defrad::scene

#endif  // DEFRAD_SCENE_SYNTH_HPP
