#ifndef DEFRAD_CONFIG_HPP
#define DEFRAD_CONFIG_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "defrad/cpd.hpp"
#include "defrad/radar_dsp.hpp"
#include "defrad/radar_model.hpp"
#include "defrad/scene_synth.hpp"

namespace defrad::config {

struct EmConfig {
  double a0 = 0.019;       ///< eye radius [m], about 5 wavelengths
  double map_spacing = 0.004;  ///< window centre spacing on dense clouds [m], 0 = every point
  double edge_taper = 0.02;    ///< raised-cosine taper width at the patch boundary [m], 0 = off
  bool shadowing = true;
  double moment = 1.0;     ///< [A m]
  Vec3 dipole_axis = Vec3::UnitY();
};

struct ArrayConfig {
  std::size_t n_tx = 3;
  double tx_pitch = 7.6e-3;
  std::size_t n_rx = 4;
  double rx_pitch = 1.9e-3;
  Point3 origin = Point3(0.028, -0.034, 0.138);  ///< Tx 0 / Rx 0 position
  Vec3 axis = Vec3::UnitX();
};

struct RadarConfig {
  radar::ChirpParams chirp;
  ArrayConfig array;
  double theta_scat = 0.25;
  double theta_thresh = 0.25;
  double eta_phase = 3.141592653589793;  ///< eta = exp(j eta_phase)
};

struct DspConfig {
  std::string window = "hann";
  std::size_t zero_pad = 4;
  std::size_t n_theta = 181;
  double theta_half_width_deg = 45.0;
  double range_min = 0.5;  ///< [m]
  double range_max = 1.5;  ///< [m]
  double smooth_window_s = 0.3;
  double detrend_window_s = 10.0;
  std::string spacing = "two_way";  ///< beamformer d0: two_way | pitch
  double max_lag_s = 0.5;
};

struct ProcessingConfig {
  std::size_t cpd_points = 150;  ///< template subsample fed to CPD
  std::size_t normal_k = 16;
  bool write_cubes = true;
  bool write_maps = false;  ///< per-frame scattering maps (large)
};

enum class Mode { conventional, proposed, both };

Mode parse_mode(const std::string& s);
std::string to_string(Mode m);

struct PipelineConfig {
  scene::SceneConfig scene;
  /// Warm-started sequence frames use a looser tolerance than standalone runs.
  cpd::CpdParams cpd{.tol = 1e-4};
  EmConfig em;
  RadarConfig radar;
  DspConfig dsp;
  ProcessingConfig processing;
  Mode mode = Mode::both;
  double t_obs = 0.0;  ///< observation duration [s]; 0 uses the whole record

  void validate() const;
};

nlohmann::json to_json(const scene::SceneConfig& c);
scene::SceneConfig scene_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PipelineConfig& c);

/// Missing keys keep their defaults; unknown keys raise InvalidArgument.
PipelineConfig from_json(const nlohmann::json& j);

PipelineConfig load(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// and falls back to a plain string. Numeric segments index arrays.
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace defrad::config

#endif  // DEFRAD_CONFIG_HPP
