#ifndef DEFRAD_PIPELINE_HPP
#define DEFRAD_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "defrad/config.hpp"
#include "defrad/cpd.hpp"
#include "defrad/metrics.hpp"
#include "defrad/radar_dsp.hpp"
#include "defrad/radar_model.hpp"
#include "defrad/scene_synth.hpp"

namespace defrad::pipeline {

/// Array, dipole and EM constants derived from a configuration.
struct RadarSetup {
  radar::VirtualArray array;
  em::EmConstants consts;
  double wavelength = 0.0;
  double d0 = 0.0;  ///< beamformer spacing
  std::vector<double> theta_grid;
  Point3 viewpoint = Point3::Zero();  ///< normal orientation target
};

RadarSetup make_radar_setup(const config::PipelineConfig& cfg);

struct RegistrationStats {
  std::vector<int> iterations;
  std::vector<double> sigma2;
  std::vector<char> converged;
  std::vector<double> final_nll;
};

/// Dense template deformed onto every frame (template indexing preserved).
struct RegisteredSequence {
  std::vector<PointCloudFrame> clouds;
  RegistrationStats stats;
};

/**
 * @brief CPD of a farthest-point subsample of the template onto each frame,
 * warm-started frame to frame; the dense template follows through the
 * kernel field.
 */
RegisteredSequence register_sequence(const PointCloudFrame& template_cloud,
                                     std::span<const PointCloudFrame> frames,
                                     const cpd::CpdParams& params,
                                     std::size_t cpd_points, std::uint64_t seed);

/// maps[element][frame][point] scattering magnitudes on template-indexed clouds;
/// points that are not window centres (see em.map_spacing) hold 0.
using MapStack = std::vector<std::vector<std::vector<double>>>;

MapStack scattering_maps(std::span<const PointCloudFrame> clouds,
                         const RadarSetup& setup, const config::PipelineConfig& cfg);

/// Eq.-12 style centres: index set over all maps, per-frame ranges and amplitudes.
std::vector<radar::ScatterCenter> time_resolved_centers(
    std::span<const PointCloudFrame> clouds, const MapStack& maps,
    const RadarSetup& setup, const config::PipelineConfig& cfg);

struct ConventionalModel {
  PointCloudFrame averaged;
  std::vector<em::ScatteringMap> maps;  ///< per element, on `averaged`
  std::vector<std::size_t> centers;     ///< union over elements
  std::vector<radar::ScatterCenter> scatter_centers;
};

/// Time-averaged geometry, per-element local-maximum selection and
/// line-of-sight tracking in the camera frames.
ConventionalModel conventional_centers(std::span<const PointCloudFrame> frames,
                                       const RadarSetup& setup,
                                       const config::PipelineConfig& cfg);

std::vector<double> slow_grid_for(const scene::Scene& scene,
                                  const config::PipelineConfig& cfg);

struct DspResult {
  dsp::PeakPixel pixel;
  Eigen::MatrixXd power;
  std::vector<double> range_axis;
  dsp::DisplacementWaveform raw;
};

DspResult process_cube(const radar::IFCube& cube, const RadarSetup& setup,
                       const config::PipelineConfig& cfg);

dsp::RangeProfileOptions profile_options(const config::PipelineConfig& cfg);

struct PipelineResult {
  nlohmann::json report;
  std::optional<DspResult> proposed, conventional;
  DspResult reference;
};

/**
 * @brief scene -> (proposed | conventional | reference) -> DSP -> metrics.
 *
 * Artifacts go to `out_dir` unless it is empty. Failures are rethrown as
 * PipelineError naming the stage; files written so far stay on disk.
 */
PipelineResult run_pipeline(const config::PipelineConfig& cfg,
                            const std::filesystem::path& out_dir);

}  // namespace defrad::pipeline

#endif  // DEFRAD_PIPELINE_HPP
