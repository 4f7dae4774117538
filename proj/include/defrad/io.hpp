#ifndef DEFRAD_IO_HPP
#define DEFRAD_IO_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "defrad/cpd.hpp"
#include "defrad/em_scatter.hpp"
#include "defrad/radar_dsp.hpp"
#include "defrad/radar_model.hpp"

namespace defrad::io {

/// Numeric CSV with a header row; values written with 9 significant digits.
void write_columns_csv(const std::filesystem::path& path,
                       std::span<const std::string> header,
                       std::span<const std::vector<double>> columns);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  /// Column by header name; throws InvalidArgument if absent.
  const std::vector<double>& column(const std::string& name) const;
};

/// Reads a numeric CSV written by write_columns_csv (or compatible).
CsvTable read_columns_csv(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// t_s, d_m rows.
void write_waveform_csv(const std::filesystem::path& path,
                        const dsp::DisplacementWaveform& wave);
dsp::DisplacementWaveform read_waveform_csv(const std::filesystem::path& path);

/// index, x, y, z, magnitude rows.
void write_scattering_map_csv(const std::filesystem::path& path,
                              const em::ScatteringMap& map,
                              std::span<const Point3> points);

/// r_m, theta_rad, power rows.
void write_range_angle_csv(const std::filesystem::path& path,
                           const Eigen::MatrixXd& power,
                           std::span<const double> range_axis,
                           std::span<const double> theta_axis);

/// W as an M x 3 CSV plus a JSON header next to it (`<path>.json`).
void write_deformation_field(const std::filesystem::path& path,
                             const cpd::DeformationField& field);

/**
 * Binary IF cube: little-endian header {n_elements, n_fast, n_slow as
 * uint64; fs_fast, slow_rate, f_min, gamma as float64} followed by
 * interleaved (re, im) float64 samples in [element][slow][fast] order.
 * write_ifcube also writes `<path>.json` with the header fields.
 */
void write_ifcube(const std::filesystem::path& path, const radar::IFCube& cube);
radar::IFCube read_ifcube(const std::filesystem::path& path);

}  // namespace defrad::io

#endif  // DEFRAD_IO_HPP
