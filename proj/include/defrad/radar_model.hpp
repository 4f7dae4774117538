#ifndef DEFRAD_RADAR_MODEL_HPP
#define DEFRAD_RADAR_MODEL_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "defrad/em_scatter.hpp"
#include "defrad/geometry.hpp"

namespace defrad::radar {

using cplx = std::complex<double>;

/// FMCW chirp and sampling parameters.
struct ChirpParams {
  double f_min = 77.2e9;            ///< chirp start [Hz]
  double bandwidth = 3.6e9;         ///< B [Hz]
  double chirp_duration = 51.2e-6;  ///< T_c [s]
  std::size_t n_fast = 256;
  double fs_fast = 5.0e6;           ///< fast-time sample rate [Hz]
  double slow_rate = 100.0;         ///< chirp (slow-time) rate [Hz]

  double gamma() const { return bandwidth / chirp_duration; }
  double center_frequency() const { return f_min + 0.5 * bandwidth; }
  double wavelength() const;  ///< at the centre frequency
  /// Range spacing of one (unpadded) FFT bin, c fs / (2 gamma n_fast).
  double range_bin() const;
  void validate() const;
};

struct VirtualElement {
  std::size_t tx_index = 0;
  std::size_t rx_index = 0;
  Point3 phase_center = Point3::Zero();
};

/// MIMO array: elements are enumerated Tx-major (element = tx * n_rx + rx).
struct VirtualArray {
  std::vector<Point3> tx_positions;
  std::vector<Point3> rx_positions;
  std::vector<VirtualElement> elements;
  Point3 origin = Point3::Zero();
  Vec3 axis = Vec3::UnitX();

  std::size_t size() const { return elements.size(); }
  /// Consecutive phase-centre spacings along the axis.
  std::vector<double> spacings() const;
  /// Mean spacing; throws NonuniformArray if the spacing variance > 1e-12 m^2.
  double uniform_pitch() const;
};

VirtualArray build_virtual_array(std::size_t n_tx, double tx_pitch,
                                 std::size_t n_rx, double rx_pitch,
                                 const Point3& origin, const Vec3& axis);

/**
 * @brief Scattering centre tracked on a uniform source time grid.
 *
 * range[e][s] is R_{e,k} at time t0 + s * dt for virtual element e.
 * amplitude[e] holds either one value (time-invariant) or one value per
 * source sample.
 */
struct ScatterCenter {
  std::size_t index = 0;
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<std::vector<double>> range;
  std::vector<std::vector<double>> amplitude;
  cplx eta{-1.0, 0.0};

  void validate(std::size_t n_elements) const;
};

/// IF samples in [element][slow][fast] order.
struct IFCube {
  std::size_t n_elements = 0;
  std::size_t n_fast = 0;
  std::size_t n_slow = 0;
  double fs_fast = 0.0;
  double slow_rate = 0.0;
  double f_min = 0.0;
  double gamma = 0.0;
  std::vector<double> slow_axis;  ///< [s]
  std::vector<cplx> samples;

  std::vector<double> fast_axis() const;
  std::size_t offset(std::size_t e, std::size_t s) const {
    return (e * n_slow + s) * n_fast;
  }
  std::span<const cplx> chirp(std::size_t e, std::size_t s) const {
    return {samples.data() + offset(e, s), n_fast};
  }
  std::span<cplx> chirp(std::size_t e, std::size_t s) {
    return {samples.data() + offset(e, s), n_fast};
  }
};

/// Uniform slow-time grid from t_begin with `rate`, covering [t_begin, t_end].
std::vector<double> make_slow_grid(double t_begin, double t_end, double rate);

/// Cubic-spline resampling of uniformly sampled data (linear for < 5 samples).
/// Queries outside the sampled span are clamped to the end values.
std::vector<double> resample_cubic(double t0, double dt,
                                   std::span<const double> values,
                                   std::span<const double> query);

/// Linear resampling of uniformly sampled data, clamped at the ends.
std::vector<double> resample_linear(double t0, double dt,
                                    std::span<const double> values,
                                    std::span<const double> query);

/**
 * @brief Local maxima of a (time-averaged) map above a power threshold.
 *
 * Index k is kept if its magnitude is strictly greater than every other
 * sample within the map's eye radius and |E_k|^2 >= theta * max |E|^2.
 * Result is in ascending index order. Throws EmptySelection.
 */
std::vector<std::size_t> select_centers_conventional(
    const em::ScatteringMap& map, std::span<const Point3> points,
    double theta_scat);

/// Line-of-sight tracking result for one virtual element.
struct TrackedCenters {
  std::vector<std::vector<std::size_t>> matched;  ///< [center][frame]
  std::vector<std::vector<double>> range;         ///< [center][frame] [m]
};

/**
 * @brief Per frame, the frame point best aligned with the line of sight from
 * `phase_center` to each averaged centre (max cosine); R is its distance.
 */
TrackedCenters track_centers_conventional(
    std::span<const PointCloudFrame> frames,
    std::span<const Point3> averaged_points,
    std::span<const std::size_t> centers, const Point3& phase_center);

/**
 * @brief Index set of points that scatter strongly at least once.
 *
 * maps[f][k] are magnitudes over a common template indexing (any mix of
 * frames and elements). Keeps k if |E|^2(k, f) >= theta * global max for some
 * f. Ascending index order. Throws EmptySelection.
 */
std::vector<std::size_t> select_index_set(
    std::span<const std::vector<double>> maps, double theta_thresh);

/// s(tau, t) = sum_k A eta exp(j 4 pi (gamma R tau / c + f_min R / c)) with
/// time-invariant amplitudes (each amplitude[e] must hold one value).
IFCube synth_if_conventional(std::span<const ScatterCenter> centers,
                             const ChirpParams& chirp,
                             std::span<const double> slow_grid,
                             std::size_t n_elements);

/// Same phase model with amplitude series, linearly resampled to slow time.
IFCube synth_if_proposed(std::span<const ScatterCenter> centers,
                         const ChirpParams& chirp,
                         std::span<const double> slow_grid,
                         std::size_t n_elements);

}  // namespace defrad::radar

#endif  // DEFRAD_RADAR_MODEL_HPP
