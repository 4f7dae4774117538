#ifndef DEFRAD_RADAR_DSP_HPP
#define DEFRAD_RADAR_DSP_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "defrad/radar_model.hpp"

namespace defrad::dsp {

using cplx = std::complex<double>;

enum class Window { hann, rectangular };

Window parse_window(const std::string& name);
std::string to_string(Window w);

/// Fast-time taper of length n (symmetric Hann or all ones).
std::vector<double> window_coefficients(Window w, std::size_t n);

/// Windowed, zero-padded forward FFT of one chirp (length n * zero_pad).
std::vector<cplx> fast_time_spectrum(std::span<const cplx> chirp, Window w,
                                     std::size_t zero_pad);

struct RangeProfileOptions {
  Window window = Window::hann;
  std::size_t zero_pad = 4;
  /// Keep only bins with r_min <= r <= r_max (positive beat frequencies).
  double r_min = 0.0;
  double r_max = 1e300;
};

/// s_R[e][slow][range]; range_axis is uniform and increasing.
struct RangeProfileSet {
  std::size_t n_elements = 0;
  std::size_t n_range = 0;
  std::size_t n_slow = 0;
  std::size_t first_bin = 0;  ///< FFT bin of range_axis[0]
  std::vector<double> range_axis;  ///< [m]
  std::vector<double> slow_axis;   ///< [s]
  double slow_rate = 0.0;
  std::vector<cplx> samples;

  std::size_t offset(std::size_t e, std::size_t s) const {
    return (e * n_slow + s) * n_range;
  }
  cplx at(std::size_t e, std::size_t s, std::size_t r) const {
    return samples[offset(e, s) + r];
  }
};

/// Range FFT over fast time, r = f c / (2 gamma).
RangeProfileSet range_profile(const radar::IFCube& cube,
                              const RangeProfileOptions& opt = {});

/// How the beamformer spacing d0 is derived from the virtual array.
enum class SpacingMode {
  two_way,  ///< 2 x phase-centre pitch (matches round-trip phase)
  pitch,    ///< phase-centre pitch as is
};

SpacingMode parse_spacing_mode(const std::string& name);
std::string to_string(SpacingMode m);

/// d0 for the beamformer; throws NonuniformArray for irregular arrays.
double beam_spacing(const radar::VirtualArray& array, SpacingMode mode);

/// Uniform grid of n angles over [-half_width, half_width] [rad].
std::vector<double> make_theta_grid(std::size_t n, double half_width);

/// S[slow][range][theta].
struct RangeAngleMap {
  std::size_t n_range = 0;
  std::size_t n_theta = 0;
  std::size_t n_slow = 0;
  std::vector<double> range_axis;
  std::vector<double> theta_axis;
  std::vector<cplx> samples;

  cplx at(std::size_t s, std::size_t r, std::size_t th) const {
    return samples[(s * n_range + r) * n_theta + th];
  }
};

/// Steering weights exp(-j (2 pi / lambda) i d0 sin(theta)), i = element.
/// With the IF phase +4 pi R / lambda these align for targets whose range
/// grows with i, so positive theta lies on the -axis side of the array.
std::vector<cplx> steering_weights(std::size_t n_elements, double d0,
                                   double theta, double wavelength);

/// S(r, theta, t) = sum_i w_i(theta) s_R,i(r, t).
RangeAngleMap beamform(const RangeProfileSet& profiles, double d0,
                       std::span<const double> theta_grid, double wavelength);

/// Time-averaged power (1/T) sum_t |S(r, theta, t)|^2 as an
/// (n_range x n_theta) matrix, via per-range channel covariances.
Eigen::MatrixXd time_averaged_power(const RangeProfileSet& profiles, double d0,
                                    std::span<const double> theta_grid,
                                    double wavelength);

/// Same quantity from an explicit range-angle map.
Eigen::MatrixXd time_averaged_power(const RangeAngleMap& map);

struct PeakPixel {
  std::size_t range_index = 0;
  std::size_t theta_index = 0;
  double range = 0.0;  ///< [m]
  double theta = 0.0;  ///< [rad]
  double power = 0.0;
};

/// argmax of the power image; ties go to the smaller range, then smaller |theta|.
PeakPixel select_peak_pixel(const Eigen::MatrixXd& power,
                            std::span<const double> range_axis,
                            std::span<const double> theta_axis);
PeakPixel select_peak_pixel(const RangeAngleMap& map);

/// S(r0, theta0, t) for one pixel.
std::vector<cplx> pixel_series(const RangeProfileSet& profiles, double d0,
                               std::size_t range_index, double theta,
                               double wavelength);

/// 1-D unwrap: successive differences mapped into (-pi, pi].
std::vector<double> unwrap(std::span<const double> wrapped);

/// unwrap(arg(series)); throws ZeroSample on a zero sample.
std::vector<double> unwrap_phase(std::span<const cplx> series);

struct DisplacementWaveform {
  std::vector<double> values;  ///< [m]
  double rate = 0.0;           ///< [Hz]
  double t0 = 0.0;             ///< time of the first sample [s]
  bool smoothed = false;
};

/// d = (lambda / 4 pi) unwrap(arg S), mean removed.
DisplacementWaveform displacement(std::span<const cplx> series,
                                  double wavelength, double rate,
                                  double t0 = 0.0);

/// Centred moving average over `window` samples (odd; truncated at the ends).
std::vector<double> moving_average(std::span<const double> x, std::size_t window);

/// Number of samples (odd, >= 1) of a window of `seconds` at `rate`.
std::size_t window_samples(double seconds, double rate);

/// Moving-average smoothing, then subtraction of a moving-average trend.
DisplacementWaveform smooth_detrend(const DisplacementWaveform& wave,
                                    double smooth_window_s,
                                    double detrend_window_s);

}  // namespace defrad::dsp

#endif  // DEFRAD_RADAR_DSP_HPP
