#include "defrad/radar_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "defrad/errors.hpp"

namespace defrad::dsp {

namespace {

constexpr double kC = em::kSpeedOfLight;
constexpr double kPi = std::numbers::pi;

}  // namespace

Window parse_window(const std::string& name) {
  if (name == "hann") return Window::hann;
  if (name == "rectangular" || name == "rect") return Window::rectangular;
  throw InvalidArgument("unknown window '" + name + "' (hann|rectangular)");
}

std::string to_string(Window w) { return w == Window::hann ? "hann" : "rectangular"; }

SpacingMode parse_spacing_mode(const std::string& name) {
  if (name == "two_way") return SpacingMode::two_way;
  if (name == "pitch") return SpacingMode::pitch;
  throw InvalidArgument("unknown spacing mode '" + name + "' (two_way|pitch)");
}

std::string to_string(SpacingMode m) {
  return m == SpacingMode::two_way ? "two_way" : "pitch";
}

std::vector<double> window_coefficients(Window w, std::size_t n) {
  std::vector<double> c(n, 1.0);
  if (w == Window::hann && n > 1) {
    for (std::size_t i = 0; i < n; ++i)
      c[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) /
                                   static_cast<double>(n - 1)));
  }
  return c;
}

std::vector<cplx> fast_time_spectrum(std::span<const cplx> chirp, Window w,
                                     std::size_t zero_pad) {
  if (zero_pad < 1) throw InvalidArgument("zero_pad must be >= 1");
  const auto win = window_coefficients(w, chirp.size());
  std::vector<cplx> in(chirp.size() * zero_pad, cplx{});
  for (std::size_t m = 0; m < chirp.size(); ++m) in[m] = chirp[m] * win[m];
  std::vector<cplx> out;
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  return out;
}

RangeProfileSet range_profile(const radar::IFCube& cube,
                              const RangeProfileOptions& opt) {
  if (opt.zero_pad < 1) throw InvalidArgument("zero_pad must be >= 1");
  if (cube.n_fast < 2 || !(cube.gamma > 0.0) || !(cube.fs_fast > 0.0))
    throw InvalidArgument("IF cube has no valid fast-time axis");
  if (cube.samples.size() != cube.n_elements * cube.n_slow * cube.n_fast)
    throw InvalidArgument("IF cube sample count is inconsistent");

  const std::size_t n_fft = cube.n_fast * opt.zero_pad;
  const double dr = cube.fs_fast / static_cast<double>(n_fft) * kC / (2.0 * cube.gamma);
  std::size_t first = n_fft, last = 0;
  for (std::size_t b = 0; b < n_fft / 2; ++b) {
    const double r = static_cast<double>(b) * dr;
    if (r >= opt.r_min && r <= opt.r_max) {
      first = std::min(first, b);
      last = b;
    }
  }
  if (first > last) throw InvalidArgument("range window contains no FFT bin");

  RangeProfileSet p;
  p.n_elements = cube.n_elements;
  p.n_slow = cube.n_slow;
  p.n_range = last - first + 1;
  p.first_bin = first;
  p.slow_axis = cube.slow_axis;
  p.slow_rate = cube.slow_rate;
  for (std::size_t b = first; b <= last; ++b) p.range_axis.push_back(static_cast<double>(b) * dr);
  p.samples.resize(p.n_elements * p.n_slow * p.n_range);

  const auto win = window_coefficients(opt.window, cube.n_fast);
  Eigen::FFT<double> fft;
  std::vector<cplx> in(n_fft), out;
  for (std::size_t e = 0; e < cube.n_elements; ++e) {
    for (std::size_t s = 0; s < cube.n_slow; ++s) {
      const auto c = cube.chirp(e, s);
      std::fill(in.begin(), in.end(), cplx{});
      for (std::size_t m = 0; m < c.size(); ++m) in[m] = c[m] * win[m];
      fft.fwd(out, in);
      std::copy(out.begin() + static_cast<std::ptrdiff_t>(first),
                out.begin() + static_cast<std::ptrdiff_t>(last + 1),
                p.samples.begin() + static_cast<std::ptrdiff_t>(p.offset(e, s)));
    }
  }
  return p;
}

double beam_spacing(const radar::VirtualArray& array, SpacingMode mode) {
  const double pitch = array.uniform_pitch();
  return mode == SpacingMode::two_way ? 2.0 * pitch : pitch;
}

std::vector<double> make_theta_grid(std::size_t n, double half_width) {
  if (n == 0) throw InvalidArgument("theta grid needs at least one point");
  if (!(half_width >= 0.0 && half_width < kPi / 2))
    throw InvalidArgument("theta half width must lie in [0, pi/2)");
  std::vector<double> g(n, 0.0);
  if (n == 1) return g;
  for (std::size_t i = 0; i < n; ++i)
    g[i] = -half_width + 2.0 * half_width * static_cast<double>(i) /
                             static_cast<double>(n - 1);
  return g;
}

std::vector<cplx> steering_weights(std::size_t n_elements, double d0,
                                   double theta, double wavelength) {
  std::vector<cplx> w(n_elements);
  const double k = 2.0 * kPi / wavelength * d0 * std::sin(theta);
  for (std::size_t i = 0; i < n_elements; ++i)
    w[i] = std::polar(1.0, -k * static_cast<double>(i));
  return w;
}

RangeAngleMap beamform(const RangeProfileSet& profiles, double d0,
                       std::span<const double> theta_grid, double wavelength) {
  RangeAngleMap m;
  m.n_range = profiles.n_range;
  m.n_theta = theta_grid.size();
  m.n_slow = profiles.n_slow;
  m.range_axis = profiles.range_axis;
  m.theta_axis.assign(theta_grid.begin(), theta_grid.end());
  m.samples.assign(m.n_slow * m.n_range * m.n_theta, cplx{});
  for (std::size_t th = 0; th < m.n_theta; ++th) {
    const auto w = steering_weights(profiles.n_elements, d0, theta_grid[th], wavelength);
    for (std::size_t s = 0; s < m.n_slow; ++s)
      for (std::size_t r = 0; r < m.n_range; ++r) {
        cplx acc{};
        for (std::size_t e = 0; e < profiles.n_elements; ++e) acc += w[e] * profiles.at(e, s, r);
        m.samples[(s * m.n_range + r) * m.n_theta + th] = acc;
      }
  }
  return m;
}

Eigen::MatrixXd time_averaged_power(const RangeProfileSet& profiles, double d0,
                                    std::span<const double> theta_grid,
                                    double wavelength) {
  const auto E = static_cast<Eigen::Index>(profiles.n_elements);
  Eigen::MatrixXd power(profiles.n_range, theta_grid.size());
  if (profiles.n_slow == 0) {
    power.setZero();
    return power;
  }
  Eigen::MatrixXcd steer(E, static_cast<Eigen::Index>(theta_grid.size()));
  for (std::size_t th = 0; th < theta_grid.size(); ++th) {
    const auto w = steering_weights(profiles.n_elements, d0, theta_grid[th], wavelength);
    for (Eigen::Index e = 0; e < E; ++e) steer(e, static_cast<Eigen::Index>(th)) = w[e];
  }
  Eigen::VectorXcd x(E);
  for (std::size_t r = 0; r < profiles.n_range; ++r) {
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(E, E);
    for (std::size_t s = 0; s < profiles.n_slow; ++s) {
      for (Eigen::Index e = 0; e < E; ++e) x[e] = profiles.at(e, s, r);
      C.noalias() += x * x.adjoint();
    }
    C /= static_cast<double>(profiles.n_slow);
    // |w^T x|^2 averaged = w^T C conj(w)
    const Eigen::MatrixXcd CW = C * steer.conjugate();
    for (std::size_t th = 0; th < theta_grid.size(); ++th) {
      const auto c = static_cast<Eigen::Index>(th);
      power(r, c) = std::max(0.0, (steer.col(c).transpose() * CW.col(c)).value().real());
    }
  }
  return power;
}

Eigen::MatrixXd time_averaged_power(const RangeAngleMap& map) {
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(map.n_range, map.n_theta);
  if (map.n_slow == 0) return power;
  for (std::size_t s = 0; s < map.n_slow; ++s)
    for (std::size_t r = 0; r < map.n_range; ++r)
      for (std::size_t th = 0; th < map.n_theta; ++th) power(r, th) += std::norm(map.at(s, r, th));
  return power / static_cast<double>(map.n_slow);
}

PeakPixel select_peak_pixel(const Eigen::MatrixXd& power,
                            std::span<const double> range_axis,
                            std::span<const double> theta_axis) {
  if (power.size() == 0) throw InvalidArgument("empty power image");
  if (static_cast<std::size_t>(power.rows()) != range_axis.size() ||
      static_cast<std::size_t>(power.cols()) != theta_axis.size())
    throw InvalidArgument("power image and axes differ in size");
  PeakPixel best;
  bool have = false;
  // Rows ascend in range, so a strict '>' keeps the smaller range on ties.
  for (Eigen::Index r = 0; r < power.rows(); ++r) {
    for (Eigen::Index th = 0; th < power.cols(); ++th) {
      const double p = power(r, th);
      const bool better =
          !have || p > best.power ||
          (p == best.power && static_cast<std::size_t>(r) == best.range_index &&
           std::abs(theta_axis[th]) < std::abs(best.theta));
      if (better) {
        best = {static_cast<std::size_t>(r), static_cast<std::size_t>(th),
                range_axis[r], theta_axis[th], p};
        have = true;
      }
    }
  }
  return best;
}

PeakPixel select_peak_pixel(const RangeAngleMap& map) {
  return select_peak_pixel(time_averaged_power(map), map.range_axis, map.theta_axis);
}

std::vector<cplx> pixel_series(const RangeProfileSet& profiles, double d0,
                               std::size_t range_index, double theta,
                               double wavelength) {
  if (range_index >= profiles.n_range) throw InvalidArgument("range index out of range");
  const auto w = steering_weights(profiles.n_elements, d0, theta, wavelength);
  std::vector<cplx> out(profiles.n_slow);
  for (std::size_t s = 0; s < profiles.n_slow; ++s) {
    cplx acc{};
    for (std::size_t e = 0; e < profiles.n_elements; ++e) acc += w[e] * profiles.at(e, s, range_index);
    out[s] = acc;
  }
  return out;
}

std::vector<double> unwrap(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.size());
  if (wrapped.empty()) return out;
  out[0] = wrapped[0];
  for (std::size_t i = 1; i < wrapped.size(); ++i) {
    double d = wrapped[i] - wrapped[i - 1];
    d -= 2.0 * kPi * std::ceil((d - kPi) / (2.0 * kPi));
    out[i] = out[i - 1] + d;
  }
  return out;
}

std::vector<double> unwrap_phase(std::span<const cplx> series) {
  std::vector<double> ph(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i] == cplx{}) throw ZeroSample(i);
    ph[i] = std::arg(series[i]);
  }
  return unwrap(ph);
}

DisplacementWaveform displacement(std::span<const cplx> series,
                                  double wavelength, double rate, double t0) {
  if (!(wavelength > 0.0) || !(rate > 0.0))
    throw InvalidArgument("wavelength and rate must be > 0");
  DisplacementWaveform d;
  d.rate = rate;
  d.t0 = t0;
  d.values = unwrap_phase(series);
  const double k = wavelength / (4.0 * kPi);
  double mean = 0.0;
  for (double& v : d.values) {
    v *= k;
    mean += v;
  }
  if (!d.values.empty()) mean /= static_cast<double>(d.values.size());
  for (double& v : d.values) v -= mean;
  return d;
}

std::size_t window_samples(double seconds, double rate) {
  if (!(seconds >= 0.0) || !(rate > 0.0)) throw InvalidArgument("bad window");
  auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  if (n % 2 == 0) ++n;
  return n;
}

std::vector<double> moving_average(std::span<const double> x, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw InvalidArgument("window must be odd and >= 1");
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  const std::size_t h = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(n, i + h + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

DisplacementWaveform smooth_detrend(const DisplacementWaveform& wave,
                                    double smooth_window_s,
                                    double detrend_window_s) {
  if (!(wave.rate > 0.0)) throw InvalidArgument("waveform rate must be > 0");
  const double record = static_cast<double>(wave.values.size()) / wave.rate;
  if (!(smooth_window_s < record) || !(detrend_window_s < record))
    throw InvalidArgument("smoothing windows must be shorter than the record");
  DisplacementWaveform out = wave;
  out.values = moving_average(wave.values, window_samples(smooth_window_s, wave.rate));
  const auto trend = moving_average(out.values, window_samples(detrend_window_s, wave.rate));
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] -= trend[i];
  out.smoothed = true;
  return out;
}

}  // namespace defrad::dsp
