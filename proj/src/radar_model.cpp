#include "defrad/radar_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "defrad/errors.hpp"
#include "defrad/kdtree.hpp"

namespace defrad::radar {

namespace {

constexpr double kC = em::kSpeedOfLight;

IFCube make_cube(const ChirpParams& chirp, std::span<const double> slow_grid,
                 std::size_t n_elements) {
  IFCube cube;
  cube.n_elements = n_elements;
  cube.n_fast = chirp.n_fast;
  cube.n_slow = slow_grid.size();
  cube.fs_fast = chirp.fs_fast;
  cube.slow_rate = chirp.slow_rate;
  cube.f_min = chirp.f_min;
  cube.gamma = chirp.gamma();
  cube.slow_axis.assign(slow_grid.begin(), slow_grid.end());
  cube.samples.assign(n_elements * cube.n_slow * cube.n_fast, cplx{});
  return cube;
}

// row[m] += v0 exp(j m dphi). Phasor recurrence split into independent lanes
// so the inner loop vectorises; lane starts are exact polar evaluations.
void accumulate_tone(std::span<cplx> row, cplx v0, double dphi) {
  constexpr std::size_t L = 8;
  double re[L], im[L];
  for (std::size_t l = 0; l < L; ++l) {
    const cplx v = v0 * std::polar(1.0, dphi * static_cast<double>(l));
    re[l] = v.real();
    im[l] = v.imag();
  }
  const double cr = std::cos(dphi * L), ci = std::sin(dphi * L);
  double* out = reinterpret_cast<double*>(row.data());
  const std::size_t n = row.size(), nb = n / L * L;
  for (std::size_t m = 0; m < nb; m += L) {
    for (std::size_t l = 0; l < L; ++l) {
      out[2 * (m + l)] += re[l];
      out[2 * (m + l) + 1] += im[l];
      const double t = re[l] * cr - im[l] * ci;
      im[l] = re[l] * ci + im[l] * cr;
      re[l] = t;
    }
  }
  for (std::size_t m = nb; m < n; ++m) {
    out[2 * m] += re[m - nb];
    out[2 * m + 1] += im[m - nb];
  }
}

// Shared kernel of both synthesis modes: identical arithmetic for identical
// inputs, so constant amplitude series reproduce the time-invariant result.
IFCube synthesize(std::span<const ScatterCenter> centers,
                  const ChirpParams& chirp, std::span<const double> slow_grid,
                  std::size_t n_elements, bool allow_series) {
  chirp.validate();
  for (const auto& c : centers) {
    c.validate(n_elements);
    if (!allow_series)
      for (const auto& a : c.amplitude)
        if (a.size() != 1)
          throw InvalidArgument("time-invariant synthesis needs one amplitude per element");
  }
  IFCube cube = make_cube(chirp, slow_grid, n_elements);
  const double phase_per_m = 4.0 * std::numbers::pi * chirp.f_min / kC;
  const double step_per_m = 4.0 * std::numbers::pi * chirp.gamma() / (kC * chirp.fs_fast);

  std::vector<double> amp(slow_grid.size());
  for (std::size_t e = 0; e < n_elements; ++e) {
    for (const auto& c : centers) {
      const auto R = resample_cubic(c.t0, c.dt, c.range[e], slow_grid);
      const auto& a = c.amplitude[e];
      if (a.size() == 1)
        std::fill(amp.begin(), amp.end(), a[0]);
      else
        amp = resample_linear(c.t0, c.dt, a, slow_grid);
      for (std::size_t s = 0; s < slow_grid.size(); ++s) {
        const double r = R[s];
        accumulate_tone(cube.chirp(e, s), amp[s] * c.eta * std::polar(1.0, phase_per_m * r),
                        step_per_m * r);
      }
    }
  }
  return cube;
}

}  // namespace

double ChirpParams::wavelength() const { return kC / center_frequency(); }

double ChirpParams::range_bin() const {
  return kC * fs_fast / (2.0 * gamma() * static_cast<double>(n_fast));
}

void ChirpParams::validate() const {
  if (!(f_min > 0.0 && bandwidth > 0.0 && chirp_duration > 0.0 && fs_fast > 0.0 &&
        slow_rate > 0.0))
    throw InvalidArgument("chirp parameters must be positive");
  if (n_fast < 2) throw InvalidArgument("n_fast must be >= 2");
  if (static_cast<double>(n_fast) / fs_fast > chirp_duration * (1.0 + 1e-9))
    throw InvalidArgument("fast-time samples exceed the chirp duration");
  if (chirp_duration * slow_rate > 1.0)
    throw InvalidArgument("chirps overlap at this slow rate");
}

std::vector<double> VirtualArray::spacings() const {
  std::vector<double> proj;
  proj.reserve(elements.size());
  for (const auto& e : elements) proj.push_back((e.phase_center - origin).dot(axis));
  std::vector<double> out;
  for (std::size_t i = 1; i < proj.size(); ++i) out.push_back(proj[i] - proj[i - 1]);
  return out;
}

double VirtualArray::uniform_pitch() const {
  const auto d = spacings();
  if (d.empty()) return 0.0;
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= static_cast<double>(d.size());
  if (var > 1e-12 || !(mean > 0.0))
    throw NonuniformArray("virtual phase centres are not uniformly spaced");
  return mean;
}

VirtualArray build_virtual_array(std::size_t n_tx, double tx_pitch,
                                 std::size_t n_rx, double rx_pitch,
                                 const Point3& origin, const Vec3& axis) {
  if (n_tx == 0 || n_rx == 0) throw InvalidArgument("need at least one Tx and one Rx");
  if (!(tx_pitch > 0.0 && rx_pitch > 0.0)) throw InvalidArgument("pitches must be > 0");
  if (std::abs(axis.norm() - 1.0) > 1e-9) throw InvalidArgument("axis must be a unit vector");
  VirtualArray a;
  a.origin = origin;
  a.axis = axis;
  for (std::size_t i = 0; i < n_tx; ++i)
    a.tx_positions.push_back(origin + static_cast<double>(i) * tx_pitch * axis);
  for (std::size_t j = 0; j < n_rx; ++j)
    a.rx_positions.push_back(origin + static_cast<double>(j) * rx_pitch * axis);
  for (std::size_t i = 0; i < n_tx; ++i)
    for (std::size_t j = 0; j < n_rx; ++j)
      a.elements.push_back({i, j, 0.5 * (a.tx_positions[i] + a.rx_positions[j])});
  return a;
}

void ScatterCenter::validate(std::size_t n_elements) const {
  if (range.size() != n_elements || amplitude.size() != n_elements)
    throw InvalidArgument("scatter centre " + std::to_string(index) +
                          ": per-element series count mismatch");
  if (!(dt > 0.0)) throw InvalidArgument("scatter centre time step must be > 0");
  if (std::abs(std::abs(eta) - 1.0) > 1e-12) throw InvalidArgument("|eta| must be 1");
  for (std::size_t e = 0; e < n_elements; ++e) {
    if (range[e].empty()) throw InvalidArgument("empty range trajectory");
    for (double r : range[e])
      if (!(r > 0.0) || !std::isfinite(r))
        throw InvalidArgument("range trajectories must be positive and finite");
    if (amplitude[e].size() != 1 && amplitude[e].size() != range[e].size())
      throw InvalidArgument("amplitude series length differs from trajectory length");
  }
}

std::vector<double> IFCube::fast_axis() const {
  std::vector<double> t(n_fast);
  for (std::size_t m = 0; m < n_fast; ++m) t[m] = static_cast<double>(m) / fs_fast;
  return t;
}

std::vector<double> make_slow_grid(double t_begin, double t_end, double rate) {
  if (!(rate > 0.0) || !(t_end >= t_begin)) throw InvalidArgument("bad slow grid");
  const auto n = static_cast<std::size_t>(std::floor((t_end - t_begin) * rate + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = t_begin + static_cast<double>(i) / rate;
  return g;
}

std::vector<double> resample_linear(double t0, double dt,
                                    std::span<const double> values,
                                    std::span<const double> query) {
  if (values.empty()) throw InvalidArgument("cannot resample an empty series");
  std::vector<double> out(query.size());
  const double last = static_cast<double>(values.size() - 1);
  for (std::size_t i = 0; i < query.size(); ++i) {
    const double u = std::clamp((query[i] - t0) / dt, 0.0, last);
    const auto j = std::min(static_cast<std::size_t>(u), values.size() - 1);
    if (j + 1 >= values.size()) {
      out[i] = values[j];
    } else {
      const double f = u - static_cast<double>(j);
      out[i] = values[j] + f * (values[j + 1] - values[j]);
    }
  }
  return out;
}

std::vector<double> resample_cubic(double t0, double dt,
                                   std::span<const double> values,
                                   std::span<const double> query) {
  if (values.size() < 5) return resample_linear(t0, dt, values, query);
  boost::math::interpolators::cardinal_cubic_b_spline<double> spline(values.data(), values.size(), t0, dt);
  const double t_last = t0 + dt * static_cast<double>(values.size() - 1);
  std::vector<double> out(query.size());
  for (std::size_t i = 0; i < query.size(); ++i)
    out[i] = spline(std::clamp(query[i], t0, t_last));
  return out;
}

std::vector<std::size_t> select_centers_conventional(
    const em::ScatteringMap& map, std::span<const Point3> points,
    double theta_scat) {
  const auto& mag = map.magnitudes;
  if (mag.empty()) throw InvalidArgument("empty scattering map");
  if (points.size() != mag.size()) throw InvalidArgument("map and points differ in length");
  if (!(theta_scat > 0.0 && theta_scat <= 1.0))
    throw InvalidArgument("theta_scat must lie in (0, 1]");
  if (!(map.eye_radius > 0.0)) throw InvalidArgument("map eye radius must be > 0");
  const double peak = *std::max_element(mag.begin(), mag.end());
  const double floor = theta_scat * peak * peak;

  KdTree tree(points);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < mag.size(); ++k) {
    if (!(mag[k] * mag[k] >= floor) || mag[k] == 0.0) continue;
    bool is_max = true;
    for (auto j : tree.radius(points[k], map.eye_radius)) {
      if (j != k && !(mag[k] > mag[j])) {
        is_max = false;
        break;
      }
    }
    if (is_max) out.push_back(k);
  }
  if (out.empty())
    throw EmptySelection("no local maximum reaches theta_scat = " + std::to_string(theta_scat));
  return out;
}

TrackedCenters track_centers_conventional(
    std::span<const PointCloudFrame> frames,
    std::span<const Point3> averaged_points,
    std::span<const std::size_t> centers, const Point3& phase_center) {
  TrackedCenters out;
  out.matched.assign(centers.size(), std::vector<std::size_t>(frames.size()));
  out.range.assign(centers.size(), std::vector<double>(frames.size()));
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (centers[c] >= averaged_points.size())
      throw InvalidArgument("centre index out of range");
    const Vec3 los = (averaged_points[centers[c]] - phase_center).normalized();
    for (std::size_t f = 0; f < frames.size(); ++f) {
      const auto& pts = frames[f].points;
      if (pts.empty()) throw InvalidArgument("empty frame");
      std::size_t best = 0;
      double best_cos = -2.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const Vec3 d = pts[i] - phase_center;
        const double n = d.norm();
        if (!(n > 0.0)) continue;
        const double cs = los.dot(d) / n;
        if (cs > best_cos) {
          best_cos = cs;
          best = i;
        }
      }
      out.matched[c][f] = best;
      out.range[c][f] = (pts[best] - phase_center).norm();
    }
  }
  return out;
}

std::vector<std::size_t> select_index_set(
    std::span<const std::vector<double>> maps, double theta_thresh) {
  if (maps.empty()) throw InvalidArgument("no maps");
  if (!(theta_thresh > 0.0 && theta_thresh <= 1.0))
    throw InvalidArgument("theta_thresh must lie in (0, 1]");
  const std::size_t n = maps.front().size();
  double peak = 0.0;
  for (const auto& m : maps) {
    if (m.size() != n) throw InvalidArgument("maps differ in indexing");
    for (double v : m) peak = std::max(peak, v * v);
  }
  std::vector<std::size_t> out;
  if (peak > 0.0) {
    const double floor = theta_thresh * peak;
    for (std::size_t k = 0; k < n; ++k) {
      for (const auto& m : maps) {
        const double p = m[k] * m[k];
        if (p > 0.0 && p >= floor) {
          out.push_back(k);
          break;
        }
      }
    }
  }
  if (out.empty()) throw EmptySelection("no point reaches theta_thresh");
  return out;
}

IFCube synth_if_conventional(std::span<const ScatterCenter> centers,
                             const ChirpParams& chirp,
                             std::span<const double> slow_grid,
                             std::size_t n_elements) {
  return synthesize(centers, chirp, slow_grid, n_elements, false);
}

IFCube synth_if_proposed(std::span<const ScatterCenter> centers,
                         const ChirpParams& chirp,
                         std::span<const double> slow_grid,
                         std::size_t n_elements) {
  return synthesize(centers, chirp, slow_grid, n_elements, true);
}

}  // namespace defrad::radar
