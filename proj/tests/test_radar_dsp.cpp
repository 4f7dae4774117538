#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include "defrad/errors.hpp"
#include "defrad/radar_dsp.hpp"
#include "defrad/radar_model.hpp"

using namespace defrad;
using namespace defrad::dsp;

namespace {

constexpr double kC0 = 2.99792458e8;
constexpr double kPi = std::numbers::pi;

const radar::VirtualArray kArray =
    radar::build_virtual_array(3, 7.6e-3, 4, 1.9e-3, Point3::Zero(), Vec3::UnitX());

// Point scatterer at `p`, optionally moving along `dir` by motion(t).
radar::IFCube point_cube(const Point3& p, double duration,
                         const std::function<double(double)>& motion = {},
                         const Vec3& dir = Vec3::UnitZ()) {
  radar::ChirpParams ch;
  const auto grid = radar::make_slow_grid(0.0, duration, ch.slow_rate);
  const double dt = 1.0 / 50.0;
  const auto n = static_cast<std::size_t>(duration / dt) + 2;
  radar::ScatterCenter c;
  c.dt = dt;
  c.range.assign(kArray.size(), std::vector<double>(n));
  c.amplitude.assign(kArray.size(), std::vector<double>{1.0});
  for (std::size_t e = 0; e < kArray.size(); ++e)
    for (std::size_t s = 0; s < n; ++s) {
      const double m = motion ? motion(s * dt) : 0.0;
      c.range[e][s] = (p + m * dir - kArray.elements[e].phase_center).norm();
    }
  return radar::synth_if_conventional(std::vector<radar::ScatterCenter>{c}, ch, grid, kArray.size());
}

double d0() { return beam_spacing(kArray, SpacingMode::two_way); }

double wavelength() { return radar::ChirpParams{}.wavelength(); }

std::size_t argmax_range(const RangeProfileSet& p, std::size_t e, std::size_t s) {
  std::size_t best = 0;
  for (std::size_t r = 1; r < p.n_range; ++r)
    if (std::abs(p.at(e, s, r)) > std::abs(p.at(e, s, best))) best = r;
  return best;
}

}  // namespace

TEST_CASE("range profile of a static scatterer") {
  const auto cube = point_cube(Point3(0, 0, 0.8), 0.05);
  const auto prof = range_profile(cube);
  const std::size_t best = argmax_range(prof, 0, 0);
  std::size_t nearest = 0;
  for (std::size_t r = 0; r < prof.n_range; ++r)
    if (std::abs(prof.range_axis[r] - 0.8) < std::abs(prof.range_axis[nearest] - 0.8)) nearest = r;
  CHECK(std::abs(static_cast<long>(best) - static_cast<long>(nearest)) <= 1);

  radar::IFCube zero = cube;
  std::fill(zero.samples.begin(), zero.samples.end(), cplx{});
  for (const auto& v : range_profile(zero).samples) CHECK(v == cplx{});
}

TEST_CASE("rectangular window first null at c / 2B") {
  const auto cube = point_cube(Point3(0, 0, 0.8), 0.0);
  RangeProfileOptions opt;
  opt.window = Window::rectangular;
  opt.zero_pad = 32;
  const auto prof = range_profile(cube, opt);
  const std::size_t pk = argmax_range(prof, 0, 0);
  std::size_t r = pk;
  while (r + 1 < prof.n_range && std::abs(prof.at(0, 0, r + 1)) < std::abs(prof.at(0, 0, r))) ++r;
  const double null_dist = prof.range_axis[r] - prof.range_axis[pk];
  const double want = kC0 / (2.0 * 3.6e9);
  CHECK(want == doctest::Approx(0.0416).epsilon(1e-3));
  CHECK(std::abs(null_dist - want) <= 1.5 * (prof.range_axis[1] - prof.range_axis[0]));
}

TEST_CASE("Parseval with a rectangular window and no padding") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<cplx> x(256);
  for (auto& v : x) v = cplx(g(rng), g(rng));
  const auto X = fast_time_spectrum(x, Window::rectangular, 1);
  double ex = 0.0, eX = 0.0;
  for (const auto& v : x) ex += std::norm(v);
  for (const auto& v : X) eX += std::norm(v);
  CHECK(std::abs(eX / static_cast<double>(x.size()) - ex) / ex < 1e-9);

  const auto w = window_coefficients(Window::hann, 5);
  CHECK(w[0] == doctest::Approx(0.0));
  CHECK(w[2] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("beamforming") {
  const double lam = wavelength();
  const auto grid = make_theta_grid(181, kPi / 4.0);
  CHECK(grid.front() == doctest::Approx(-kPi / 4.0));
  CHECK(grid[90] == doctest::Approx(0.0));
  const Point3 mid = kArray.elements.front().phase_center * 0.5 + kArray.elements.back().phase_center * 0.5;

  for (double deg : {0.0, 10.0, -17.0}) {
    const double th = deg * kPi / 180.0;
    // Positive theta lies on the -axis side of the array.
    const auto cube = point_cube(mid + 0.8 * Vec3(-std::sin(th), 0.0, std::cos(th)), 0.0);
    const auto prof = range_profile(cube);
    const auto power = time_averaged_power(prof, d0(), grid, lam);
    const auto px = select_peak_pixel(power, prof.range_axis, grid);
    CHECK(std::abs(px.theta - th) <= (grid[1] - grid[0]) + 1e-12);
  }

  // theta = 0: plain channel sum; a single-angle grid gives the same.
  const auto cube = point_cube(mid + Vec3(0.05, 0.01, 0.75), 0.03);
  const auto prof = range_profile(cube);
  const std::vector<double> zero{0.0};
  const auto m = beamform(prof, d0(), zero, lam);
  for (std::size_t s = 0; s < prof.n_slow; ++s)
    for (std::size_t r = 0; r < prof.n_range; r += 7) {
      cplx sum{};
      for (std::size_t e = 0; e < prof.n_elements; ++e) sum += prof.at(e, s, r);
      CHECK(m.at(s, r, 0) == sum);
    }

  // Covariance route equals the explicit map.
  const auto few = make_theta_grid(9, 0.5);
  const auto pa = time_averaged_power(prof, d0(), few, lam);
  const auto pb = time_averaged_power(beamform(prof, d0(), few, lam));
  CHECK((pa - pb).norm() / pb.norm() < 1e-10);

  CHECK_THROWS_AS(beam_spacing(radar::build_virtual_array(2, 2e-3, 2, 3e-3, Point3::Zero(),
                                                          Vec3::UnitX()),
                               SpacingMode::pitch),
                  NonuniformArray);
  CHECK(beam_spacing(kArray, SpacingMode::pitch) == doctest::Approx(0.95e-3));
  CHECK(beam_spacing(kArray, SpacingMode::two_way) == doctest::Approx(1.9e-3));
}

TEST_CASE("peak pixel selection") {
  const std::vector<double> ranges{0.6, 0.7, 0.8, 0.9};
  const std::vector<double> thetas{-0.2, 0.0, 0.2};
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(4, 3);
  p(1, 2) = 5.0;
  p(3, 1) = 5.0;
  auto px = select_peak_pixel(p, ranges, thetas);
  CHECK(px.range == 0.7);
  p(1, 0) = 5.0;
  px = select_peak_pixel(p, ranges, thetas);
  CHECK(px.range_index == 1);
  p(1, 1) = 5.0;
  CHECK(select_peak_pixel(p, ranges, thetas).theta_index == 1);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd q(30, 11);
  for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = u(rng);
  std::vector<double> ra(30), th(11);
  for (int i = 0; i < 30; ++i) ra[i] = 0.5 + 0.01 * i;
  for (int i = 0; i < 11; ++i) th[i] = -0.5 + 0.1 * i;
  Eigen::Index br = 0, bt = 0;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index t = 0; t < q.cols(); ++t)
      if (q(r, t) > q(br, bt)) br = r, bt = t;
  px = select_peak_pixel(q, ra, th);
  CHECK(px.range_index == static_cast<std::size_t>(br));
  CHECK(px.theta_index == static_cast<std::size_t>(bt));
}

TEST_CASE("peak pixel ignores slow-time order") {
  const auto cube = point_cube(Point3(0.01, 0, 0.8), 0.5, [](double t) { return 0.002 * t; });
  auto shuffled = cube;
  std::vector<std::size_t> perm(cube.n_slow);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = (i * 7 + 3) % perm.size();
  for (std::size_t e = 0; e < cube.n_elements; ++e)
    for (std::size_t s = 0; s < cube.n_slow; ++s)
      std::copy_n(cube.chirp(e, perm[s]).begin(), cube.n_fast, shuffled.chirp(e, s).begin());
  const auto grid = make_theta_grid(61, kPi / 4.0);
  const auto a = range_profile(cube), b = range_profile(shuffled);
  const auto pa = select_peak_pixel(time_averaged_power(a, d0(), grid, wavelength()), a.range_axis, grid);
  const auto pb = select_peak_pixel(time_averaged_power(b, d0(), grid, wavelength()), b.range_axis, grid);
  CHECK(pa.range_index == pb.range_index);
  CHECK(pa.theta_index == pb.theta_index);
}

TEST_CASE("phase unwrapping") {
  const std::vector<double> w{0.0, kPi / 2, kPi, -kPi / 2};
  const auto u = unwrap(w);
  CHECK(u[3] == doctest::Approx(3 * kPi / 2));
  CHECK(u[2] == doctest::Approx(kPi));
  const std::vector<double> c(10, 1.3);
  for (double v : unwrap(c)) CHECK(v == 1.3);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> step(-3.0, 3.0);
  std::vector<double> path{0.4}, wrapped;
  for (int i = 0; i < 500; ++i) path.push_back(path.back() + step(rng));
  for (double p : path) wrapped.push_back(std::remainder(p, 2 * kPi));
  const auto back = unwrap(wrapped);
  const double k = (back[0] - path[0]) / (2 * kPi);
  CHECK(std::abs(k - std::round(k)) < 1e-9);
  for (std::size_t i = 0; i < path.size(); ++i) CHECK(std::abs(back[i] - path[i] - (back[0] - path[0])) < 1e-9);

  const std::vector<cplx> z{cplx(1, 0), cplx(0, 0)};
  CHECK_THROWS_AS(unwrap_phase(z), ZeroSample);
}

TEST_CASE("displacement from phase") {
  const double lam = 3.8e-3;
  std::vector<cplx> ramp;
  for (int i = 0; i <= 100; ++i) ramp.push_back(std::polar(1.0, 2 * kPi * i / 100.0));
  const auto d = displacement(ramp, lam, 100.0);
  const auto [lo, hi] = std::minmax_element(d.values.begin(), d.values.end());
  CHECK(*hi - *lo == doctest::Approx(lam / 2).epsilon(1e-12));
  double mean = 0.0;
  for (double v : d.values) mean += v;
  CHECK(std::abs(mean) < 1e-15);

  const std::vector<cplx> still(20, std::polar(2.0, 0.7));
  for (double v : displacement(still, lam, 100.0).values) CHECK(std::abs(v) < 1e-18);
}

TEST_CASE("smoothing and detrending") {
  DisplacementWaveform c;
  c.rate = 100.0;
  c.values.assign(2000, 0.004);
  for (double v : smooth_detrend(c, 0.3, 10.0).values) CHECK(std::abs(v) < 1e-15);

  // Interior gain of the 0.3 s moving average on a 0.25 Hz sinusoid.
  DisplacementWaveform s;
  s.rate = 100.0;
  for (int i = 0; i < 4000; ++i) s.values.push_back(std::sin(2 * kPi * 0.25 * i / 100.0));
  const auto W = window_samples(0.3, 100.0);
  CHECK(W % 2 == 1);
  const auto sm = moving_average(s.values, W);
  const double wsec = static_cast<double>(W) / 100.0;
  const double gain_closed = std::sin(kPi * 0.25 * wsec) / (kPi * 0.25 * wsec);
  double gmax = 0.0;
  for (std::size_t i = 1000; i < 3000; ++i) gmax = std::max(gmax, std::abs(sm[i]));
  CHECK(gmax == doctest::Approx(gain_closed).epsilon(2e-3));
  CHECK(1.0 - gain_closed < 0.02);

  DisplacementWaveform n;
  n.rate = 100.0;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int i = 0; i < 3000; ++i) n.values.push_back(g(rng));
  const auto out = smooth_detrend(n, 0.3, 10.0);
  CHECK(out.smoothed);
  auto var = [](const std::vector<double>& v) {
    double m = 0.0, q = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    for (double x : v) q += (x - m) * (x - m);
    return q / static_cast<double>(v.size());
  };
  CHECK(var(out.values) < var(n.values));
}

TEST_CASE("closed loop: injected radial sinusoid") {
  const Point3 p(0.005, 0.0, 0.8);
  const Vec3 dir = (p - kArray.elements[5].phase_center).normalized();
  auto run = [&](double amp) {
    const auto cube = point_cube(p, 8.0, [&](double t) { return amp * std::sin(2 * kPi * 0.25 * t); }, dir);
    const auto prof = range_profile(cube);
    const auto grid = make_theta_grid(61, kPi / 4.0);
    const auto px = select_peak_pixel(time_averaged_power(prof, d0(), grid, wavelength()), prof.range_axis, grid);
    const auto series = pixel_series(prof, d0(), px.range_index, px.theta, wavelength());
    return displacement(series, wavelength(), prof.slow_rate).values;
  };
  const auto d1 = run(1e-3);
  const auto [lo, hi] = std::minmax_element(d1.begin(), d1.end());
  CHECK((*hi - *lo) / 2.0 == doctest::Approx(1e-3).epsilon(0.05));
  // Range grows when the point moves away from the array: d follows +motion.
  CHECK(d1[100] > 0.0);

  const auto d2 = run(0.5e-3);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    num += d2[i] * d1[i];
    den += d1[i] * d1[i];
  }
  CHECK(num / den == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("option parsing") {
  CHECK(parse_window("hann") == Window::hann);
  CHECK(parse_window("rectangular") == Window::rectangular);
  CHECK_THROWS_AS(parse_window("kaiser"), InvalidArgument);
  CHECK(parse_spacing_mode(to_string(SpacingMode::pitch)) == SpacingMode::pitch);
}
