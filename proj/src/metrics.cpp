#include "defrad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "defrad/errors.hpp"

namespace defrad::metrics {

namespace {

double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

void check_lengths(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw LengthMismatch("waveform lengths differ (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
}

// Centred sum of squares, rejecting numerically constant input.
double centred_ss(std::span<const double> x, double m, const char* name) {
  double ss = 0.0, scale = 0.0;
  for (double v : x) {
    ss += (v - m) * (v - m);
    scale = std::max(scale, std::abs(v));
  }
  const double eps = 1e-12 * scale;
  if (!(ss > static_cast<double>(x.size()) * eps * eps))
    throw ZeroVariance(std::string("waveform ") + name + " has zero variance");
  return ss;
}

}  // namespace

double rms_error(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b);
  if (a.empty()) throw InvalidArgument("rms_error needs at least one sample");
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - ma) - (b[i] - mb);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double pearson(std::span<const double> a, std::span<const double> b) {
  check_lengths(a, b);
  if (a.size() < 2) throw InvalidArgument("pearson needs at least two samples");
  const double ma = mean(a), mb = mean(b);
  const double saa = centred_ss(a, ma, "a");
  const double sbb = centred_ss(b, mb, "b");
  double sab = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sab += (a[i] - ma) * (b[i] - mb);
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

XCorr max_crosscorr(std::span<const double> a, std::span<const double> b,
                    double max_lag_s, double rate) {
  check_lengths(a, b);
  if (!(rate > 0.0) || !(max_lag_s >= 0.0)) throw InvalidArgument("bad lag search range");
  const auto n = static_cast<long>(a.size());
  const long max_lag = static_cast<long>(std::floor(max_lag_s * rate + 1e-9));
  if (max_lag > n - 2) throw InvalidArgument("max_lag must be shorter than the record");

  XCorr best;
  best.corr = -std::numeric_limits<double>::infinity();
  for (long step = 0; step <= 2 * max_lag; ++step) {
    const long lag = step == 0 ? 0 : (step % 2 ? (step + 1) / 2 : -(step / 2));
    const long lo = std::max(0L, -lag);
    const long hi = std::min(n, n - lag);
    const double c = pearson(a.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)),
                             b.subspan(static_cast<std::size_t>(lo + lag), static_cast<std::size_t>(hi - lo)));
    if (c > best.corr) {
      best.corr = c;
      best.lag_samples = lag;
    }
  }
  best.lag_s = static_cast<double>(best.lag_samples) / rate;
  return best;
}

MetricReport compare(std::span<const double> recovered,
                     std::span<const double> truth, double rate,
                     double max_lag_s, bool smoothed) {
  MetricReport r;
  r.smoothed = smoothed;
  r.rms_error = rms_error(recovered, truth);
  r.pcc = pearson(recovered, truth);
  const auto x = max_crosscorr(recovered, truth, max_lag_s, rate);
  r.max_xcorr = x.corr;
  r.lag_s = x.lag_s;
  return r;
}

nlohmann::json to_json(const MetricReport& r, double rms_scale) {
  return {{"rms_error", r.rms_error * rms_scale},
          {"max_xcorr", r.max_xcorr},
          {"lag_s", r.lag_s},
          {"pcc", r.pcc},
          {"smoothed", r.smoothed}};
}

MetricReport iq_magnitude_compare(const radar::IFCube& a, const radar::IFCube& b,
                                  const dsp::PeakPixel& pixel,
                                  const dsp::RangeProfileOptions& opt, double d0,
                                  double wavelength, double max_lag_s) {
  if (a.n_slow != b.n_slow || a.n_fast != b.n_fast || a.n_elements != b.n_elements ||
      a.fs_fast != b.fs_fast || a.gamma != b.gamma || a.slow_rate != b.slow_rate)
    throw InvalidArgument("cubes do not share grids");
  auto magnitude = [&](const radar::IFCube& c) {
    const auto prof = dsp::range_profile(c, opt);
    std::size_t best = 0;
    for (std::size_t r = 1; r < prof.n_range; ++r)
      if (std::abs(prof.range_axis[r] - pixel.range) <
          std::abs(prof.range_axis[best] - pixel.range))
        best = r;
    const auto s = dsp::pixel_series(prof, d0, best, pixel.theta, wavelength);
    std::vector<double> m(s.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) sum += m[i] = std::abs(s[i]);
    if (sum > 0.0)
      for (double& v : m) v *= static_cast<double>(m.size()) / sum;
    return m;
  };
  const auto ma = magnitude(a);
  const auto mb = magnitude(b);
  return compare(ma, mb, a.slow_rate, max_lag_s, false);
}

}  // namespace defrad::metrics
