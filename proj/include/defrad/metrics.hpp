#ifndef DEFRAD_METRICS_HPP
#define DEFRAD_METRICS_HPP

#include <span>

#include <json.hpp>

#include "defrad/radar_dsp.hpp"
#include "defrad/radar_model.hpp"

namespace defrad::metrics {

/// Waveform agreement. rms_error is in the waveforms' unit (metres for d(t)).
struct MetricReport {
  double rms_error = 0.0;
  double max_xcorr = 0.0;
  double lag_s = 0.0;
  double pcc = 0.0;
  bool smoothed = false;
};

/// sqrt(mean((a - b)^2)) after removing each mean. Throws LengthMismatch.
double rms_error(std::span<const double> a, std::span<const double> b);

/// Pearson correlation. Throws LengthMismatch, InvalidArgument (n < 2) and
/// ZeroVariance for a numerically constant input.
double pearson(std::span<const double> a, std::span<const double> b);

struct XCorr {
  double corr = 0.0;
  double lag_s = 0.0;
  long lag_samples = 0;
};

/**
 * @brief Max of pearson(a[n], b[n + l]) over |l| <= max_lag_s * rate.
 *
 * Each lag uses the overlapping segment. Lags are scanned 0, +1, -1, +2, ...
 * and only a strictly larger value replaces the best, so ties go to the
 * smallest |l| (positive first). A positive lag means b is delayed w.r.t. a.
 */
XCorr max_crosscorr(std::span<const double> a, std::span<const double> b,
                    double max_lag_s, double rate);

MetricReport compare(std::span<const double> recovered,
                     std::span<const double> truth, double rate,
                     double max_lag_s, bool smoothed);

nlohmann::json to_json(const MetricReport& r, double rms_scale = 1e3);

/**
 * @brief Compares |S(r0, theta0, t)| of two cubes at one pixel.
 *
 * Both cubes run the range FFT and beamformer with `opt`, `d0` and
 * `wavelength`. Magnitude series are normalised to unit mean before the RMS.
 */
MetricReport iq_magnitude_compare(const radar::IFCube& a, const radar::IFCube& b,
                                  const dsp::PeakPixel& pixel,
                                  const dsp::RangeProfileOptions& opt, double d0,
                                  double wavelength, double max_lag_s);

}  // namespace defrad::metrics

#endif  // DEFRAD_METRICS_HPP
