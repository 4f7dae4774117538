#ifndef DEFRAD_EM_SCATTER_HPP
#define DEFRAD_EM_SCATTER_HPP

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "defrad/geometry.hpp"

namespace defrad::em {

using cplx = std::complex<double>;
using CVec3 = Eigen::Vector3cd;

inline constexpr double kSpeedOfLight = 2.99792458e8;  ///< [m/s]
inline constexpr double kMu0 = 1.25663706212e-6;       ///< [H/m]

/// Free-space constants at one frequency.
struct EmConstants {
  double frequency = 0.0;  ///< [Hz]
  double k0 = 0.0;         ///< [rad/m]
  double omega = 0.0;      ///< [rad/s]
  double mu = kMu0;
  double c = kSpeedOfLight;

  static EmConstants at(double frequency_hz);
  double wavelength() const { return c / frequency; }
};

/// Infinitesimal electric dipole.
struct DipoleSource {
  Point3 position = Point3::Zero();
  Vec3 axis = Vec3::UnitZ();  ///< unit vector
  double moment = 1.0;        ///< I0 * l [A m]

  void validate() const;
};

struct SurfaceCurrents {
  SurfaceSampling sampling;
  std::vector<CVec3> currents;  ///< [A/m], one per sample
};

/// Eye-function-localised field magnitudes for every surface sample.
struct ScatteringMap {
  Point3 observation_point = Point3::Zero();
  std::vector<double> magnitudes;  ///< [V/m], aligned with the cloud
  double eye_radius = 0.0;         ///< a0 [m]
};

/**
 * @brief Magnetic field of the dipole at r_S.
 *
 * H = H_phi * phi_hat with
 * H_phi = (j k m sin(theta) / (4 pi r)) (1 + 1/(j k r)) exp(-j k r),
 * theta the polar angle from the dipole axis.
 * Throws SourceCoincident when r_S is the dipole position.
 */
CVec3 incident_h_field(const DipoleSource& source, const EmConstants& consts,
                       const Point3& r_s);

/// J = 2 n x H (no shadowing test; see induce_currents).
CVec3 surface_current(const Vec3& normal, const CVec3& h_inc);

/// True if the sample faces the source: n . (r_S - source) < 0.
bool is_lit(const Vec3& normal, const Point3& r_s, const Point3& source);

/// PO currents on every sample; shadowed samples get J = 0 when `shadowing`.
SurfaceCurrents induce_currents(const SurfaceSampling& sampling,
                                const DipoleSource& source,
                                const EmConstants& consts,
                                bool shadowing = true);

/// Free-space dyadic Green's function applied to J, for exp(-jkR) phasors:
/// G.J = g [(1 - j/kR - 1/(kR)^2) J - (1 - 3j/kR - 3/(kR)^2)(R.J) R],
/// g = exp(-jkR) / (4 pi R), R = (r - r_S)/|r - r_S|.
CVec3 dyadic_green_apply(const Point3& r, const Point3& r_s, const CVec3& j,
                         double k0);

/**
 * @brief E(r) = -j omega mu sum_k weight_k area_k G(r; r_k).J_k.
 *
 * `weights` may be empty (all ones). Samples with zero weight are skipped.
 * Throws NearFieldSingular if a contributing sample is closer than
 * lambda / (2 pi) to r.
 */
CVec3 radiate(const SurfaceCurrents& currents, const EmConstants& consts,
              const Point3& r, std::span<const double> weights = {});

/// Raised-cosine eye function: (cos(pi d / a0) + 1) / 2 for d <= a0, else 0.
double eye_weight(const Point3& r_s, const Point3& r0, double a0);

/// |E(r)| with the eye function centred at r0.
double scattered_field_magnitude(const SurfaceCurrents& currents,
                                 const EmConstants& consts, const Point3& r,
                                 const Point3& r0, double a0);

/// Eye-window neighbour lists (CSR layout): for centre i the samples within
/// a0 and their eye weights.
struct EyeWindows {
  double a0 = 0.0;
  std::vector<std::uint32_t> offsets;  ///< size n + 1
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;

  std::size_t size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// Windows centred on every sample.
EyeWindows build_eye_windows(std::span<const Point3> points, double a0);

/// Windows centred on points[centres[i]]; integration still covers all points.
/// With margin > 0 every sample within a0 + margin is kept (weight possibly
/// 0) so that reweight_eye_windows can follow small motions of the cloud.
EyeWindows build_eye_windows(std::span<const Point3> points, double a0,
                             std::span<const std::size_t> centres,
                             double margin = 0.0);

/// Recomputes the weights of fixed-membership windows on moved points (same
/// indexing). Exact while no sample moves across a0 + margin relative to its
/// centre.
void reweight_eye_windows(EyeWindows& windows, std::span<const Point3> points,
                          std::span<const std::size_t> centres);

/// Greedy subset in index order whose members are pairwise farther apart than
/// `spacing` and which covers every point within `spacing`.
std::vector<std::size_t> spaced_subset(std::span<const Point3> points, double spacing);

/// Per-sample radiated field -j omega mu area_k G(r; r_k).J_k at r.
std::vector<CVec3> point_contributions(const SurfaceCurrents& currents,
                                       const EmConstants& consts,
                                       const Point3& r);

/// Map magnitudes (one per window) from precomputed contributions.
std::vector<double> windowed_magnitudes(std::span<const CVec3> contributions,
                                        const EyeWindows& windows);

/// Scattering map of a cloud for one source and one observation point.
ScatteringMap scattering_map(const SurfaceSampling& sampling,
                             const DipoleSource& source,
                             const EmConstants& consts, const Point3& r_obs,
                             double a0, bool shadowing = true);

}  // namespace defrad::em

#endif  // DEFRAD_EM_SCATTER_HPP
