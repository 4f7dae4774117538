#include "defrad/em_scatter.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "defrad/errors.hpp"
#include "defrad/kdtree.hpp"

namespace defrad::em {

namespace {

constexpr cplx kJ{0.0, 1.0};

inline cplx mul(cplx x, cplx y) {
  return {x.real() * y.real() - x.imag() * y.imag(),
          x.real() * y.imag() + x.imag() * y.real()};
}

void check_near_field(double R, double k0, std::size_t index) {
  if (R * k0 < 1.0) {
    throw NearFieldSingular("observation point within lambda/(2 pi) of sample " +
                            std::to_string(index));
  }
}

void check_currents(const SurfaceCurrents& c) {
  if (c.currents.size() != c.sampling.size() ||
      c.sampling.area_weights.size() != c.sampling.size())
    throw InvalidArgument("surface currents and sampling differ in length");
}

}  // namespace

EmConstants EmConstants::at(double frequency_hz) {
  if (!(frequency_hz > 0.0)) throw InvalidArgument("frequency must be > 0");
  EmConstants e;
  e.frequency = frequency_hz;
  e.omega = 2.0 * std::numbers::pi * frequency_hz;
  e.k0 = e.omega / e.c;
  return e;
}

void DipoleSource::validate() const {
  if (!position.allFinite()) throw InvalidArgument("dipole position not finite");
  if (std::abs(axis.norm() - 1.0) > 1e-9)
    throw InvalidArgument("dipole axis must be a unit vector");
}

CVec3 incident_h_field(const DipoleSource& source, const EmConstants& consts,
                       const Point3& r_s) {
  const Vec3 d = r_s - source.position;
  const double r = d.norm();
  if (!(r > 0.0)) throw SourceCoincident("surface point coincides with the dipole");
  const double kr = consts.k0 * r;
  // sin(theta) * phi_hat = axis x r_hat
  const Vec3 s_phi = source.axis.cross(d / r);
  const cplx h_phi = kJ * consts.k0 * source.moment / (4.0 * std::numbers::pi * r) *
                     (1.0 + 1.0 / (kJ * kr)) * std::exp(-kJ * kr);
  return s_phi.cast<cplx>() * h_phi;
}

CVec3 surface_current(const Vec3& normal, const CVec3& h_inc) {
  // Written out: Eigen's cross() conjugates complex results.
  const Vec3& n = normal;
  return 2.0 * CVec3(n.y() * h_inc.z() - n.z() * h_inc.y(),
                     n.z() * h_inc.x() - n.x() * h_inc.z(),
                     n.x() * h_inc.y() - n.y() * h_inc.x());
}

bool is_lit(const Vec3& normal, const Point3& r_s, const Point3& source) {
  return normal.dot(r_s - source) < 0.0;
}

SurfaceCurrents induce_currents(const SurfaceSampling& sampling,
                                const DipoleSource& source,
                                const EmConstants& consts, bool shadowing) {
  if (!sampling.cloud.has_normals())
    throw InvalidArgument("surface sampling needs normals");
  if (sampling.area_weights.size() != sampling.size())
    throw InvalidArgument("area weight count differs from point count");
  SurfaceCurrents out;
  out.sampling = sampling;
  out.currents.resize(sampling.size());
  const auto& pts = sampling.cloud.points;
  const auto& nrm = *sampling.cloud.normals;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (shadowing && !is_lit(nrm[i], pts[i], source.position)) {
      out.currents[i].setZero();
      continue;
    }
    out.currents[i] = surface_current(nrm[i], incident_h_field(source, consts, pts[i]));
  }
  return out;
}

CVec3 dyadic_green_apply(const Point3& r, const Point3& r_s, const CVec3& j,
                         double k0) {
  const Vec3 d = r - r_s;
  const double R = d.norm();
  const Vec3 u = d / R;
  const double kr = k0 * R;
  const double inv = 1.0 / kr;
  const double inv2 = inv * inv;
  const cplx g = std::polar(1.0 / (4.0 * std::numbers::pi * R), -kr);
  const cplx a{1.0 - inv2, -inv};
  const cplx b{1.0 - 3.0 * inv2, -3.0 * inv};
  const cplx rj = u(0) * j(0) + u(1) * j(1) + u(2) * j(2);
  // Plain products: std::complex multiplication carries NaN recovery that
  // dominates the cost here.
  const cplx ga = mul(g, a);
  const cplx gbr = mul(mul(g, b), rj);
  return CVec3(mul(ga, j(0)) - gbr * u(0), mul(ga, j(1)) - gbr * u(1),
               mul(ga, j(2)) - gbr * u(2));
}

CVec3 radiate(const SurfaceCurrents& currents, const EmConstants& consts,
              const Point3& r, std::span<const double> weights) {
  check_currents(currents);
  if (!weights.empty() && weights.size() != currents.currents.size())
    throw InvalidArgument("weight count differs from sample count");
  const auto& pts = currents.sampling.cloud.points;
  const auto& area = currents.sampling.area_weights;
  CVec3 acc = CVec3::Zero();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double w = weights.empty() ? 1.0 : weights[k];
    if (w == 0.0) continue;
    check_near_field((r - pts[k]).norm(), consts.k0, k);
    acc += (w * area[k]) * dyadic_green_apply(r, pts[k], currents.currents[k], consts.k0);
  }
  return (-kJ * consts.omega * consts.mu) * acc;
}

double eye_weight(const Point3& r_s, const Point3& r0, double a0) {
  if (!(a0 > 0.0)) throw InvalidArgument("eye radius must be > 0");
  const double d = (r_s - r0).norm();
  if (d > a0) return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * d / a0) + 1.0);
}

double scattered_field_magnitude(const SurfaceCurrents& currents,
                                 const EmConstants& consts, const Point3& r,
                                 const Point3& r0, double a0) {
  const auto& pts = currents.sampling.cloud.points;
  std::vector<double> w(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) w[k] = eye_weight(pts[k], r0, a0);
  return radiate(currents, consts, r, w).norm();
}

EyeWindows build_eye_windows(std::span<const Point3> points, double a0,
                             std::span<const std::size_t> centres, double margin) {
  if (!(a0 > 0.0)) throw InvalidArgument("eye radius must be > 0");
  if (!(margin >= 0.0)) throw InvalidArgument("eye window margin must be >= 0");
  EyeWindows win;
  win.a0 = a0;
  win.offsets.reserve(centres.size() + 1);
  win.offsets.push_back(0);
  if (points.empty()) return win;
  KdTree tree(points);
  for (auto c : centres) {
    if (c >= points.size()) throw InvalidArgument("eye window centre out of range");
    for (auto j : tree.radius(points[c], a0 + margin)) {
      const double w = eye_weight(points[j], points[c], a0);
      if (w == 0.0 && margin == 0.0) continue;
      win.indices.push_back(j);
      win.weights.push_back(w);
    }
    win.offsets.push_back(static_cast<std::uint32_t>(win.indices.size()));
  }
  return win;
}

void reweight_eye_windows(EyeWindows& windows, std::span<const Point3> points,
                          std::span<const std::size_t> centres) {
  if (centres.size() != windows.size())
    throw InvalidArgument("centre count differs from window count");
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const Point3& c = points[centres[i]];
    for (auto p = windows.offsets[i]; p < windows.offsets[i + 1]; ++p)
      windows.weights[p] = eye_weight(points[windows.indices[p]], c, windows.a0);
  }
}

EyeWindows build_eye_windows(std::span<const Point3> points, double a0) {
  std::vector<std::size_t> all(points.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return build_eye_windows(points, a0, all);
}

std::vector<std::size_t> spaced_subset(std::span<const Point3> points, double spacing) {
  if (!(spacing >= 0.0)) throw InvalidArgument("spacing must be >= 0");
  std::vector<std::size_t> out;
  if (points.empty()) return out;
  if (spacing == 0.0) {
    out.resize(points.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  KdTree tree(points);
  std::vector<char> covered(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (covered[i]) continue;
    out.push_back(i);
    for (auto j : tree.radius(points[i], spacing)) covered[j] = 1;
  }
  return out;
}

std::vector<CVec3> point_contributions(const SurfaceCurrents& currents,
                                       const EmConstants& consts,
                                       const Point3& r) {
  check_currents(currents);
  const auto& pts = currents.sampling.cloud.points;
  const auto& area = currents.sampling.area_weights;
  const cplx scale = -kJ * consts.omega * consts.mu;
  std::vector<CVec3> out(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (currents.currents[k].isZero(0.0)) {
      out[k].setZero();
      continue;
    }
    check_near_field((r - pts[k]).norm(), consts.k0, k);
    out[k] = (scale * area[k]) * dyadic_green_apply(r, pts[k], currents.currents[k], consts.k0);
  }
  return out;
}

std::vector<double> windowed_magnitudes(std::span<const CVec3> contributions,
                                        const EyeWindows& windows) {
  for (auto j : windows.indices)
    if (j >= contributions.size())
      throw InvalidArgument("eye window refers past the contributions");
  std::vector<double> out(windows.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CVec3 acc = CVec3::Zero();
    for (auto p = windows.offsets[i]; p < windows.offsets[i + 1]; ++p)
      acc += windows.weights[p] * contributions[windows.indices[p]];
    out[i] = acc.norm();
  }
  return out;
}

ScatteringMap scattering_map(const SurfaceSampling& sampling,
                             const DipoleSource& source,
                             const EmConstants& consts, const Point3& r_obs,
                             double a0, bool shadowing) {
  source.validate();
  const auto currents = induce_currents(sampling, source, consts, shadowing);
  const auto contrib = point_contributions(currents, consts, r_obs);
  const auto windows = build_eye_windows(sampling.cloud.points, a0);
  ScatteringMap map;
  map.observation_point = r_obs;
  map.eye_radius = a0;
  map.magnitudes = windowed_magnitudes(contrib, windows);
  return map;
}

}  // namespace defrad::em
