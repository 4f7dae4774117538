#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "defrad/em_scatter.hpp"
#include "defrad/errors.hpp"
#include "defrad/geometry.hpp"

using namespace defrad;
using namespace defrad::em;

namespace {

const EmConstants kC = EmConstants::at(79e9);
const double kLambda = 2.0 * std::numbers::pi / kC.k0;

// Square plate at height z facing the origin, pitch h, area weights h^2.
SurfaceSampling plate(double side, double h, double z) {
  SurfaceSampling s;
  const int n = static_cast<int>(std::lround(side / h)) + 1;
  std::vector<Vec3> nrm;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      s.cloud.points.emplace_back(-side / 2 + i * h, -side / 2 + j * h, z);
      nrm.push_back(-Vec3::UnitZ());
    }
  s.cloud.normals = nrm;
  s.area_weights.assign(s.cloud.size(), h * h);
  return s;
}

SurfaceCurrents single_current(const Point3& at, const CVec3& j) {
  SurfaceCurrents c;
  c.sampling.cloud.points = {at};
  c.sampling.cloud.normals = std::vector<Vec3>{Vec3::UnitZ()};
  c.sampling.area_weights = {1.0};
  c.currents = {j};
  return c;
}

cplx scalar_green(const Point3& r, const Point3& rs) {
  const double R = (r - rs).norm();
  return std::exp(cplx(0.0, -kC.k0 * R)) / (4.0 * std::numbers::pi * R);
}

}  // namespace

TEST_CASE("EM constants") {
  CHECK(kC.k0 == doctest::Approx(kC.omega / kC.c).epsilon(1e-12));
  CHECK(kC.c == 2.99792458e8);
  CHECK_THROWS_AS(EmConstants::at(0.0), InvalidArgument);
}

TEST_CASE("incident H field") {
  DipoleSource d{Point3::Zero(), Vec3::UnitZ(), 1.0};
  CHECK(incident_h_field(d, kC, Point3(0, 0, 0.5)).norm() == 0.0);

  const CVec3 h = incident_h_field(d, kC, Point3(0.3, 0, 0));
  CHECK(std::abs(h.x()) == 0.0);
  CHECK(std::abs(h.z()) == 0.0);
  CHECK(std::abs(h.y()) > 0.0);

  const double r = 100.0 * kLambda;
  const cplx far = cplx(0.0, kC.k0) * std::exp(cplx(0.0, -kC.k0 * r)) / (4.0 * std::numbers::pi * r);
  const CVec3 hf = incident_h_field(d, kC, Point3(r, 0, 0));
  CHECK(std::abs(hf.y() - far) / std::abs(far) < 2e-3);

  // Azimuthal direction at phi = 90 deg: (-H_phi, 0, 0).
  const CVec3 h90 = incident_h_field(d, kC, Point3(0, r, 0));
  CHECK(std::abs(h90.x() + far) / std::abs(far) < 2e-3);

  CHECK_THROWS_AS(incident_h_field(d, kC, Point3::Zero()), SourceCoincident);
}

TEST_CASE("surface current") {
  const cplx hv(0.3, -0.7);
  const CVec3 a = surface_current(Vec3::UnitZ(), CVec3(0, hv, 0));
  CHECK(std::abs(a.x() + 2.0 * hv) < 1e-15);
  CHECK(std::abs(a.y()) + std::abs(a.z()) == 0.0);
  const CVec3 b = surface_current(Vec3::UnitZ(), CVec3(hv, 0, 0));
  CHECK(std::abs(b.y() - 2.0 * hv) < 1e-15);
  CHECK(surface_current(Vec3::UnitZ(), CVec3(0, 0, hv)).norm() == 0.0);

  // General complex field: matches the component-wise cross product.
  const Vec3 n = Vec3(0.2, -0.3, 0.9).normalized();
  const CVec3 H(cplx(1, 2), cplx(-0.5, 0.1), cplx(0.3, -1));
  const CVec3 J = surface_current(n, H);
  const CVec3 re = 2.0 * n.cross(Vec3(H.real())).cast<cplx>();
  const CVec3 im = 2.0 * n.cross(Vec3(H.imag())).cast<cplx>();
  CHECK((J - (re + cplx(0, 1) * im)).norm() < 1e-14);
}

TEST_CASE("induced currents are tangent and shadowed") {
  SurfaceSampling s;
  s.cloud.points = {Point3(0.01, 0.02, 0.8), Point3(-0.03, 0.01, 0.8), Point3(0.0, 0.0, 0.9)};
  s.cloud.normals = std::vector<Vec3>{Vec3(0.1, 0.2, -1).normalized(),
                                      Vec3(-0.3, 0, -1).normalized(), Vec3::UnitZ()};
  s.area_weights = {1e-6, 1e-6, 1e-6};
  DipoleSource d{Point3(0.02, -0.03, 0.1), Vec3::UnitY(), 1.0};
  const auto c = induce_currents(s, d, kC, true);
  for (std::size_t i = 0; i < 2; ++i) {
    const Vec3& n = (*s.cloud.normals)[i];
    const cplx dot = n.x() * c.currents[i].x() + n.y() * c.currents[i].y() + n.z() * c.currents[i].z();
    CHECK(std::abs(dot) <= 1e-9 * c.currents[i].norm());
    CHECK(c.currents[i].norm() > 0.0);
  }
  CHECK(c.currents[2].norm() == 0.0);  // faces away from the source
  CHECK(induce_currents(s, d, kC, false).currents[2].norm() > 0.0);
}

TEST_CASE("dyadic Green closed form matches (I + grad grad / k^2) g") {
  const Point3 rs(0.01, -0.02, 0.03);
  const CVec3 J(cplx(1, 0.5), cplx(-0.2, 0.3), cplx(0.7, -1));
  for (double R : {0.5 * kLambda, 2.0 * kLambda, 20.0 * kLambda}) {
    const Point3 r = rs + R * Vec3(0.48, -0.6, 0.64);
    const double h = 1e-3 * kLambda;
    // Central-difference Hessian of the scalar Green function.
    Eigen::Matrix3cd H;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const Vec3 ea = Vec3::Unit(a) * h, eb = Vec3::Unit(b) * h;
        H(a, b) = (scalar_green(r + ea + eb, rs) - scalar_green(r + ea - eb, rs) -
                   scalar_green(r - ea + eb, rs) + scalar_green(r - ea - eb, rs)) /
                  (4.0 * h * h);
      }
    const CVec3 want = scalar_green(r, rs) * J + H * J / (kC.k0 * kC.k0);
    const CVec3 got = dyadic_green_apply(r, rs, J, kC.k0);
    CHECK((got - want).norm() / want.norm() < 1e-5);
  }
}

TEST_CASE("radiation basics") {
  const Point3 rs = Point3::Zero();
  CHECK(radiate(single_current(rs, CVec3::Zero()), kC, Point3(0, 0, 1)).norm() == 0.0);

  // J parallel to R-hat: transverse remainder is O(1/(k0 R)).
  const double R = 1e3 / kC.k0;
  const CVec3 Jz(1, 0, 0);
  const CVec3 e = radiate(single_current(rs, Jz), kC, Point3(R, 0, 0));
  const CVec3 e_perp = radiate(single_current(rs, CVec3(0, 1, 0)), kC, Point3(R, 0, 0));
  CHECK(e.norm() / e_perp.norm() < 1e-2);

  const CVec3 J(0, 1, 0);
  const double r1 = 0.5;
  const double e1 = radiate(single_current(rs, J), kC, Point3(r1, 0, 0.3)).norm();
  const double e2 = radiate(single_current(rs, J), kC, Point3(2 * r1, 0, 0.6)).norm();
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.01));

  CHECK_THROWS_AS(radiate(single_current(rs, J), kC, Point3(0.1 / kC.k0, 0, 0)), NearFieldSingular);
}

TEST_CASE("eye function") {
  const Point3 r0(0.1, 0.2, 0.3);
  const double a0 = 0.019;
  CHECK(eye_weight(r0, r0, a0) == 1.0);
  CHECK(eye_weight(r0 + Vec3(a0, 0, 0), r0, a0) == doctest::Approx(0.0));
  CHECK(eye_weight(r0 + Vec3(0, a0 / 2, 0), r0, a0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eye_weight(r0 + Vec3(0, 0, 1.01 * a0), r0, a0) == 0.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.03, 0.03);
  for (int i = 0; i < 1000; ++i) {
    const Point3 p = r0 + Vec3(u(rng), u(rng), u(rng));
    const double d = (p - r0).norm();
    const double want = d <= a0 ? 0.5 * (std::cos(std::numbers::pi * d / a0) + 1.0) : 0.0;
    CHECK(std::abs(eye_weight(p, r0, a0) - want) <= 1e-12);
  }
}

TEST_CASE("windowed magnitudes") {
  auto s = plate(0.04, 0.002, 0.6);
  DipoleSource d{Point3(0.01, 0, 0), Vec3::UnitY(), 1.0};
  const auto cur = induce_currents(s, d, kC, true);
  const Point3 obs(0.02, 0.01, 0.0);
  const auto& pts = s.cloud.points;

  // Window below the spacing: a single sample.
  const double own = radiate(single_current(pts[7], cur.currents[7]), kC, obs).norm() * s.area_weights[7];
  CHECK(scattered_field_magnitude(cur, kC, obs, pts[7], 0.001) == doctest::Approx(own).epsilon(1e-12));
  // Window covering everything: plain radiation, with weights close to 1.
  const double all = radiate(cur, kC, obs).norm();
  CHECK(scattered_field_magnitude(cur, kC, obs, pts[0], 1e3) == doctest::Approx(all).epsilon(1e-6));

  const double a0 = 0.008;
  const auto contrib = point_contributions(cur, kC, obs);
  const auto win = build_eye_windows(pts, a0);
  const auto mags = windowed_magnitudes(contrib, win);
  REQUIRE(mags.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); i += 37)
    CHECK(mags[i] == doctest::Approx(scattered_field_magnitude(cur, kC, obs, pts[i], a0)).epsilon(1e-10));

  const auto map = scattering_map(s, d, kC, obs, a0, true);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(map.magnitudes[i] == mags[i]);

  DipoleSource d10 = d;
  d10.moment = 10.0;
  const auto map10 = scattering_map(s, d10, kC, obs, a0, true);
  for (std::size_t i = 0; i < pts.size(); i += 11)
    CHECK(map10.magnitudes[i] == doctest::Approx(10.0 * map.magnitudes[i]).epsilon(1e-12));
}

TEST_CASE("centre subsets and reweighted windows") {
  auto s = plate(0.05, 0.002, 0.6);
  const auto& pts = s.cloud.points;
  const double spacing = 0.005;
  const auto centres = spaced_subset(pts, spacing);
  for (std::size_t a = 0; a < centres.size(); ++a)
    for (std::size_t b = a + 1; b < centres.size(); ++b)
      CHECK((pts[centres[a]] - pts[centres[b]]).norm() > spacing);
  for (const auto& p : pts) {
    double best = 1e9;
    for (auto c : centres) best = std::min(best, (p - pts[c]).norm());
    CHECK(best <= spacing);
  }
  CHECK(spaced_subset(pts, 0.0).size() == pts.size());

  const double a0 = 0.01;
  const auto full = build_eye_windows(pts, a0);
  const auto sub = build_eye_windows(pts, a0, centres);
  REQUIRE(sub.size() == centres.size());
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const auto c = centres[i];
    REQUIRE(sub.offsets[i + 1] - sub.offsets[i] == full.offsets[c + 1] - full.offsets[c]);
    for (auto p = sub.offsets[i], q = full.offsets[c]; p < sub.offsets[i + 1]; ++p, ++q) {
      CHECK(sub.indices[p] == full.indices[q]);
      CHECK(sub.weights[p] == full.weights[q]);
    }
  }

  // Small smooth motion: reweighted fixed-membership windows equal a rebuild.
  auto windows = build_eye_windows(pts, a0, centres, 0.004);
  std::vector<Point3> moved = pts;
  for (auto& p : moved) p += Vec3(0.001 * std::sin(60 * p.y()), 0.0, 0.002 * std::cos(40 * p.x()));
  reweight_eye_windows(windows, moved, centres);
  const auto rebuilt = build_eye_windows(moved, a0, centres);
  std::vector<CVec3> contrib(pts.size());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (auto& c : contrib) c = CVec3(cplx(g(rng), g(rng)), cplx(g(rng), g(rng)), cplx(g(rng), g(rng)));
  const auto m1 = windowed_magnitudes(contrib, windows);
  const auto m2 = windowed_magnitudes(contrib, rebuilt);
  for (std::size_t i = 0; i < m1.size(); ++i) CHECK(m1[i] == doctest::Approx(m2[i]).epsilon(1e-12));
}

TEST_CASE("flat plate specular point and corner contrast") {
  const double h = 0.002;
  auto s = plate(0.3, h, 0.8);
  DipoleSource d{Point3::Zero(), Vec3::UnitY(), 1.0};
  const Point3 obs(0.012, -0.006, 0.0);
  const auto map = scattering_map(s, d, kC, obs, 0.019, true);
  const auto& m = map.magnitudes;
  const auto best = std::max_element(m.begin(), m.end()) - m.begin();
  // Specular point of a plane for separated source and observer.
  const Point3 spec(0.006, -0.003, 0.8);
  CHECK((s.cloud.points[best] - spec).norm() <= h * std::sqrt(2.0));
  const double corner = std::max({m.front(), m.back(), m[150], m[m.size() - 151]});
  CHECK(20.0 * std::log10(m[best] / corner) >= 10.0);
  for (double v : m) CHECK((std::isfinite(v) && v >= 0.0));
}

TEST_CASE("sphere cap specular point") {
  // Cap of a 0.25 m sphere whose apex faces a co-located source and observer.
  const double Rs = 0.25, zc = 1.05, h = 0.0015;
  SurfaceSampling s;
  std::vector<Vec3> nrm;
  for (double x = -0.05; x <= 0.05 + 1e-12; x += h)
    for (double y = -0.05; y <= 0.05 + 1e-12; y += h) {
      const Point3 p(x, y, zc - std::sqrt(Rs * Rs - x * x - y * y));
      s.cloud.points.push_back(p);
      nrm.push_back((p - Point3(0, 0, zc)).normalized());
    }
  s.cloud.normals = nrm;
  s.area_weights.assign(s.cloud.size(), h * h);
  DipoleSource d{Point3::Zero(), Vec3::UnitX(), 1.0};
  const auto map = scattering_map(s, d, kC, Point3::Zero(), 0.019, true);
  const auto best = std::max_element(map.magnitudes.begin(), map.magnitudes.end()) -
                    map.magnitudes.begin();
  CHECK(s.cloud.points[best].head<2>().norm() <= h * std::sqrt(2.0));
}

TEST_CASE("argument validation") {
  DipoleSource d{Point3::Zero(), Vec3(1, 1, 0), 1.0};
  CHECK_THROWS_AS(d.validate(), InvalidArgument);
  CHECK_THROWS_AS(eye_weight(Point3::Zero(), Point3::Zero(), 0.0), InvalidArgument);
  SurfaceSampling s;
  s.cloud.points = {Point3(0, 0, 1)};
  s.area_weights = {1.0};
  CHECK_THROWS_AS(induce_currents(s, DipoleSource{}, kC, true), InvalidArgument);
}
