#include "defrad/geometry.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "defrad/errors.hpp"
#include "defrad/kdtree.hpp"

namespace defrad {

void PointCloudFrame::validate() const {
  if (!std::isfinite(timestamp) || timestamp < 0.0)
    throw InvalidArgument("timestamp must be finite and non-negative");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite())
      throw InvalidArgument("non-finite coordinate at point " +
                            std::to_string(i));
  }
  if (normals) {
    if (normals->size() != points.size())
      throw InvalidArgument("normals length differs from points length");
    for (std::size_t i = 0; i < normals->size(); ++i) {
      if (std::abs((*normals)[i].norm() - 1.0) > 1e-9)
        throw InvalidArgument("normal " + std::to_string(i) +
                              " is not unit length");
    }
  }
}

void SurfaceSampling::validate() const {
  cloud.validate();
  if (area_weights.size() != cloud.size())
    throw InvalidArgument("area weight count differs from point count");
  for (double a : area_weights) {
    if (!(a > 0.0)) throw InvalidArgument("area weights must be positive");
  }
}

NeighborTable build_neighbor_table(std::span<const Point3> points,
                                   std::size_t k) {
  if (points.size() < k + 1)
    throw InvalidArgument("need at least k + 1 points for a k-NN table");
  KdTree tree(points);
  NeighborTable table;
  table.k = k;
  table.indices.reserve(points.size() * k);
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto nn = tree.knn(points[i], k + 1);
    std::size_t taken = 0;
    for (auto j : nn) {
      if (j == i || taken == k) continue;
      table.indices.push_back(j);
      ++taken;
    }
  }
  return table;
}

namespace {

Vec3 pca_normal(std::span<const Point3> points, std::size_t self,
                std::span<const std::uint32_t> nbrs, const Point3& viewpoint) {
  Eigen::Vector3d mean = points[self];
  for (auto j : nbrs) mean += points[j];
  mean /= static_cast<double>(nbrs.size() + 1);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  auto accumulate = [&](const Point3& p) {
    const Eigen::Vector3d d = p - mean;
    cov.noalias() += d * d.transpose();
  };
  accumulate(points[self]);
  for (auto j : nbrs) accumulate(points[j]);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d ev = es.eigenvalues();  // ascending
  if (!(ev[1] > 1e-10 * ev[2])) {
    throw DegenerateNeighborhood(
        self, "neighbourhood of point " + std::to_string(self) +
                  " has covariance rank < 2 (collinear samples)");
  }
  Vec3 n = es.eigenvectors().col(0).normalized();
  if (n.dot(viewpoint - points[self]) < 0.0) n = -n;
  return n;
}

}  // namespace

std::vector<Vec3> normals_from_table(std::span<const Point3> points,
                                     const NeighborTable& table,
                                     const Point3& viewpoint) {
  std::vector<Vec3> normals(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    normals[i] = pca_normal(points, i, table.of(i), viewpoint);
  return normals;
}

PointCloudFrame estimate_normals(const PointCloudFrame& cloud,
                                 std::size_t k_neighbors,
                                 const Point3& viewpoint) {
  if (k_neighbors < 3) throw InvalidArgument("k_neighbors must be >= 3");
  if (cloud.size() < k_neighbors + 1)
    throw InvalidArgument("cloud needs at least k_neighbors + 1 points");
  const auto table = build_neighbor_table(cloud.points, k_neighbors);
  PointCloudFrame out = cloud;
  out.normals = normals_from_table(cloud.points, table, viewpoint);
  return out;
}

std::vector<double> area_weights_from_table(std::span<const Point3> points,
                                            const NeighborTable& table) {
  std::vector<double> w(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    double sum = 0.0;
    for (auto j : table.of(i)) sum += (points[j] - points[i]).norm();
    const double dbar = sum / static_cast<double>(table.k);
    w[i] = std::numbers::pi * dbar * dbar / 4.0;
  }
  return w;
}

SurfaceSampling make_surface_sampling(const PointCloudFrame& cloud,
                                      std::size_t k_normals,
                                      const Point3& viewpoint) {
  constexpr std::size_t kAreaNeighbors = 6;
  SurfaceSampling s;
  s.cloud = cloud;
  if (!cloud.has_normals()) s.cloud = estimate_normals(cloud, k_normals, viewpoint);
  const auto table = build_neighbor_table(cloud.points, kAreaNeighbors);
  s.area_weights = area_weights_from_table(cloud.points, table);
  return s;
}

PointCloudFrame time_average_frames(std::span<const PointCloudFrame> frames) {
  if (frames.empty()) throw InvalidArgument("need at least one frame");
  const std::size_t n = frames.front().size();
  for (const auto& f : frames) {
    if (f.size() != n)
      throw MismatchedFrameShape("frames differ in point count (" +
                                 std::to_string(f.size()) + " vs " +
                                 std::to_string(n) + ")");
  }
  PointCloudFrame out;
  out.points.assign(n, Point3::Zero());
  double t = 0.0;
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < n; ++i) out.points[i] += f.points[i];
    t += f.timestamp;
  }
  const double inv = 1.0 / static_cast<double>(frames.size());
  for (auto& p : out.points) p *= inv;
  out.timestamp = t * inv;
  return out;
}

std::vector<std::size_t> farthest_point_indices(std::span<const Point3> points,
                                                std::size_t target_count,
                                                std::uint64_t seed) {
  const std::size_t n = points.size();
  if (target_count > n)
    throw InvalidArgument("target_count exceeds the number of points");
  std::vector<std::size_t> chosen;
  if (target_count == 0) return chosen;
  chosen.reserve(target_count);

  std::mt19937_64 rng(seed);
  const std::size_t probe = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);

  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = (points[i] - points[probe]).squaredNorm();

  std::vector<char> taken(n, 0);
  auto argmax = [&] {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || dist[i] > dist[best]) best = i;
    }
    return best;
  };

  std::size_t next = argmax();
  for (std::size_t c = 0; c < target_count; ++c) {
    chosen.push_back(next);
    taken[next] = 1;
    const Point3& q = points[next];
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points[i] - q).squaredNorm();
      if (c == 0 || d < dist[i]) dist[i] = d;
    }
    if (c + 1 < target_count) next = argmax();
  }
  return chosen;
}

PointCloudFrame subsample(const PointCloudFrame& cloud,
                          std::size_t target_count, std::uint64_t seed) {
  const auto idx = farthest_point_indices(cloud.points, target_count, seed);
  PointCloudFrame out;
  out.timestamp = cloud.timestamp;
  out.points.reserve(idx.size());
  for (auto i : idx) out.points.push_back(cloud.points[i]);
  if (cloud.normals) {
    out.normals.emplace();
    out.normals->reserve(idx.size());
    for (auto i : idx) out.normals->push_back((*cloud.normals)[i]);
  }
  return out;
}

}  // namespace defrad
