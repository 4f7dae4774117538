#ifndef DEFRAD_GEOMETRY_HPP
#define DEFRAD_GEOMETRY_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace defrad {

using Point3 = Eigen::Vector3d;
using Vec3 = Eigen::Vector3d;

/**
 * @brief A timestamped set of 3-D points with optional unit normals.
 *
 * Used for scanner templates, depth-camera frames, deformed templates and
 * time-averaged clouds alike. Point order is meaningful: downstream stages
 * rely on per-index correspondence across frames.
 */
struct PointCloudFrame {
  std::vector<Point3> points;
  std::optional<std::vector<Vec3>> normals;
  double timestamp = 0.0;  ///< slow time [s]

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return normals.has_value(); }

  /// Throws InvalidArgument if any invariant (finite coordinates, unit
  /// normals, matching lengths, non-negative timestamp) is broken.
  void validate() const;
};

/// A cloud with normals plus a per-point quadrature area [m^2].
struct SurfaceSampling {
  PointCloudFrame cloud;
  std::vector<double> area_weights;

  std::size_t size() const { return cloud.size(); }
  void validate() const;
};

/// Fixed k-nearest-neighbour lists, indexed like the cloud they were built on.
/// A deformed copy of the same cloud can reuse the table as long as the
/// deformation is smooth enough not to change local topology.
struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;  ///< row-major [point][k], self excluded

  std::span<const std::uint32_t> of(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
};

/// k nearest neighbours (self excluded) of every point in `points`.
NeighborTable build_neighbor_table(std::span<const Point3> points,
                                   std::size_t k);

/**
 * @brief PCA normals oriented toward a viewpoint.
 *
 * Each normal is the eigenvector of the smallest eigenvalue of the covariance
 * of the point and its k nearest neighbours, flipped so that it faces
 * `viewpoint`.
 *
 * Requires at least k_neighbors + 1 points and k_neighbors >= 3. Throws
 * DegenerateNeighborhood when a neighbourhood is (numerically) collinear.
 */
PointCloudFrame estimate_normals(const PointCloudFrame& cloud,
                                 std::size_t k_neighbors,
                                 const Point3& viewpoint);

/// Same as estimate_normals but with a precomputed neighbour table; used to
/// re-estimate normals on deformed copies of a template.
std::vector<Vec3> normals_from_table(std::span<const Point3> points,
                                     const NeighborTable& table,
                                     const Point3& viewpoint);

/**
 * Density-adaptive quadrature weights: area_i = pi * dbar_i^2 / 4, where
 * dbar_i is the mean distance to the `table.k` nearest neighbours. The 1/4
 * calibrates the k = 6 estimator so a regular grid of pitch h gets ~h^2.
 */
std::vector<double> area_weights_from_table(std::span<const Point3> points,
                                            const NeighborTable& table);

/// Normals (k_normals) and area weights (6 neighbours) for a cloud.
SurfaceSampling make_surface_sampling(const PointCloudFrame& cloud,
                                      std::size_t k_normals,
                                      const Point3& viewpoint);

/// Per-index arithmetic mean of frames; the timestamp is the mean timestamp.
PointCloudFrame time_average_frames(std::span<const PointCloudFrame> frames);

/// Greedy farthest-point sampling. The seed picks a random probe point; the
/// first selected point is the one farthest from that probe.
PointCloudFrame subsample(const PointCloudFrame& cloud,
                          std::size_t target_count, std::uint64_t seed);

/// Indices chosen by subsample(), in selection order.
std::vector<std::size_t> farthest_point_indices(std::span<const Point3> points,
                                                std::size_t target_count,
                                                std::uint64_t seed);

}  // namespace defrad

#endif  // DEFRAD_GEOMETRY_HPP
