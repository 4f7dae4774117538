#ifndef DEFRAD_KDTREE_HPP
#define DEFRAD_KDTREE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "defrad/geometry.hpp"

namespace defrad {

/// Static 3-D kd-tree over a borrowed point array. The points must outlive
/// the tree and must not be modified while it is in use.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  /// Indices of the k nearest points to `query`, closest first. Ties are
  /// broken by index so results are deterministic.
  std::vector<std::uint32_t> knn(const Point3& query, std::size_t k) const;

  /// Indices of all points with ||p - query|| <= radius, ascending index.
  std::vector<std::uint32_t> radius(const Point3& query, double radius) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin, end;  // range into order_
    std::int32_t left = -1, right = -1;
    int axis = -1;  // -1 for leaves
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::span<const Point3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace defrad

#endif  // DEFRAD_KDTREE_HPP
