#include "defrad/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>

namespace defrad {

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::span<const Point3> points) : points_(points) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    root_ = build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all points identical

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& n = nodes_[id];
  n.axis = axis;
  n.split = split;
  n.left = left;
  n.right = right;
  return id;
}

std::vector<std::uint32_t> KdTree::knn(const Point3& query,
                                       std::size_t k) const {
  k = std::min(k, points_.size());
  if (k == 0) return {};
  using Entry = std::pair<double, std::uint32_t>;
  std::priority_queue<Entry> heap;  // max-heap on (distance, index)

  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t p = order_[i];
        const Entry e{(points_[p] - query).squaredNorm(), p};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double diff = query[n.axis] - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    self(self, near);
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, root_);

  std::vector<std::uint32_t> out(heap.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = heap.top().second;
    heap.pop();
  }
  return out;
}

std::vector<std::uint32_t> KdTree::radius(const Point3& query,
                                          double radius) const {
  std::vector<std::uint32_t> out;
  if (root_ < 0) return out;
  const double r2 = radius * radius;
  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const std::uint32_t p = order_[i];
        if ((points_[p] - query).squaredNorm() <= r2) out.push_back(p);
      }
      return;
    }
    const double diff = query[n.axis] - n.split;
    if (diff <= radius) self(self, n.left);
    if (diff >= -radius) self(self, n.right);
  };
  visit(visit, root_);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace defrad
