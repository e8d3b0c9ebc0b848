#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gpshape/geometry.h"

namespace gpshape {

// Static 3-d tree over a point set for exact nearest-neighbour queries.
// Read-only after construction.
class KdTree {
 public:
  explicit KdTree(std::span<const Point3> points);

  struct Neighbor {
    std::size_t index = 0;
    double squared_distance = 0.0;
  };

  // Exact nearest neighbour; ties resolve to the lowest index.
  Neighbor nearest(const Point3& query) const;

  std::size_t size() const { return points_.size(); }

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point3& q, Neighbor& best) const;

  std::vector<Point3> points_;
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
};

}  // namespace gpshape
