#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "stlio/geometry.hpp"

namespace stlio {

/// Time-bounded store of recently registered world-frame points (M_t).
/// Whole frames are pushed and evicted; a kd-tree over the live points is
/// rebuilt on push and answers exact nearest-neighbor queries (the index is
/// an accelerator, never an approximation).
class TemporalWindowMap {
 public:
  struct Neighbor {
    StampedPoint point;
    std::uint32_t frame_id = 0;  // source frame, for temporal-spread checks
    std::uint64_t id = 0;        // insertion order, breaks distance ties
    double dist2 = 0.0;
  };

  explicit TemporalWindowMap(double window_length = 2.0)
      : window_length_(window_length) {}

  /// Inserts a frame and evicts frames older than frame_time - window_length.
  /// frame_time must be strictly greater than any stored frame time.
  void push_frame(double frame_time, const std::vector<StampedPoint>& points);

  /// The k spatially nearest live points, ascending distance, ties broken by
  /// insertion order. Fewer than k when the map holds fewer. Empty map gives
  /// an empty result.
  std::vector<Neighbor> knn(const Vec3& query, int k) const;

  /// All live points within spatial distance <= r, sorted by (distance,
  /// insertion order).
  std::vector<Neighbor> radius_search(const Vec3& query, double r) const;

  std::size_t live_count() const { return records_.size(); }
  std::size_t frame_count() const { return frames_.size(); }
  double newest_frame_time() const;
  double window_length() const { return window_length_; }

  /// Live points as stamped points, queue order (for invariant checks).
  std::vector<StampedPoint> live_points() const;

 private:
  struct Record {
    Vec3 position;
    double time;
    std::uint32_t frame_id;
    std::uint64_t id;
  };
  struct Frame {
    double time;
    std::uint32_t frame_id;
    std::size_t size;
  };
  struct Node {
    double split = 0.0;
    std::int32_t axis = -1;        // -1: leaf
    std::int32_t left = -1, right = -1;
    std::uint32_t begin = 0, end = 0;  // leaf range into order_
  };

  void rebuild();
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end, int depth);
  void knn_visit(std::int32_t node, const Vec3& q, std::size_t k,
                 std::vector<std::pair<double, std::uint64_t>>& heap,
                 std::vector<std::uint32_t>& heap_idx) const;
  void radius_visit(std::int32_t node, const Vec3& q, double r2,
                    std::vector<std::uint32_t>& out) const;

  double window_length_;
  std::deque<Frame> frames_;
  std::vector<Record> records_;  // concatenated live frames, queue order
  std::uint64_t next_id_ = 0;
  std::uint32_t next_frame_id_ = 0;

  std::vector<std::uint32_t> order_;  // permutation of records_ for the tree
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace stlio
