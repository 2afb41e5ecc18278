#include "stlio/temporal_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace stlio {

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

void TemporalWindowMap::push_frame(double frame_time,
                                   const std::vector<StampedPoint>& points) {
  if (!frames_.empty() && frame_time <= frames_.back().time)
    throw std::invalid_argument("TemporalWindowMap: non-monotonic frame time");

  Frame f{frame_time, next_frame_id_++, points.size()};
  frames_.push_back(f);
  for (const auto& p : points)
    records_.push_back({p.position, p.time, f.frame_id, next_id_++});

  // Evict whole frames older than the window.
  const double cutoff = frame_time - window_length_;
  std::size_t drop = 0;
  while (!frames_.empty() && frames_.front().time < cutoff) {
    drop += frames_.front().size;
    frames_.pop_front();
  }
  if (drop > 0) records_.erase(records_.begin(), records_.begin() + static_cast<long>(drop));

  rebuild();
}

double TemporalWindowMap::newest_frame_time() const {
  return frames_.empty() ? -std::numeric_limits<double>::infinity() : frames_.back().time;
}

std::vector<StampedPoint> TemporalWindowMap::live_points() const {
  std::vector<StampedPoint> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back({r.position, r.time});
  return out;
}

void TemporalWindowMap::rebuild() {
  const std::uint32_t n = static_cast<std::uint32_t>(records_.size());
  order_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) order_[i] = i;
  nodes_.clear();
  nodes_.reserve(n / (kLeafSize / 2) + 4);
  root_ = n == 0 ? -1 : build_node(0, n, 0);
}

std::int32_t TemporalWindowMap::build_node(std::uint32_t begin, std::uint32_t end, int depth) {
  const std::int32_t idx = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }
  const int axis = depth % 3;
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double ca = records_[a].position[axis];
                     const double cb = records_[b].position[axis];
                     if (ca != cb) return ca < cb;
                     return records_[a].id < records_[b].id;
                   });
  const double split = records_[order_[mid]].position[axis];
  const std::int32_t left = build_node(begin, mid, depth + 1);
  const std::int32_t right = build_node(mid, end, depth + 1);
  nodes_[idx].axis = axis;
  nodes_[idx].split = split;
  nodes_[idx].left = left;
  nodes_[idx].right = right;
  return idx;
}

namespace {
// Max-heap key: worst candidate = largest (dist2, id).
inline bool key_less(const std::pair<double, std::uint64_t>& a,
                     const std::pair<double, std::uint64_t>& b) {
  if (a.first != b.first) return a.first < b.first;
  return a.second < b.second;
}
}  // namespace

void TemporalWindowMap::knn_visit(std::int32_t node, const Vec3& q, std::size_t k,
                                  std::vector<std::pair<double, std::uint64_t>>& heap,
                                  std::vector<std::uint32_t>& heap_idx) const {
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (nd.axis < 0) {
    for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
      const Record& r = records_[order_[i]];
      const double d2 = (r.position - q).squaredNorm();
      const std::pair<double, std::uint64_t> key{d2, r.id};
      if (heap.size() < k) {
        heap.push_back(key);
        heap_idx.push_back(order_[i]);
        std::size_t c = heap.size() - 1;  // sift up
        while (c > 0) {
          const std::size_t p = (c - 1) / 2;
          if (key_less(heap[p], heap[c])) {
            std::swap(heap[p], heap[c]);
            std::swap(heap_idx[p], heap_idx[c]);
            c = p;
          } else {
            break;
          }
        }
      } else if (key_less(key, heap[0])) {
        heap[0] = key;  // replace worst, sift down
        heap_idx[0] = order_[i];
        std::size_t p = 0;
        for (;;) {
          const std::size_t l = 2 * p + 1, rgt = 2 * p + 2;
          std::size_t largest = p;
          if (l < heap.size() && key_less(heap[largest], heap[l])) largest = l;
          if (rgt < heap.size() && key_less(heap[largest], heap[rgt])) largest = rgt;
          if (largest == p) break;
          std::swap(heap[p], heap[largest]);
          std::swap(heap_idx[p], heap_idx[largest]);
          p = largest;
        }
      }
    }
    return;
  }

  const double diff = q[nd.axis] - nd.split;
  const std::int32_t near = diff < 0.0 ? nd.left : nd.right;
  const std::int32_t far = diff < 0.0 ? nd.right : nd.left;
  knn_visit(near, q, k, heap, heap_idx);
  // A point at exactly the worst distance can still win on insertion id, so
  // only prune when strictly farther.
  if (heap.size() < k || diff * diff <= heap[0].first) knn_visit(far, q, k, heap, heap_idx);
}

std::vector<TemporalWindowMap::Neighbor> TemporalWindowMap::knn(const Vec3& query, int k) const {
  std::vector<Neighbor> out;
  if (k < 1) throw std::invalid_argument("TemporalWindowMap::knn: k must be >= 1");
  if (root_ < 0) return out;

  std::vector<std::pair<double, std::uint64_t>> heap;
  std::vector<std::uint32_t> heap_idx;
  heap.reserve(static_cast<std::size_t>(k));
  heap_idx.reserve(static_cast<std::size_t>(k));
  knn_visit(root_, query, static_cast<std::size_t>(k), heap, heap_idx);

  std::vector<std::size_t> perm(heap.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t a, std::size_t b) { return key_less(heap[a], heap[b]); });

  out.reserve(heap.size());
  for (std::size_t i : perm) {
    const Record& r = records_[heap_idx[i]];
    out.push_back({{r.position, r.time}, r.frame_id, r.id, heap[i].first});
  }
  return out;
}

void TemporalWindowMap::radius_visit(std::int32_t node, const Vec3& q, double r2,
                                     std::vector<std::uint32_t>& out) const {
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  if (nd.axis < 0) {
    for (std::uint32_t i = nd.begin; i < nd.end; ++i) {
      const Record& r = records_[order_[i]];
      if ((r.position - q).squaredNorm() <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = q[nd.axis] - nd.split;
  const std::int32_t near = diff < 0.0 ? nd.left : nd.right;
  const std::int32_t far = diff < 0.0 ? nd.right : nd.left;
  radius_visit(near, q, r2, out);
  if (diff * diff <= r2) radius_visit(far, q, r2, out);
}

std::vector<TemporalWindowMap::Neighbor> TemporalWindowMap::radius_search(const Vec3& query,
                                                                          double r) const {
  if (r <= 0.0) throw std::invalid_argument("TemporalWindowMap::radius_search: r must be > 0");
  std::vector<Neighbor> out;
  if (root_ < 0) return out;

  std::vector<std::uint32_t> hits;
  radius_visit(root_, query, r * r, hits);
  out.reserve(hits.size());
  for (std::uint32_t i : hits) {
    const Record& rec = records_[i];
    out.push_back({{rec.position, rec.time}, rec.frame_id, rec.id,
                   (rec.position - query).squaredNorm()});
  }
  std::sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    return a.id < b.id;
  });
  return out;
}

}  // namespace stlio
