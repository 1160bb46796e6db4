#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace surfgal {

/// Static 3-d tree over a fixed point cloud.  Neighbour lists are ordered by
/// (distance, index) so that ties resolve deterministically by index.
class KdTree {
public:
    struct Neighbor {
        std::size_t index;
        double dist2;
        bool operator<(const Neighbor& o) const {
            return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
        }
    };

    KdTree() = default;
    explicit KdTree(std::span<const Eigen::Vector3d> points) : pts_(points.begin(), points.end()) {
        order_.resize(pts_.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (!pts_.empty()) root_ = build(0, pts_.size());
    }

    std::size_t size() const noexcept { return pts_.size(); }

    /// The k nearest points to q (k clamped to size()).
    std::vector<Neighbor> knn(const Eigen::Vector3d& q, std::size_t k) const {
        k = std::min(k, pts_.size());
        std::priority_queue<Neighbor> heap;  // max-heap on (dist2, index)
        if (k > 0) knn_rec(root_, q, k, heap);
        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

    /// All points within distance r of q, sorted by (distance, index).
    std::vector<Neighbor> radius(const Eigen::Vector3d& q, double r) const {
        std::vector<Neighbor> out;
        if (!pts_.empty()) radius_rec(root_, q, r * r, out);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    struct Node {
        std::size_t begin, end;  // range in order_
        int axis = -1;           // -1 marks a leaf
        double split = 0;
        int left = -1, right = -1;
    };
    static constexpr std::size_t kLeafSize = 12;

    int build(std::size_t b, std::size_t e) {
        Node node{b, e};
        if (e - b > kLeafSize) {
            Eigen::Vector3d lo = pts_[order_[b]], hi = lo;
            for (std::size_t i = b; i < e; ++i) {
                lo = lo.cwiseMin(pts_[order_[i]]);
                hi = hi.cwiseMax(pts_[order_[i]]);
            }
            Eigen::Index axis;
            (hi - lo).maxCoeff(&axis);
            const std::size_t mid = (b + e) / 2;
            std::nth_element(order_.begin() + b, order_.begin() + mid, order_.begin() + e,
                             [&](std::size_t i, std::size_t j) { return pts_[i][axis] < pts_[j][axis]; });
            node.axis = static_cast<int>(axis);
            node.split = pts_[order_[mid]][axis];
            const int id = static_cast<int>(nodes_.size());
            nodes_.push_back(node);
            const int l = build(b, mid);
            const int r = build(mid, e);
            nodes_[id].left = l;
            nodes_[id].right = r;
            return id;
        }
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    void knn_rec(int id, const Eigen::Vector3d& q, std::size_t k, std::priority_queue<Neighbor>& heap) const {
        const Node& n = nodes_[id];
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const Neighbor cand{order_[i], (pts_[order_[i]] - q).squaredNorm()};
                if (heap.size() < k) heap.push(cand);
                else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const double diff = q[n.axis] - n.split;
        const int near = diff < 0 ? n.left : n.right;
        const int far = diff < 0 ? n.right : n.left;
        knn_rec(near, q, k, heap);
        if (heap.size() < k || diff * diff <= heap.top().dist2) knn_rec(far, q, k, heap);
    }

    void radius_rec(int id, const Eigen::Vector3d& q, double r2, std::vector<Neighbor>& out) const {
        const Node& n = nodes_[id];
        if (n.axis < 0) {
            for (std::size_t i = n.begin; i < n.end; ++i) {
                const double d2 = (pts_[order_[i]] - q).squaredNorm();
                if (d2 <= r2) out.push_back({order_[i], d2});
            }
            return;
        }
        const double diff = q[n.axis] - n.split;
        radius_rec(diff < 0 ? n.left : n.right, q, r2, out);
        if (diff * diff <= r2) radius_rec(diff < 0 ? n.right : n.left, q, r2, out);
    }

    std::vector<Eigen::Vector3d> pts_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace surfgal
