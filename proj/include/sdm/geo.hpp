// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include "sdm/common.hpp"

namespace sdm::geo {

/// Spherical earth. Fixed; distances everywhere assume this radius.
inline constexpr double kEarthRadiusKm = 6371.0;

struct GeoPoint {
    double lat_rad = 0.0;
    double lon_rad = 0.0;

    static GeoPoint from_degrees(double lat_deg, double lon_deg) {
        constexpr double k = std::numbers::pi / 180.0;
        return {lat_deg * k, lon_deg * k};
    }
};

inline double haversine_km(const GeoPoint& a, const GeoPoint& b) {
    const double s_lat = std::sin((b.lat_rad - a.lat_rad) * 0.5);
    const double s_lon = std::sin((b.lon_rad - a.lon_rad) * 0.5);
    double h = s_lat * s_lat + std::cos(a.lat_rad) * std::cos(b.lat_rad) * s_lon * s_lon;
    h = std::min(1.0, std::max(0.0, h));
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

struct IndexedPoint {
    GeoPoint point;
    SurveyId survey_id = 0;
};

struct Neighbor {
    SurveyId survey_id = 0;
    double distance_km = 0.0;
    /// Position of the point in the sequence the index was built from.
    std::uint32_t slot = 0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// (distance, survey_id) order used for every result list.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
    if (a.distance_km != b.distance_km) return a.distance_km < b.distance_km;
    if (a.survey_id != b.survey_id) return a.survey_id < b.survey_id;
    return a.slot < b.slot;
}

/// Immutable spatial index answering exact haversine radius and k-NN queries.
///
/// Points are embedded as unit vectors in a static kd-tree. Traversal prunes
/// with chord-length bounds inflated by a small safety margin, and every
/// surviving candidate is accepted or rejected by `haversine_km` itself, so
/// results coincide with a brute-force haversine scan.
class GeoIndex {
public:
    GeoIndex() = default;

    explicit GeoIndex(std::span<const IndexedPoint> points) { build(points); }

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    /// All points with haversine_km(center, p) <= radius_km, sorted by (distance, survey_id).
    std::vector<Neighbor> radius_query(const GeoPoint& center, double radius_km) const {
        std::vector<Neighbor> out;
        radius_query(center, radius_km, out);
        return out;
    }

    void radius_query(const GeoPoint& center, double radius_km, std::vector<Neighbor>& out) const {
        out.clear();
        if (nodes_.empty() || !(radius_km >= 0.0)) return;
        const Vec3 q = to_unit(center);
        const double bound = chord_bound_sq(radius_km);
        std::size_t stack[128];
        std::size_t top = 0;
        stack[top++] = 0;
        while (top > 0) {
            const Node& n = nodes_[stack[--top]];
            if (box_dist_sq(n, q) > bound) continue;
            if (n.left == kLeaf) {
                for (std::uint32_t i = n.begin; i < n.end; ++i) {
                    if (dist_sq(xyz_[i], q) > bound) continue;
                    const double d = haversine_km(center, points_[i].point);
                    if (d <= radius_km) out.push_back({points_[i].survey_id, d, slot_[i]});
                }
            } else {
                stack[top++] = n.left;
                stack[top++] = n.right;
            }
        }
        std::sort(out.begin(), out.end(), neighbor_less);
    }

    /// The min(k, size()) nearest points, ties broken by ascending survey_id.
    std::vector<Neighbor> knn_query(const GeoPoint& center, std::size_t k) const {
        std::vector<Neighbor> best;
        if (nodes_.empty() || k == 0) return best;
        const Vec3 q = to_unit(center);
        best.reserve(k + 1);

        auto worse = [](const Neighbor& a, const Neighbor& b) { return neighbor_less(a, b); };
        double bound = std::numeric_limits<double>::infinity();

        using Entry = std::pair<double, std::size_t>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
        frontier.emplace(box_dist_sq(nodes_[0], q), 0);
        while (!frontier.empty()) {
            const auto [lb, idx] = frontier.top();
            frontier.pop();
            if (lb > bound) break;
            const Node& n = nodes_[idx];
            if (n.left == kLeaf) {
                for (std::uint32_t i = n.begin; i < n.end; ++i) {
                    if (dist_sq(xyz_[i], q) > bound) continue;
                    Neighbor cand{points_[i].survey_id, haversine_km(center, points_[i].point), slot_[i]};
                    if (best.size() < k) {
                        best.push_back(cand);
                        std::push_heap(best.begin(), best.end(), worse);
                    } else if (neighbor_less(cand, best.front())) {
                        std::pop_heap(best.begin(), best.end(), worse);
                        best.back() = cand;
                        std::push_heap(best.begin(), best.end(), worse);
                    } else {
                        continue;
                    }
                    if (best.size() == k) bound = chord_bound_sq(best.front().distance_km);
                }
            } else {
                for (std::uint32_t child : {n.left, n.right}) {
                    const double cb = box_dist_sq(nodes_[child], q);
                    if (cb <= bound) frontier.emplace(cb, child);
                }
            }
        }
        std::sort_heap(best.begin(), best.end(), worse);
        return best;
    }

    const IndexedPoint& point_at_slot(std::uint32_t slot) const { return points_[inverse_[slot]]; }

private:
    using Vec3 = std::array<double, 3>;
    static constexpr std::uint32_t kLeaf = std::numeric_limits<std::uint32_t>::max();
    static constexpr std::uint32_t kLeafSize = 12;

    struct Node {
        std::uint32_t begin = 0, end = 0;
        std::uint32_t left = kLeaf, right = kLeaf;
        Vec3 lo{}, hi{};
    };

    static Vec3 to_unit(const GeoPoint& p) {
        const double c = std::cos(p.lat_rad);
        return {c * std::cos(p.lon_rad), c * std::sin(p.lon_rad), std::sin(p.lat_rad)};
    }

    static double dist_sq(const Vec3& a, const Vec3& b) {
        const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
        return dx * dx + dy * dy + dz * dz;
    }

    static double box_dist_sq(const Node& n, const Vec3& q) {
        double s = 0.0;
        for (int d = 0; d < 3; ++d) {
            double e = 0.0;
            if (q[d] < n.lo[d]) e = n.lo[d] - q[d];
            else if (q[d] > n.hi[d]) e = q[d] - n.hi[d];
            s += e * e;
        }
        return s;
    }

    /// Squared chord length for a great-circle distance, inflated so that
    /// rounding in the unit-vector embedding never prunes a true member.
    static double chord_bound_sq(double distance_km) {
        const double half_angle = std::min(distance_km / (2.0 * kEarthRadiusKm), std::numbers::pi / 2);
        const double chord = 2.0 * std::sin(half_angle) * (1.0 + 1e-6) + 1e-9;
        return chord * chord;
    }

    void build(std::span<const IndexedPoint> pts) {
        const std::size_t n = pts.size();
        if (n >= kLeaf) throw Error("GeoIndex: too many points");
        points_.assign(pts.begin(), pts.end());
        slot_.resize(n);
        xyz_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            slot_[i] = static_cast<std::uint32_t>(i);
            xyz_[i] = to_unit(points_[i].point);
        }
        nodes_.clear();
        if (n == 0) return;
        nodes_.reserve(2 * (n / kLeafSize + 1) + 1);
        std::vector<std::uint32_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
        build_node(perm, 0, static_cast<std::uint32_t>(n));

        std::vector<IndexedPoint> p2(n);
        std::vector<Vec3> x2(n);
        std::vector<std::uint32_t> s2(n);
        for (std::size_t i = 0; i < n; ++i) {
            p2[i] = points_[perm[i]];
            x2[i] = xyz_[perm[i]];
            s2[i] = slot_[perm[i]];
        }
        points_ = std::move(p2);
        xyz_ = std::move(x2);
        slot_ = std::move(s2);
        inverse_.resize(n);
        for (std::size_t i = 0; i < n; ++i) inverse_[slot_[i]] = static_cast<std::uint32_t>(i);
    }

    std::uint32_t build_node(std::vector<std::uint32_t>& perm, std::uint32_t begin, std::uint32_t end) {
        const auto idx = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        Node node;
        node.begin = begin;
        node.end = end;
        node.lo = {1e300, 1e300, 1e300};
        node.hi = {-1e300, -1e300, -1e300};
        for (std::uint32_t i = begin; i < end; ++i) {
            const Vec3& v = xyz_[perm[i]];
            for (int d = 0; d < 3; ++d) {
                node.lo[d] = std::min(node.lo[d], v[d]);
                node.hi[d] = std::max(node.hi[d], v[d]);
            }
        }
        if (end - begin > kLeafSize) {
            int axis = 0;
            for (int d = 1; d < 3; ++d)
                if (node.hi[d] - node.lo[d] > node.hi[axis] - node.lo[axis]) axis = d;
            const std::uint32_t mid = begin + (end - begin) / 2;
            std::nth_element(perm.begin() + begin, perm.begin() + mid, perm.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) {
                                 if (xyz_[a][axis] != xyz_[b][axis]) return xyz_[a][axis] < xyz_[b][axis];
                                 return a < b;
                             });
            node.left = build_node(perm, begin, mid);
            node.right = build_node(perm, mid, end);
        }
        nodes_[idx] = node;
        return idx;
    }

    std::vector<IndexedPoint> points_;
    std::vector<Vec3> xyz_;
    std::vector<std::uint32_t> slot_;
    std::vector<std::uint32_t> inverse_;
    std::vector<Node> nodes_;
};

}  // namespace sdm::geo
