#pragma once

#include "flatpose/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace flatpose::geometry {

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Twice the signed area of triangle (a, b, c); positive when counter-clockwise.
inline double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) { return cross2(b - a, c - a); }

/// Shoelace area; positive for counter-clockwise loops.
inline double signed_area(const Polygon2& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) acc += cross2(poly[j], poly[i]);
    return 0.5 * acc;
}

inline double perimeter(const Polygon2& poly) {
    double len = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) len += (poly[i] - poly[j]).norm();
    return len;
}

struct BBox2 {
    Vec2 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

    void extend(const Vec2& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }
    bool overlaps(const BBox2& o) const {
        return min.x() <= o.max.x() && o.min.x() <= max.x() && min.y() <= o.max.y() && o.min.y() <= max.y();
    }
    Vec2 size() const { return max - min; }
    Vec2 center() const { return 0.5 * (min + max); }
};

inline BBox2 bounds(const Polygon2& poly) {
    BBox2 b;
    for (const auto& p : poly) b.extend(p);
    return b;
}

/// Even-odd crossing test. Points exactly on the boundary may go either way.
inline bool point_in_polygon(const Vec2& p, const Polygon2& poly) {
    bool inside = false;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > p.y()) != (b.y() > p.y())) {
            const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (p.x() < x) inside = !inside;
        }
    }
    return inside;
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
           p.y() <= std::max(a.y(), b.y());
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

/// Closed-segment intersection test (touching and collinear overlap count).
inline bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
    const int d1 = sign_of(orient2d(q1, q2, p1));
    const int d2 = sign_of(orient2d(q1, q2, p2));
    const int d3 = sign_of(orient2d(p1, p2, q1));
    const int d4 = sign_of(orient2d(p1, p2, q2));
    if (d1 != d2 && d3 != d4) return true;
    if (d1 == 0 && on_segment(q1, q2, p1)) return true;
    if (d2 == 0 && on_segment(q1, q2, p2)) return true;
    if (d3 == 0 && on_segment(p1, p2, q1)) return true;
    if (d4 == 0 && on_segment(p1, p2, q2)) return true;
    return false;
}

/// Interiors cross at a single point (no shared endpoints, no touching).
inline bool segments_cross_properly(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
    const int d1 = sign_of(orient2d(q1, q2, p1));
    const int d2 = sign_of(orient2d(q1, q2, p2));
    const int d3 = sign_of(orient2d(p1, p2, q1));
    const int d4 = sign_of(orient2d(p1, p2, q2));
    return d1 * d2 < 0 && d3 * d4 < 0;
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) return (p - a).norm();
    const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (a + t * ab - p).norm();
}

/// No two non-adjacent edges intersect and adjacent edges meet only at
/// their shared vertex. O(n^2) with bounding-box rejection.
inline bool is_simple(const Polygon2& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    std::vector<BBox2> boxes(n);
    for (std::size_t i = 0; i < n; ++i) {
        boxes[i].extend(poly[i]);
        boxes[i].extend(poly[(i + 1) % n]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a1 = poly[i];
        const Vec2& a2 = poly[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!boxes[i].overlaps(boxes[j])) continue;
            const Vec2& b1 = poly[j];
            const Vec2& b2 = poly[(j + 1) % n];
            const bool adjacent_next = (j == i + 1);
            const bool adjacent_prev = (i == 0 && j == n - 1);
            if (adjacent_next) {
                // share a2 == b1; they must not fold back onto each other
                if (orient2d(a1, a2, b2) == 0.0 && (b2 - a2).dot(a1 - a2) > 0.0) return false;
                continue;
            }
            if (adjacent_prev) {
                if (orient2d(b1, b2, a2) == 0.0 && (a2 - a1).dot(b1 - b2) > 0.0) return false;
                continue;
            }
            if (segments_intersect(a1, a2, b1, b2)) return false;
        }
    }
    return true;
}

/// True when any edge of `a` touches or crosses any edge of `b`.
inline bool polygon_edges_intersect(const Polygon2& a, const Polygon2& b) {
    if (!bounds(a).overlaps(bounds(b))) return false;
    for (std::size_t i = 0, pi = a.size() - 1; i < a.size(); pi = i++) {
        BBox2 ea;
        ea.extend(a[pi]);
        ea.extend(a[i]);
        for (std::size_t j = 0, pj = b.size() - 1; j < b.size(); pj = j++) {
            BBox2 eb;
            eb.extend(b[pj]);
            eb.extend(b[j]);
            if (!ea.overlaps(eb)) continue;
            if (segments_intersect(a[pi], a[i], b[pj], b[j])) return true;
        }
    }
    return false;
}

/// Regions bounded by two simple loops overlap (including boundary contact).
inline bool polygons_overlap(const Polygon2& a, const Polygon2& b) {
    if (a.empty() || b.empty()) return false;
    if (!bounds(a).overlaps(bounds(b))) return false;
    if (polygon_edges_intersect(a, b)) return true;
    return point_in_polygon(a.front(), b) || point_in_polygon(b.front(), a);
}

/// Loop `inner` lies strictly inside loop `outer`.
inline bool loop_strictly_inside(const Polygon2& inner, const Polygon2& outer) {
    if (polygon_edges_intersect(inner, outer)) return false;
    return point_in_polygon(inner.front(), outer);
}

/// Area centroid of a simple loop.
inline Vec2 area_centroid(const Polygon2& poly) {
    double a = 0.0;
    Vec2 c = Vec2::Zero();
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
        const double w = cross2(poly[j], poly[i]);
        a += w;
        c += w * (poly[j] + poly[i]);
    }
    return c / (3.0 * a);
}

/// Points spaced `spacing` apart along the closed loop, starting at vertex 0.
inline std::vector<Vec2> resample_loop(const Polygon2& poly, double spacing) {
    std::vector<Vec2> out;
    if (poly.size() < 2 || spacing <= 0.0) return out;
    double carry = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        const double len = (b - a).norm();
        double s = carry;
        while (s < len) {
            out.push_back(a + (b - a) * (s / len));
            s += spacing;
        }
        carry = s - len;
    }
    return out;
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear
/// points dropped.
inline Polygon2 convex_hull(std::vector<Vec2> pts) {
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    Polygon2 hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && orient2d(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && orient2d(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace flatpose::geometry
