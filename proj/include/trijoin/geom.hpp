#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace trijoin {

struct Point3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Point3() = default;
    Point3(double px, double py, double pz) : x(px), y(py), z(pz) {}

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Point3& operator+=(const Point3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    bool operator==(const Point3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Point3 cross(const Point3& a, const Point3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Point3& a) { return dot(a, a); }
inline double norm(const Point3& a) { return std::sqrt(norm2(a)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }

struct Triangle {
    Point3 v0, v1, v2;

    Point3 centroid() const { return (v0 + v1 + v2) * (1.0 / 3.0); }
    double longest_edge() const {
        return std::sqrt(std::max({norm2(v1 - v0), norm2(v2 - v1), norm2(v0 - v2)}));
    }
};

struct Aabb {
    Point3 min, max;

    static Aabb empty() {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {{inf, inf, inf}, {-inf, -inf, -inf}};
    }
    void expand(const Point3& p) {
        min.x = std::min(min.x, p.x); min.y = std::min(min.y, p.y); min.z = std::min(min.z, p.z);
        max.x = std::max(max.x, p.x); max.y = std::max(max.y, p.y); max.z = std::max(max.z, p.z);
    }
    void expand(const Triangle& t) { expand(t.v0); expand(t.v1); expand(t.v2); }
    void expand(const Aabb& b) { expand(b.min); expand(b.max); }
    Point3 center() const { return (min + max) * 0.5; }
    Point3 extent() const { return max - min; }
    double diagonal() const { return distance(min, max); }
    bool valid() const { return min.x <= max.x && min.y <= max.y && min.z <= max.z; }
};

// MINDIST between two boxes: zero iff they overlap or touch, otherwise the
// Euclidean length of the per-axis gap vector. Lower-bounds the distance
// between any geometry the boxes enclose.
double mindist_aabb(const Aabb& a, const Aabb& b);

double point_segment_distance(const Point3& p, const Point3& a, const Point3& b);

// Exact distance from p to the closed triangle. Degenerate (collinear or
// coincident-vertex) triangles fall back to the nearest edge.
double point_triangle_distance(const Point3& p, const Triangle& t);

// Exact min distance between closed segments, including parallel and
// point-degenerate ones.
double segment_segment_distance(const Point3& a0, const Point3& a1,
                                const Point3& b0, const Point3& b1);

// Min distance between two closed triangles: minimum over the 15 candidate
// distances (6 vertex-triangle, 9 edge-edge), plus an edge-piercing check so
// interpenetrating triangles report 0. Exactly symmetric in its arguments.
double tri_tri_distance(const Triangle& t1, const Triangle& t2);

enum class Containment { Inside, Outside, Indeterminate };

// Ray-casting parity test. Degenerate hits (grazing an edge/vertex within
// tolerance) redraw the ray direction from a fixed jitter sequence, up to 8
// retries; persistent degeneracy or obviously non-watertight input yields
// Indeterminate and the caller must fall back to a surface vertex.
Containment point_in_polyhedron(const Point3& p, std::span<const Triangle> facets);

} // namespace trijoin
