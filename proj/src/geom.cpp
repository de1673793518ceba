#include "trijoin/geom.hpp"

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "trijoin/rng.hpp"

namespace trijoin {

double mindist_aabb(const Aabb& a, const Aabb& b) {
    const double gx = std::max({0.0, a.min.x - b.max.x, b.min.x - a.max.x});
    const double gy = std::max({0.0, a.min.y - b.max.y, b.min.y - a.max.y});
    const double gz = std::max({0.0, a.min.z - b.max.z, b.min.z - a.max.z});
    return std::sqrt(gx * gx + gy * gy + gz * gz);
}

double point_segment_distance(const Point3& p, const Point3& a, const Point3& b) {
    const Point3 d = b - a;
    const double dd = norm2(d);
    if (dd <= 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, d) / dd, 0.0, 1.0);
    return distance(p, a + d * t);
}

namespace {

// Relative test for a triangle with no usable interior.
bool triangle_degenerate(const Triangle& t, double* scale2_out = nullptr) {
    const Point3 ab = t.v1 - t.v0, ac = t.v2 - t.v0, bc = t.v2 - t.v1;
    const double scale2 = std::max({norm2(ab), norm2(ac), norm2(bc)});
    if (scale2_out) *scale2_out = scale2;
    const double n2 = norm2(cross(ab, ac));
    return n2 <= 1e-24 * scale2 * scale2;
}

} // namespace

double point_triangle_distance(const Point3& p, const Triangle& t) {
    if (triangle_degenerate(t)) {
        return std::min({point_segment_distance(p, t.v0, t.v1),
                         point_segment_distance(p, t.v1, t.v2),
                         point_segment_distance(p, t.v2, t.v0)});
    }
    // Ericson, Real-Time Collision Detection, closest point on triangle.
    const Point3 a = t.v0, b = t.v1, c = t.v2;
    const Point3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = dot(ab, ap), d2 = dot(ac, ap);
    if (d1 <= 0.0 && d2 <= 0.0) return distance(p, a);

    const Point3 bp = p - b;
    const double d3 = dot(ab, bp), d4 = dot(ac, bp);
    if (d3 >= 0.0 && d4 <= d3) return distance(p, b);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return distance(p, a + ab * v);
    }

    const Point3 cp = p - c;
    const double d5 = dot(ab, cp), d6 = dot(ac, cp);
    if (d6 >= 0.0 && d5 <= d6) return distance(p, c);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return distance(p, a + ac * w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return distance(p, b + (c - b) * w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return distance(p, a + ab * v + ac * w);
}

double segment_segment_distance(const Point3& p1, const Point3& q1,
                                const Point3& p2, const Point3& q2) {
    // Ericson, closest points of two segments, with clamped parameters.
    const Point3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
    const double a = norm2(d1), e = norm2(d2), f = dot(d2, r);

    double s = 0.0, t = 0.0;
    if (a <= 0.0 && e <= 0.0) {
        return distance(p1, p2);
    }
    if (a <= 0.0) {
        t = std::clamp(f / e, 0.0, 1.0);
    } else {
        const double c = dot(d1, r);
        if (e <= 0.0) {
            s = std::clamp(-c / a, 0.0, 1.0);
        } else {
            const double b = dot(d1, d2);
            const double denom = a * e - b * b;
            if (denom > 0.0) s = std::clamp((b * f - c * e) / denom, 0.0, 1.0);
            t = (b * s + f) / e;
            if (t < 0.0) {
                t = 0.0;
                s = std::clamp(-c / a, 0.0, 1.0);
            } else if (t > 1.0) {
                t = 1.0;
                s = std::clamp((b - c) / a, 0.0, 1.0);
            }
        }
    }
    return distance(p1 + d1 * s, p2 + d2 * t);
}

namespace {

// Does the closed segment pq cross the interior of a non-degenerate triangle?
// Boundary grazes may be missed here; those configurations already yield a
// zero candidate distance.
bool segment_pierces_triangle(const Point3& p, const Point3& q, const Triangle& t) {
    const Point3 dir = q - p;
    const Point3 e1 = t.v1 - t.v0, e2 = t.v2 - t.v0;
    const Point3 pv = cross(dir, e2);
    const double det = dot(e1, pv);
    const double scale = norm(dir) * norm(e1) * norm(e2);
    if (std::abs(det) <= 1e-14 * scale) return false;
    const double inv = 1.0 / det;
    const Point3 tv = p - t.v0;
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Point3 qv = cross(tv, e1);
    const double v = dot(dir, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double tt = dot(e2, qv) * inv;
    return tt >= 0.0 && tt <= 1.0;
}

// Lexicographic ordering so tri_tri_distance evaluates the same candidate
// calls regardless of argument order.
bool triangle_less(const Triangle& a, const Triangle& b) {
    const double* pa = &a.v0.x;
    const double* pb = &b.v0.x;
    for (int i = 0; i < 9; ++i) {
        if (pa[i] < pb[i]) return true;
        if (pa[i] > pb[i]) return false;
    }
    return false;
}

} // namespace

double tri_tri_distance(const Triangle& ta, const Triangle& tb) {
    const Triangle& t1 = triangle_less(tb, ta) ? tb : ta;
    const Triangle& t2 = triangle_less(tb, ta) ? ta : tb;

    const Point3 a[3] = {t1.v0, t1.v1, t1.v2};
    const Point3 b[3] = {t2.v0, t2.v1, t2.v2};

    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        best = std::min(best, point_triangle_distance(a[i], t2));
        best = std::min(best, point_triangle_distance(b[i], t1));
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            best = std::min(best, segment_segment_distance(a[i], a[(i + 1) % 3],
                                                           b[j], b[(j + 1) % 3]));
        }
    }
    if (best > 0.0) {
        if (!triangle_degenerate(t2)) {
            for (int i = 0; i < 3; ++i) {
                if (segment_pierces_triangle(a[i], a[(i + 1) % 3], t2)) return 0.0;
            }
        }
        if (!triangle_degenerate(t1)) {
            for (int j = 0; j < 3; ++j) {
                if (segment_pierces_triangle(b[j], b[(j + 1) % 3], t1)) return 0.0;
            }
        }
    }
    return best;
}

namespace {

enum class CastResult { Odd, Even, Degenerate };

CastResult cast_parity(const Point3& p, const Point3& dir,
                       std::span<const Triangle> facets, double t_eps) {
    constexpr double kBaryBand = 1e-9;
    long crossings = 0;
    for (const Triangle& t : facets) {
        double scale2 = 0.0;
        if (triangle_degenerate(t, &scale2)) continue; // measure-zero target
        const Point3 e1 = t.v1 - t.v0, e2 = t.v2 - t.v0;
        const Point3 pv = cross(dir, e2);
        const double det = dot(e1, pv);
        const double scale = std::sqrt(norm2(e1) * norm2(e2));
        if (std::abs(det) <= 1e-12 * scale) return CastResult::Degenerate; // grazing-parallel
        const double inv = 1.0 / det;
        const Point3 tv = p - t.v0;
        const double u = dot(tv, pv) * inv;
        if (u < -kBaryBand || u > 1.0 + kBaryBand) continue;
        const Point3 qv = cross(tv, e1);
        const double v = dot(dir, qv) * inv;
        if (v < -kBaryBand || u + v > 1.0 + kBaryBand) continue;
        const double tt = dot(e2, qv) * inv;
        if (tt < -t_eps) continue;
        // A hit near an edge, a vertex, or the query point itself is ambiguous.
        if (u < kBaryBand || v < kBaryBand || u + v > 1.0 - kBaryBand || tt < t_eps)
            return CastResult::Degenerate;
        ++crossings;
    }
    return (crossings % 2 == 1) ? CastResult::Odd : CastResult::Even;
}

struct PointKey {
    uint64_t a, b, c;
    bool operator==(const PointKey& o) const { return a == o.a && b == o.b && c == o.c; }
};
struct PointKeyHash {
    size_t operator()(const PointKey& k) const {
        uint64_t h = k.a * 0x9E3779B97F4A7C15ULL;
        h ^= k.b + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        h ^= k.c + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        return static_cast<size_t>(h);
    }
};

uint64_t bits_of(double d) {
    uint64_t u;
    static_assert(sizeof(u) == sizeof(d));
    __builtin_memcpy(&u, &d, sizeof(u));
    return u;
}

// Every undirected edge of a closed triangulated surface is shared by an even
// number of facets. Vertices are identified by exact coordinate bits, which
// holds for meshes instantiated from a shared vertex table.
bool obviously_open(std::span<const Triangle> facets) {
    std::unordered_map<PointKey, uint32_t, PointKeyHash> vertex_ids;
    vertex_ids.reserve(facets.size() * 2);
    auto id_of = [&](const Point3& p) {
        PointKey k{bits_of(p.x), bits_of(p.y), bits_of(p.z)};
        auto [it, _] = vertex_ids.try_emplace(k, static_cast<uint32_t>(vertex_ids.size()));
        return it->second;
    };
    std::unordered_map<uint64_t, int> edge_count;
    edge_count.reserve(facets.size() * 3);
    for (const Triangle& t : facets) {
        const uint32_t v[3] = {id_of(t.v0), id_of(t.v1), id_of(t.v2)};
        for (int i = 0; i < 3; ++i) {
            uint32_t x = v[i], y = v[(i + 1) % 3];
            if (x == y) continue; // collapsed edge of a sliver
            if (x > y) std::swap(x, y);
            ++edge_count[(static_cast<uint64_t>(x) << 32) | y];
        }
    }
    for (const auto& [_, count] : edge_count) {
        if (count % 2 != 0) return true;
    }
    return false;
}

} // namespace

Containment point_in_polyhedron(const Point3& p, std::span<const Triangle> facets) {
    if (facets.empty() || obviously_open(facets)) return Containment::Indeterminate;

    Aabb box = Aabb::empty();
    for (const Triangle& t : facets) box.expand(t);
    const double t_eps = 1e-9 * std::max(box.diagonal(), 1e-300);

    SplitMix64 rng(0x3D50A9C4F2E6B871ULL); // fixed jitter sequence
    for (int attempt = 0; attempt < 9; ++attempt) {
        Point3 dir;
        do {
            dir = {rng.next_in(-1.0, 1.0), rng.next_in(-1.0, 1.0), rng.next_in(-1.0, 1.0)};
        } while (norm2(dir) < 0.01);
        dir = dir * (1.0 / norm(dir));
        switch (cast_parity(p, dir, facets, t_eps)) {
            case CastResult::Odd: return Containment::Inside;
            case CastResult::Even: return Containment::Outside;
            case CastResult::Degenerate: break;
        }
    }
    return Containment::Indeterminate;
}

} // namespace trijoin
