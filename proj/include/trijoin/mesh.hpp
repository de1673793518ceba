#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trijoin/geom.hpp"

namespace trijoin {

struct Mesh {
    std::vector<Point3> vertices;
    std::vector<std::array<uint32_t, 3>> facets;

    bool operator==(const Mesh&) const = default;

    Triangle triangle(size_t f) const {
        const auto& t = facets[f];
        return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
    }
    Aabb bounds() const {
        Aabb b = Aabb::empty();
        for (const Point3& v : vertices) b.expand(v);
        return b;
    }
};

struct ParseError : std::runtime_error {
    size_t line;
    ParseError(size_t line_, const std::string& what_)
        : std::runtime_error("line " + std::to_string(line_) + ": " + what_), line(line_) {}
};

// Standard OFF; polygons with more than 3 vertices are fan-triangulated
// (v0, vi, vi+1). Throws ParseError with the offending 1-based line number.
Mesh parse_off(std::string_view text);
std::string write_off(const Mesh& m);

struct LodMesh {
    int level = 100; // percentage of the original facet count
    Mesh mesh;
    std::vector<double> hd; // per facet: deviation of this facet from the original surface
    std::vector<double> ph; // per facet: deviation of its mapped original facets from it
    std::vector<uint32_t> ancestor_of_original; // original facet id -> facet id at this level
    bool clamped = false; // simplification could not reach this level's facet target
};

struct LodLadder {
    std::vector<LodMesh> levels; // coarse -> fine; back() is the untouched input
};

// Deterministic shortest-edge-collapse ladder. `levels` must be ascending
// percentages ending at 100. Unreachable targets clamp (flag recorded).
// hd/ph are filled for every level (identically 0 at level 100).
LodLadder build_lod_ladder(const Mesh& mesh, const std::vector<int>& levels, int hd_grid = 8);

class TriBvh; // see trijoin/bvh.hpp

// Conservative upper bound on max_{q in f_prime} dist(q, surface(original)):
// max over a barycentric sample grid (grid_level subdivisions per edge) plus
// the grid covering radius; sound by 1-Lipschitzness of the distance field.
double compute_facet_hd(const Triangle& f_prime, const TriBvh& original, int grid_level = 8);
double compute_facet_hd(const Triangle& f_prime, const Mesh& original, int grid_level = 8);

// Exact max over original facets g mapped to f_prime of the deviation of g
// from f_prime's triangle; the max is attained at a vertex of g because
// distance to a convex set is convex.
double compute_facet_ph(uint32_t f_prime_id, const LodMesh& lod, const Mesh& original);

double hd_covering_radius(const Triangle& f_prime, int grid_level);

} // namespace trijoin
