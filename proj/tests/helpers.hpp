#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "trijoin/dataset.hpp"
#include "trijoin/geom.hpp"
#include "trijoin/index.hpp"
#include "trijoin/mesh.hpp"
#include "trijoin/parcore.hpp"
#include "trijoin/rng.hpp"

namespace trijoin::testing {

inline Mesh make_cube(double half = 1.0, Point3 center = {}) {
    Mesh m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back({center.x + (i & 1 ? half : -half),
                              center.y + (i & 2 ? half : -half),
                              center.z + (i & 4 ? half : -half)});
    const uint32_t quads[6][4] = {{0, 1, 3, 2}, {4, 6, 7, 5}, {0, 4, 5, 1},
                                  {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 5, 7, 3}};
    for (const auto& q : quads) {
        m.facets.push_back({q[0], q[1], q[2]});
        m.facets.push_back({q[0], q[2], q[3]});
    }
    return m;
}

inline Point3 random_point(SplitMix64& rng, double lo, double hi) {
    return {rng.next_in(lo, hi), rng.next_in(lo, hi), rng.next_in(lo, hi)};
}

inline Triangle random_triangle(SplitMix64& rng, double lo, double hi, double size = 1.0) {
    const Point3 base = random_point(rng, lo, hi);
    return {base, base + random_point(rng, -size, size), base + random_point(rng, -size, size)};
}

inline Mesh translated(Mesh m, const Point3& shift) {
    for (Point3& v : m.vertices) v += shift;
    return m;
}

inline Mesh scaled(Mesh m, double s) {
    for (Point3& v : m.vertices) v = v * s;
    return m;
}

// Quadratic reference: exact min distance over all facet pairs.
inline double brute_pair_distance(const Mesh& a, const Mesh& b) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < a.facets.size(); ++i)
        for (size_t j = 0; j < b.facets.size(); ++j)
            best = std::min(best, tri_tri_distance(a.triangle(i), b.triangle(j)));
    return best;
}

// Min distance between two explicit facet subsets of two meshes.
inline double brute_facet_set_distance(const Mesh& a, std::span<const uint32_t> fa, const Mesh& b,
                                       std::span<const uint32_t> fb) {
    double best = std::numeric_limits<double>::infinity();
    for (uint32_t i : fa)
        for (uint32_t j : fb) best = std::min(best, tri_tri_distance(a.triangle(i), b.triangle(j)));
    return best;
}

// A small indexed dataset made from builtin shapes placed on a grid.
inline PreparedDataset mini_dataset(uint32_t count, double spacing, uint64_t seed,
                                    uint32_t facets = 120, double voxel_ratio = 0.02) {
    std::vector<Mesh> meshes;
    SplitMix64 rng(seed);
    uint32_t dims = 1;
    while (dims * dims * dims < count) ++dims;
    for (uint32_t i = 0; i < count; ++i) {
        Mesh m = make_builtin("mixed", facets, i);
        const Point3 shift{spacing * (i % dims) + rng.next_in(-0.1, 0.1),
                           spacing * (i / dims % dims) + rng.next_in(-0.1, 0.1),
                           spacing * (i / (dims * dims)) + rng.next_in(-0.1, 0.1)};
        meshes.push_back(translated(std::move(m), shift));
    }
    PreprocessParams params;
    params.voxel_ratio = voxel_ratio;
    params.seed = seed;
    ThreadPool pool(2);
    return preprocess_dataset(meshes, params, pool);
}

inline const Mesh& level100(const PreparedObject& obj) { return obj.ladder.levels.back().mesh; }

} // namespace trijoin::testing
