#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "trijoin/geom.hpp"
#include "trijoin/mesh.hpp"

namespace trijoin {

// Static AABB tree over a triangle soup (median split on the longest axis,
// deterministic). Supports point-to-surface distance and exact minimum
// distance between two trees.
class TriBvh {
public:
    TriBvh() = default;
    explicit TriBvh(const Mesh& mesh);
    TriBvh(const Mesh& mesh, const std::vector<uint32_t>& facet_ids);

    bool empty() const { return tris_.empty(); }

    // Exact distance from p to the nearest triangle.
    double point_distance(const Point3& p) const;

    // Exact min over all triangle pairs of tri_tri_distance. Stops early and
    // returns the running minimum once it is <= stop_at (the true minimum is
    // then also <= stop_at).
    static double pair_distance(const TriBvh& a, const TriBvh& b, double stop_at = -1.0);

private:
    struct Node {
        Aabb box;
        uint32_t left = 0;   // internal: child index; leaf: first triangle
        uint32_t count = 0;  // 0 for internal nodes; leaf: triangle count
        uint32_t right = 0;  // internal only
    };

    void build(std::vector<uint32_t>& ids, std::vector<Point3>& centroids);
    uint32_t build_node(std::vector<uint32_t>& ids, size_t begin, size_t end,
                        const std::vector<Point3>& centroids);

    std::vector<Node> nodes_;
    std::vector<Triangle> tris_; // leaf order
};

} // namespace trijoin
