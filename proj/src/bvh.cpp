#include "trijoin/bvh.hpp"

#include <algorithm>
#include <queue>

namespace trijoin {

namespace {
constexpr uint32_t kLeafSize = 4;

double point_box_distance(const Point3& p, const Aabb& b) {
    const double gx = std::max({0.0, b.min.x - p.x, p.x - b.max.x});
    const double gy = std::max({0.0, b.min.y - p.y, p.y - b.max.y});
    const double gz = std::max({0.0, b.min.z - p.z, p.z - b.max.z});
    return std::sqrt(gx * gx + gy * gy + gz * gz);
}
} // namespace

TriBvh::TriBvh(const Mesh& mesh) {
    std::vector<uint32_t> ids(mesh.facets.size());
    for (uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    tris_.reserve(ids.size());
    for (uint32_t i = 0; i < ids.size(); ++i) tris_.push_back(mesh.triangle(i));
    std::vector<Point3> centroids;
    centroids.reserve(tris_.size());
    for (const Triangle& t : tris_) centroids.push_back(t.centroid());
    build(ids, centroids);
}

TriBvh::TriBvh(const Mesh& mesh, const std::vector<uint32_t>& facet_ids) {
    std::vector<uint32_t> ids(facet_ids.size());
    for (uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
    tris_.reserve(facet_ids.size());
    for (uint32_t f : facet_ids) tris_.push_back(mesh.triangle(f));
    std::vector<Point3> centroids;
    centroids.reserve(tris_.size());
    for (const Triangle& t : tris_) centroids.push_back(t.centroid());
    build(ids, centroids);
}

void TriBvh::build(std::vector<uint32_t>& ids, std::vector<Point3>& centroids) {
    if (ids.empty()) return;
    nodes_.reserve(2 * ids.size() / kLeafSize + 2);
    build_node(ids, 0, ids.size(), centroids);
    // Reorder triangles into leaf order so leaves index contiguous runs.
    std::vector<Triangle> reordered(tris_.size());
    for (size_t i = 0; i < ids.size(); ++i) reordered[i] = tris_[ids[i]];
    tris_ = std::move(reordered);
}

uint32_t TriBvh::build_node(std::vector<uint32_t>& ids, size_t begin, size_t end,
                            const std::vector<Point3>& centroids) {
    const uint32_t index = static_cast<uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box = Aabb::empty();
    for (size_t i = begin; i < end; ++i) box.expand(tris_[ids[i]]);
    nodes_[index].box = box;
    if (end - begin <= kLeafSize) {
        nodes_[index].left = static_cast<uint32_t>(begin);
        nodes_[index].count = static_cast<uint32_t>(end - begin);
        return index;
    }
    const Point3 ext = box.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > (axis == 0 ? ext.x : ext.y)) axis = 2;
    const size_t mid = begin + (end - begin) / 2;
    std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                     [&](uint32_t a, uint32_t b) {
                         const double ca = axis == 0   ? centroids[a].x
                                           : axis == 1 ? centroids[a].y
                                                       : centroids[a].z;
                         const double cb = axis == 0   ? centroids[b].x
                                           : axis == 1 ? centroids[b].y
                                                       : centroids[b].z;
                         if (ca != cb) return ca < cb;
                         return a < b;
                     });
    const uint32_t l = build_node(ids, begin, mid, centroids);
    const uint32_t r = build_node(ids, mid, end, centroids);
    nodes_[index].left = l;
    nodes_[index].right = r;
    return index;
}

double TriBvh::point_distance(const Point3& p) const {
    if (tris_.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    // Small explicit stack; visit nearer child first.
    uint32_t stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (point_box_distance(p, n.box) >= best) continue;
        if (n.count > 0) {
            for (uint32_t i = 0; i < n.count; ++i)
                best = std::min(best, point_triangle_distance(p, tris_[n.left + i]));
            continue;
        }
        const double dl = point_box_distance(p, nodes_[n.left].box);
        const double dr = point_box_distance(p, nodes_[n.right].box);
        if (dl < dr) {
            if (dr < best && top < 63) stack[top++] = n.right;
            if (dl < best && top < 63) stack[top++] = n.left;
        } else {
            if (dl < best && top < 63) stack[top++] = n.left;
            if (dr < best && top < 63) stack[top++] = n.right;
        }
    }
    return best;
}

double TriBvh::pair_distance(const TriBvh& a, const TriBvh& b, double stop_at) {
    if (a.tris_.empty() || b.tris_.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    struct Item {
        double lb;
        uint32_t na, nb;
        bool operator>(const Item& o) const { return lb > o.lb; }
    };
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.push({mindist_aabb(a.nodes_[0].box, b.nodes_[0].box), 0, 0});
    while (!pq.empty()) {
        const Item it = pq.top();
        pq.pop();
        if (it.lb >= best) break; // can no longer improve the minimum
        const Node& na = a.nodes_[it.na];
        const Node& nb = b.nodes_[it.nb];
        if (na.count > 0 && nb.count > 0) {
            for (uint32_t i = 0; i < na.count; ++i)
                for (uint32_t j = 0; j < nb.count; ++j) {
                    best = std::min(best, tri_tri_distance(a.tris_[na.left + i], b.tris_[nb.left + j]));
                    if (best == 0.0) return 0.0;
                }
            if (best <= stop_at) return best;
            continue;
        }
        auto push = [&](uint32_t ia, uint32_t ib) {
            const double lb = mindist_aabb(a.nodes_[ia].box, b.nodes_[ib].box);
            if (lb < best) pq.push({lb, ia, ib});
        };
        // Split the node with the larger box; split both only when both are internal.
        const bool split_a = nb.count > 0 || (na.count == 0 && na.box.diagonal() >= nb.box.diagonal());
        if (split_a) {
            push(na.left, it.nb);
            push(na.right, it.nb);
        } else {
            push(it.na, nb.left);
            push(it.na, nb.right);
        }
    }
    return best;
}

} // namespace trijoin
