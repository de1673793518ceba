#include <algorithm>
#include <cmath>

#include "trijoin/index.hpp"

namespace trijoin {

namespace {

// Sort-tile-recursive tiling: sort by x center into slabs, by y into runs,
// by z within a run, then emit groups of up to kFanout. Ties broken by id so
// the packing is deterministic.
std::vector<std::vector<uint32_t>> str_tile(const std::vector<Aabb>& boxes,
                                            std::vector<uint32_t> ids) {
    const size_t n = ids.size();
    const size_t fanout = RTree::kFanout;
    std::vector<std::vector<uint32_t>> groups;
    if (n == 0) return groups;

    auto center = [&](uint32_t id, int axis) {
        const Point3 c = boxes[id].center();
        return axis == 0 ? c.x : axis == 1 ? c.y : c.z;
    };
    auto sort_by = [&](std::vector<uint32_t>::iterator b, std::vector<uint32_t>::iterator e,
                       int axis) {
        std::sort(b, e, [&](uint32_t x, uint32_t y) {
            const double cx = center(x, axis), cy = center(y, axis);
            if (cx != cy) return cx < cy;
            return x < y;
        });
    };

    const size_t pages = (n + fanout - 1) / fanout;
    const size_t s1 = static_cast<size_t>(std::ceil(std::cbrt(static_cast<double>(pages))));
    const size_t slab_len = (n + s1 - 1) / s1;

    sort_by(ids.begin(), ids.end(), 0);
    for (size_t sb = 0; sb < n; sb += slab_len) {
        const size_t se = std::min(n, sb + slab_len);
        const size_t slab_n = se - sb;
        const size_t slab_pages = (slab_n + fanout - 1) / fanout;
        const size_t s2 = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(slab_pages))));
        const size_t run_len = (slab_n + s2 - 1) / s2;

        sort_by(ids.begin() + sb, ids.begin() + se, 1);
        for (size_t rb = sb; rb < se; rb += run_len) {
            const size_t re = std::min(se, rb + run_len);
            sort_by(ids.begin() + rb, ids.begin() + re, 2);
            for (size_t gb = rb; gb < re; gb += fanout) {
                const size_t ge = std::min(re, gb + fanout);
                groups.emplace_back(ids.begin() + gb, ids.begin() + ge);
            }
        }
    }
    return groups;
}

} // namespace

RTree build_rtree(std::span<const PreparedObject> objects) {
    RTree tree;
    if (objects.empty()) return tree;

    std::vector<Aabb> entry_boxes(objects.size());
    std::vector<uint32_t> entry_ids(objects.size());
    for (uint32_t i = 0; i < objects.size(); ++i) {
        entry_boxes[i] = objects[i].mbb;
        entry_ids[i] = i;
    }

    // Build per-level node vectors bottom-up. Internal nodes temporarily
    // store `first` as an index into the child level; fixed up at layout.
    std::vector<std::vector<RTree::Node>> levels;

    levels.emplace_back();
    for (const auto& g : str_tile(entry_boxes, std::move(entry_ids))) {
        RTree::Node node;
        node.leaf = true;
        node.first = static_cast<uint32_t>(tree.entries.size());
        node.count = static_cast<uint32_t>(g.size());
        node.box = Aabb::empty();
        for (uint32_t id : g) {
            tree.entries.push_back(id);
            node.box.expand(entry_boxes[id]);
        }
        levels.back().push_back(node);
    }

    while (levels.back().size() > 1) {
        std::vector<RTree::Node>& child_level = levels.back();
        std::vector<Aabb> boxes(child_level.size());
        std::vector<uint32_t> ids(child_level.size());
        for (uint32_t i = 0; i < child_level.size(); ++i) {
            boxes[i] = child_level[i].box;
            ids[i] = i;
        }
        const auto groups = str_tile(boxes, std::move(ids));

        // Children of one parent must be contiguous: permute the child level
        // into group order (nodes carry their own child references with them).
        std::vector<RTree::Node> packed;
        packed.reserve(child_level.size());
        std::vector<RTree::Node> parents;
        parents.reserve(groups.size());
        for (const auto& g : groups) {
            RTree::Node node;
            node.leaf = false;
            node.first = static_cast<uint32_t>(packed.size());
            node.count = static_cast<uint32_t>(g.size());
            node.box = Aabb::empty();
            for (uint32_t local : g) {
                node.box.expand(child_level[local].box);
                packed.push_back(child_level[local]);
            }
            parents.push_back(node);
        }
        child_level = std::move(packed);
        levels.push_back(std::move(parents));
    }

    // Layout: leaves first, then each level up; shift child references.
    std::vector<uint32_t> base(levels.size(), 0);
    for (size_t k = 1; k < levels.size(); ++k)
        base[k] = base[k - 1] + static_cast<uint32_t>(levels[k - 1].size());
    for (size_t k = 0; k < levels.size(); ++k) {
        for (RTree::Node node : levels[k]) {
            if (!node.leaf) node.first += base[k - 1];
            tree.nodes.push_back(node);
        }
    }
    tree.root = base.back();
    tree.node_levels = static_cast<int>(levels.size());
    return tree;
}

} // namespace trijoin
