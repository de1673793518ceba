#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "trijoin/geom.hpp"
#include "trijoin/mesh.hpp"
#include "trijoin/parcore.hpp"

namespace trijoin {

struct VoxelSet {
    std::vector<Aabb> boxes;     // per voxel: AABB of its level-100 facets
    std::vector<Point3> anchors; // per voxel: a level-100 vertex inside the voxel
    // facets_per_level[level_index][voxel] -> facet ids at that level, ascending
    std::vector<std::vector<std::vector<uint32_t>>> facets_per_level;
    uint32_t reassigned = 0; // facets moved because their voxel was dropped

    uint32_t voxel_count() const { return static_cast<uint32_t>(boxes.size()); }
};

struct PreparedObject {
    uint32_t id = 0;
    Aabb mbb = Aabb::empty();
    Point3 anchor;
    LodLadder ladder;
    VoxelSet voxels;
};

struct PreparedDataset {
    std::vector<int> lod_schedule;
    std::vector<PreparedObject> objects;
};

struct PreprocessParams {
    double voxel_ratio = 0.02;
    std::vector<int> lods = {20, 40, 60, 80, 100};
    uint64_t seed = 0;
    int hd_grid = 8;
};

// Two-round seeded k-means over the coarsest level's facet centroids; initial
// centers drawn from that level's vertices. Returns a facet -> cluster label
// map with empty clusters dropped (labels contiguous from 0).
std::vector<uint32_t> voxelize(const LodMesh& coarsest, uint32_t k, uint64_t seed);

// Propagates the coarsest assignment to every level through the ancestor
// maps; boxes and anchors are computed on the level-100 geometry.
VoxelSet assign_voxels_across_lods(const LodLadder& ladder,
                                   const std::vector<uint32_t>& coarsest_assignment);

// Surface vertex nearest to the MBB center; ties by lowest vertex id.
Point3 compute_object_anchor(const Mesh& mesh);

// Vertex of the voxel's facets nearest to the box center; ties by lowest
// vertex id.
Point3 compute_voxel_anchor(const Aabb& box, const Mesh& level100,
                            std::span<const uint32_t> facet_ids);

PreparedObject prepare_object(uint32_t id, const Mesh& mesh, const PreprocessParams& params);
PreparedDataset preprocess_dataset(const std::vector<Mesh>& meshes, const PreprocessParams& params,
                                   ThreadPool& pool);

// Sort-tile-recursive packed R-tree, fanout 16, over object MBBs.
struct RTree {
    static constexpr uint32_t kFanout = 16;

    struct Node {
        Aabb box;
        uint32_t first = 0; // leaf: index into entries; internal: first child node
        uint32_t count = 0;
        bool leaf = true;
    };

    std::vector<Node> nodes;
    std::vector<uint32_t> entries; // object indices, grouped per leaf
    uint32_t root = 0;
    int node_levels = 0; // 1 when the root is a leaf

    bool empty() const { return nodes.empty(); }
};

RTree build_rtree(std::span<const PreparedObject> objects);

struct IndexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void save_index(const PreparedDataset& ds, const std::string& path);
PreparedDataset load_index(const std::string& path);
std::string serialize_index(const PreparedDataset& ds);
PreparedDataset deserialize_index(std::string_view bytes);

} // namespace trijoin
