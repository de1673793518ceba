#include <algorithm>
#include <cmath>
#include <numeric>

#include "trijoin/index.hpp"
#include "trijoin/rng.hpp"

namespace trijoin {

namespace {

uint32_t nearest_center(const Point3& p, const std::vector<Point3>& centers) {
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_c = 0;
    for (uint32_t c = 0; c < centers.size(); ++c) {
        const double d = norm2(p - centers[c]);
        if (d < best) {
            best = d;
            best_c = c;
        }
    }
    return best_c;
}

} // namespace

std::vector<uint32_t> voxelize(const LodMesh& coarsest, uint32_t k, uint64_t seed) {
    if (k == 0) throw std::invalid_argument("voxelize: k must be >= 1");
    const size_t nf = coarsest.mesh.facets.size();
    const size_t nv = coarsest.mesh.vertices.size();
    k = static_cast<uint32_t>(std::min<size_t>(k, nf));

    std::vector<Point3> centroids(nf);
    for (size_t f = 0; f < nf; ++f) centroids[f] = coarsest.mesh.triangle(f).centroid();

    // Initial centers: uniform draw from the vertices, without replacement
    // while vertices last.
    SplitMix64 rng(seed);
    std::vector<uint32_t> vids(nv);
    std::iota(vids.begin(), vids.end(), 0u);
    std::vector<Point3> centers(k);
    for (uint32_t c = 0; c < k; ++c) {
        if (c < nv) {
            const size_t j = c + static_cast<size_t>(rng.next_below(nv - c));
            std::swap(vids[c], vids[j]);
            centers[c] = coarsest.mesh.vertices[vids[c]];
        } else {
            centers[c] = coarsest.mesh.vertices[rng.next_below(nv)];
        }
    }

    std::vector<uint32_t> labels(nf);
    auto assign = [&] {
        for (size_t f = 0; f < nf; ++f) labels[f] = nearest_center(centroids[f], centers);
    };

    assign();
    for (int round = 0; round < 2; ++round) {
        std::vector<Point3> sums(centers.size());
        std::vector<uint64_t> counts(centers.size(), 0);
        for (size_t f = 0; f < nf; ++f) {
            sums[labels[f]] += centroids[f];
            ++counts[labels[f]];
        }
        for (uint32_t c = 0; c < centers.size(); ++c)
            if (counts[c] > 0) centers[c] = sums[c] * (1.0 / static_cast<double>(counts[c]));
        assign();
    }

    // Drop empty clusters, relabel contiguously.
    std::vector<uint32_t> remap(centers.size(), UINT32_MAX);
    uint32_t next = 0;
    for (size_t f = 0; f < nf; ++f)
        if (remap[labels[f]] == UINT32_MAX) remap[labels[f]] = 0; // mark occupied
    for (uint32_t c = 0; c < centers.size(); ++c)
        if (remap[c] != UINT32_MAX) remap[c] = next++;
    for (size_t f = 0; f < nf; ++f) labels[f] = remap[labels[f]];
    return labels;
}

VoxelSet assign_voxels_across_lods(const LodLadder& ladder,
                                   const std::vector<uint32_t>& coarsest_assignment) {
    const size_t n_levels = ladder.levels.size();
    const LodMesh& coarsest = ladder.levels.front();
    const LodMesh& finest = ladder.levels.back();
    const size_t n_orig = finest.mesh.facets.size();

    uint32_t n_voxels = 0;
    for (uint32_t v : coarsest_assignment) n_voxels = std::max(n_voxels, v + 1);

    VoxelSet vs;
    vs.facets_per_level.assign(n_levels, {});

    // A facet inherits the voxel of its coarsest ancestor. Originals carried
    // by the same facet share that ancestor because member groups only merge
    // from fine to coarse.
    std::vector<std::vector<uint32_t>> facet_voxel(n_levels);
    for (size_t li = 0; li < n_levels; ++li) {
        const LodMesh& lod = ladder.levels[li];
        facet_voxel[li].assign(lod.mesh.facets.size(), UINT32_MAX);
        for (uint32_t orig = 0; orig < n_orig; ++orig) {
            const uint32_t f = lod.ancestor_of_original[orig];
            if (facet_voxel[li][f] == UINT32_MAX)
                facet_voxel[li][f] = coarsest_assignment[coarsest.ancestor_of_original[orig]];
        }
    }

    // Guard against voxels with no level-100 facets; cannot arise from this
    // pipeline but the reassignment path is kept for robustness.
    std::vector<uint8_t> voxel_live(n_voxels, 0);
    for (uint32_t orig = 0; orig < n_orig; ++orig) voxel_live[facet_voxel[n_levels - 1][orig]] = 1;
    std::vector<uint32_t> voxel_remap(n_voxels, UINT32_MAX);
    std::vector<Aabb> live_boxes;
    for (uint32_t v = 0; v < n_voxels; ++v)
        if (voxel_live[v]) voxel_remap[v] = static_cast<uint32_t>(live_boxes.size()), live_boxes.emplace_back();

    const uint32_t n_live = static_cast<uint32_t>(live_boxes.size());
    vs.boxes.assign(n_live, Aabb::empty());
    for (uint32_t orig = 0; orig < n_orig; ++orig)
        vs.boxes[voxel_remap[facet_voxel[n_levels - 1][orig]]].expand(finest.mesh.triangle(orig));

    for (size_t li = 0; li < n_levels; ++li) {
        const LodMesh& lod = ladder.levels[li];
        vs.facets_per_level[li].assign(n_live, {});
        for (uint32_t f = 0; f < lod.mesh.facets.size(); ++f) {
            uint32_t v = facet_voxel[li][f];
            uint32_t live = voxel_remap[v];
            if (live == UINT32_MAX) {
                // Dropped voxel: nearest surviving box by facet centroid.
                const Point3 c = lod.mesh.triangle(f).centroid();
                double best = std::numeric_limits<double>::infinity();
                for (uint32_t w = 0; w < n_live; ++w) {
                    const Aabb& b = vs.boxes[w];
                    const double gx = std::max({0.0, b.min.x - c.x, c.x - b.max.x});
                    const double gy = std::max({0.0, b.min.y - c.y, c.y - b.max.y});
                    const double gz = std::max({0.0, b.min.z - c.z, c.z - b.max.z});
                    const double d = gx * gx + gy * gy + gz * gz;
                    if (d < best) {
                        best = d;
                        live = w;
                    }
                }
                ++vs.reassigned;
            }
            vs.facets_per_level[li][live].push_back(f);
        }
    }

    vs.anchors.resize(n_live);
    for (uint32_t v = 0; v < n_live; ++v)
        vs.anchors[v] = compute_voxel_anchor(vs.boxes[v], finest.mesh,
                                             vs.facets_per_level[n_levels - 1][v]);
    return vs;
}

Point3 compute_object_anchor(const Mesh& mesh) {
    if (mesh.vertices.empty()) throw std::invalid_argument("compute_object_anchor: empty mesh");
    // The anchor must lie on the surface: anchor-to-anchor distances serve as
    // upper bounds on the surface distance, which an interior point (say the
    // box center of an object nested inside another) would undercut.
    const Point3 center = mesh.bounds().center();
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_v = 0;
    for (uint32_t v = 0; v < mesh.vertices.size(); ++v) {
        const double d = norm2(mesh.vertices[v] - center);
        if (d < best || (d == best && v < best_v)) {
            best = d;
            best_v = v;
        }
    }
    return mesh.vertices[best_v];
}

Point3 compute_voxel_anchor(const Aabb& box, const Mesh& level100,
                            std::span<const uint32_t> facet_ids) {
    if (facet_ids.empty()) throw std::logic_error("compute_voxel_anchor: empty voxel");
    const Point3 center = box.center();
    double best = std::numeric_limits<double>::infinity();
    uint32_t best_v = UINT32_MAX;
    for (uint32_t f : facet_ids) {
        for (uint32_t v : level100.facets[f]) {
            const double d = norm2(level100.vertices[v] - center);
            if (d < best || (d == best && v < best_v)) {
                best = d;
                best_v = v;
            }
        }
    }
    return level100.vertices[best_v];
}

PreparedObject prepare_object(uint32_t id, const Mesh& mesh, const PreprocessParams& params) {
    PreparedObject obj;
    obj.id = id;
    obj.mbb = mesh.bounds();
    obj.anchor = compute_object_anchor(mesh);
    obj.ladder = build_lod_ladder(mesh, params.lods, params.hd_grid);
    const uint32_t k = std::max<uint32_t>(
        1, static_cast<uint32_t>(std::ceil(params.voxel_ratio * mesh.facets.size())));
    const uint64_t object_seed = params.seed ^ ((id + 1) * 0x9E3779B97F4A7C15ULL);
    const std::vector<uint32_t> labels = voxelize(obj.ladder.levels.front(), k, object_seed);
    obj.voxels = assign_voxels_across_lods(obj.ladder, labels);
    return obj;
}

PreparedDataset preprocess_dataset(const std::vector<Mesh>& meshes, const PreprocessParams& params,
                                   ThreadPool& pool) {
    PreparedDataset ds;
    ds.lod_schedule = params.lods;
    ds.objects.resize(meshes.size());
    pool.parallel_jobs(meshes.size(), [&](size_t i) {
        ds.objects[i] = prepare_object(static_cast<uint32_t>(i), meshes[i], params);
    });
    return ds;
}

} // namespace trijoin
