#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "trijoin/filter.hpp"
#include "trijoin/index.hpp"
#include "trijoin/parcore.hpp"

namespace trijoin {

struct KnnState;

// One surviving voxel pair of a still-undecided candidate pair.
struct ActiveVp {
    uint32_t op;
    uint32_t vr, vs;
};

struct VpDesc {
    uint64_t r_off, s_off;
    uint32_t r_len, s_len;
    uint32_t op; // back-reference to the candidate pair
};

// Facet data for a slice of voxel pairs at one LoD level. Each referenced
// voxel's facets are stored once, contiguously; descriptors address them by
// offset and length. A voxel with no facets at this level gets length 0.
struct VoxelPairBatch {
    std::vector<Triangle> tris;
    std::vector<double> hd, ph; // per facet, parallel to tris
    std::vector<VpDesc> descs;
};

struct RefineConfig {
    std::vector<uint32_t> lods{20, 40, 60, 80, 100};
    uint64_t chunk = 500000; // voxel pairs per refinement chunk
    bool pipeline = true;
};

struct RefineLevelStats {
    uint32_t level = 0;
    double wall_ms = 0.0;
    uint64_t vps = 0;
    uint64_t facet_pairs = 0;
};

struct RefineStats {
    uint64_t facet_pairs = 0; // triangle-distance evaluations
    uint64_t kernel_vps = 0;  // voxel pairs refined, summed over levels
    uint64_t chunks = 0;
    std::vector<RefineLevelStats> levels;
};

VoxelPairBatch gather_facet_data(std::span<const ActiveVp> slice, uint32_t level,
                                 const PreparedDataset& R, const PreparedDataset& S,
                                 const CandidateSet& cands);

// Per voxel pair, the min over its facet pairs of the deviation-padded
// lower/upper bounds on the original-resolution distance. Pairs with an
// empty segment yield (+inf, +inf). Deterministic across worker counts.
void refine_kernel(const VoxelPairBatch& batch, ThreadPool& pool, std::vector<double>& vp_lb,
                   std::vector<double>& vp_ub);

// Fold per-voxel-pair bounds into per-candidate bounds (min over each pair's
// voxel pairs) and intersect them into the running intervals. Requires the
// kernel outputs of *all* surviving voxel pairs of the touched candidates;
// a partial fold would overstate the lower bound. Candidates whose voxel
// pairs all carry no information (+inf) are left untouched. Returns the
// number of candidates updated.
size_t aggregate_object_bounds(std::span<const double> vp_lb, std::span<const double> vp_ub,
                               std::span<const uint32_t> vp_op, CandidateSet& cands,
                               int16_t stage_code, const JoinTrace* trace = nullptr);

// Progressive refinement over the LoD schedule. Exactly one of `tau` and
// `knn` selects the query type; after every level the candidate set is
// pruned (within-tau) or k-NN rounds run to fixpoint, and voxel pairs of
// decided candidates are dropped. With pipeline on, a preparation worker
// gathers chunk c+2 and a staging worker copies chunk c+1 into a compute
// arena while chunk c computes; results are applied in chunk order, so the
// outcome is independent of timing, chunk size and pipeline mode.
void refine_loop(CandidateSet& cands, const VoxelPairList& vplist, const PreparedDataset& R,
                 const PreparedDataset& S, const RefineConfig& config, std::optional<double> tau,
                 KnnState* knn, ThreadPool& pool, RefineStats* stats = nullptr,
                 const JoinTrace* trace = nullptr);

} // namespace trijoin
