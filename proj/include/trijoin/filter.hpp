#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "trijoin/index.hpp"
#include "trijoin/parcore.hpp"

namespace trijoin {

enum class PairStatus : uint8_t { Undecided, Confirmed, Removed };

// Stage codes: negative sentinels for the pre-refinement stages, otherwise
// the LoD percentage that produced the decision (100 formats as "exact").
namespace stage {
constexpr int16_t kNone = -3;
constexpr int16_t kMbb = -2;
constexpr int16_t kVoxel = -1;
} // namespace stage
std::string stage_name(int16_t code);

struct Interval {
    double lb = 0.0;
    double ub = std::numeric_limits<double>::infinity();
};

struct EngineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Intersection update (lb <- max, ub <- min). Both inputs bound the same
// distance, so a crossing beyond 1e-9 is a soundness bug; within tolerance
// the interval collapses to the midpoint.
void intersect_interval(Interval& io, double lb, double ub);

struct CandidateSet {
    std::vector<std::pair<uint32_t, uint32_t>> pairs; // (r,s), contiguous per r
    std::vector<Interval> intervals;
    std::vector<PairStatus> status;
    std::vector<int16_t> decided_at;
    std::vector<uint64_t> r2op_offsets;  // size |R|+1
    std::vector<uint32_t> num_confirmed; // per r

    size_t size() const { return pairs.size(); }
    uint64_t undecided_count() const;
};

struct VoxelPairList {
    std::vector<uint64_t> op_offsets;                  // size |pairs|+1
    std::vector<std::pair<uint32_t, uint32_t>> vpairs; // (voxel of r, voxel of s)
};

// Observer hooks for validation harnesses; all fire on the coordinator.
struct JoinTrace {
    std::function<void(uint32_t op, int16_t stage, const Interval&)> on_interval;
    std::function<void(uint32_t op, uint32_t vr, uint32_t vs, double lb_v, double ub_o)>
        on_vp_pruned;
};

CandidateSet mbb_filter_within(const PreparedDataset& R, const PreparedDataset& S,
                               const RTree& tree, double tau, ThreadPool& pool,
                               const JoinTrace* trace = nullptr);
CandidateSet mbb_filter_knn(const PreparedDataset& R, const PreparedDataset& S, const RTree& tree,
                            uint32_t k, ThreadPool& pool, const JoinTrace* trace = nullptr);

// One run of undecided candidate pairs whose voxel-pair total fits the
// budget (or a single pair exceeding it, flagged oversized).
struct FilterChunk {
    std::vector<uint32_t> ops;        // candidate indices, ascending
    std::vector<uint64_t> vp_offsets; // exclusive scan of per-op voxel-pair counts, size ops+1
    bool oversized = false;

    uint64_t total_vp() const { return vp_offsets.empty() ? 0 : vp_offsets.back(); }
};

struct ChunkBounds {
    std::vector<double> vp_lb, vp_ub; // flattened voxel pairs of the chunk
    std::vector<double> op_lb, op_ub; // per op in the chunk
};

// Box/anchor bounds for every voxel pair of the chunk, reduced to per-object
// bounds and intersected into the candidate intervals.
ChunkBounds voxel_pair_bounds(const FilterChunk& chunk, CandidateSet& cands,
                              const PreparedDataset& R, const PreparedDataset& S, ThreadPool& pool,
                              const JoinTrace* trace = nullptr);

// ub <= tau confirms, lb > tau removes. `ops` empty means the whole set.
// Returns the number of status changes.
size_t prune_within(CandidateSet& cands, double tau, int16_t stage_code,
                    std::span<const uint32_t> ops = {});

// Survivors (voxel pairs with lb_v <= the pair's current ub) of the chunk's
// undecided pairs, in flattened order.
std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> voxel_pair_compact(
    const FilterChunk& chunk, const ChunkBounds& bounds, const CandidateSet& cands,
    const PreparedDataset& R, const PreparedDataset& S, ThreadPool& pool,
    const JoinTrace* trace = nullptr);

struct FilterStats {
    uint64_t vp_generated = 0;
    uint64_t vp_pruned = 0;
    uint64_t chunks = 0;
    uint64_t oversized_chunks = 0;
};

// Greedy consecutive packing within `budget` voxel pairs; per chunk: bounds,
// optional within-tau prune, compaction. With pipeline on, chunk c's survivor
// drain overlaps chunk c+1's compute under two output buffers.
VoxelPairList chunked_filter(CandidateSet& cands, const PreparedDataset& R,
                             const PreparedDataset& S, uint64_t budget,
                             std::optional<double> tau, bool pipeline, ThreadPool& pool,
                             FilterStats* stats = nullptr, const JoinTrace* trace = nullptr);

uint64_t voxel_pair_count(const CandidateSet& cands, uint32_t op, const PreparedDataset& R,
                          const PreparedDataset& S);

} // namespace trijoin
