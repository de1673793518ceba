#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trijoin/filter.hpp"
#include "trijoin/index.hpp"
#include "trijoin/knn.hpp"
#include "trijoin/refine.hpp"

namespace trijoin {

enum class JoinType { Within, Intersect, Knn };

std::string join_type_name(JoinType t);

struct JoinSpec {
    JoinType type = JoinType::Within;
    double tau = 0.0; // within; intersect forces 0
    uint32_t k = 1;   // knn
    uint64_t filter_chunk = 4194304; // voxel pairs per filter chunk
    uint64_t refine_chunk = 500000;  // voxel pairs per refine chunk
    std::vector<uint32_t> lods{20, 40, 60, 80, 100};
    bool pipeline = true;
    uint32_t workers = 0; // 0 = hardware concurrency
    uint64_t seed = 0;
    bool exact = false; // recompute exact distances for confirmed pairs
};

// Throws std::invalid_argument on violated invariants
// (tau >= 0, k >= 1, intersect => tau == 0, nonzero chunks).
void validate(const JoinSpec& spec);

struct JoinResultRecord {
    uint32_t r = 0, s = 0;
    double lb = 0.0, ub = 0.0;
    int16_t decided_at = stage::kNone;
    uint32_t rank = 0; // knn only, 1-based
};

struct StageCounters {
    std::string name;
    double wall_ms = 0.0;
    uint64_t pairs_in = 0;
    uint64_t confirmed = 0;
    uint64_t removed = 0;
    uint64_t pairs_out = 0; // pairs_in - confirmed - removed
    uint64_t vp_generated = 0, vp_pruned = 0;
    uint64_t facet_pairs = 0;
};

struct StageStats {
    std::string query;
    std::vector<StageCounters> stages;
    uint64_t results = 0;
    double total_ms = 0.0;

    std::string to_json() const;
};

struct JoinOutput {
    std::vector<JoinResultRecord> records; // within: (r,s) order; knn: (r,rank)
    StageStats stats;
};

// Full pipeline: R-tree on S, MBB filter, chunked voxel filter, progressive
// refinement (k-NN rounds after every bounds update for knn queries).
JoinOutput run_join(const PreparedDataset& R, const PreparedDataset& S, const JoinSpec& spec,
                    ThreadPool& pool, const JoinTrace* trace = nullptr);

// "r s lb ub stage" plus a trailing rank for knn; %.17g distances.
std::string format_record(const JoinResultRecord& rec, bool knn);
std::string format_records(std::span<const JoinResultRecord> recs, bool knn);

// Exact reference join over original-resolution geometry; shares only the
// geometric primitives with the engine. Same record format and tie-breaks.
JoinOutput run_oracle(const PreparedDataset& R, const PreparedDataset& S, const JoinSpec& spec,
                      ThreadPool& pool);

} // namespace trijoin
