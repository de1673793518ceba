#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trijoin/filter.hpp"
#include "trijoin/parcore.hpp"
#include "trijoin/refine.hpp"

namespace trijoin {

struct KnnState {
    uint32_t k = 1;
    std::vector<uint32_t> num_confirmed; // per query object
};

// Seeds num_confirmed from statuses already present in the candidate set.
KnnState make_knn_state(const CandidateSet& cands, uint32_t k);

struct KnnDelta {
    uint32_t op;
    PairStatus status;
};

// One snapshot round of interval-based candidate pruning. Per query r with
// undecided set U and kLeft = k - numConfirmed[r], a candidate m is
//   CONFIRMED when (|U|-1) - |{n : lb(n) > ub(m)}| < kLeft
//   REMOVED   when |{n : ub(n) < lb(m)}| >= kLeft
// (counts over U \ {m}, strict comparisons). All decisions are evaluated
// against the state at round start and returned as deltas, so the result is
// independent of candidate order and worker count.
std::vector<KnnDelta> knn_prune_round(const KnnState& state, const CandidateSet& cands,
                                      ThreadPool& pool);

// Applies one round's deltas and updates the confirmed counts.
size_t knn_apply_deltas(KnnState& state, CandidateSet& cands, std::span<const KnnDelta> deltas,
                        int16_t stage_code);

// Rounds until no status changes; returns the total number of decisions.
size_t knn_prune_to_fixpoint(KnnState& state, CandidateSet& cands, int16_t stage_code,
                             ThreadPool& pool);

// After the final level the intervals of undecided candidates are exact
// (width 0). Fills the remaining slots per query in (distance, id) order and
// removes the rest; afterwards every query has min(k, |candidates|)
// confirmed neighbors.
void knn_finalize(KnnState& state, CandidateSet& cands);

// Full k-NN resolution: refinement with pruning rounds after every bounds
// update, then the exact fill.
void knn_resolve(KnnState& state, CandidateSet& cands, const VoxelPairList& vplist,
                 const PreparedDataset& R, const PreparedDataset& S, const RefineConfig& config,
                 ThreadPool& pool, RefineStats* stats = nullptr, const JoinTrace* trace = nullptr);

} // namespace trijoin
