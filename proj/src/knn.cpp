#include <algorithm>
#include <atomic>

#include "trijoin/knn.hpp"

namespace trijoin {

KnnState make_knn_state(const CandidateSet& cands, uint32_t k) {
    if (k == 0) throw std::invalid_argument("make_knn_state: k must be >= 1");
    KnnState st;
    st.k = k;
    const size_t nq = cands.r2op_offsets.empty() ? 0 : cands.r2op_offsets.size() - 1;
    st.num_confirmed.assign(nq, 0);
    for (size_t op = 0; op < cands.size(); ++op)
        if (cands.status[op] == PairStatus::Confirmed) ++st.num_confirmed[cands.pairs[op].first];
    return st;
}

std::vector<KnnDelta> knn_prune_round(const KnnState& state, const CandidateSet& cands,
                                      ThreadPool& pool) {
    const size_t nq = state.num_confirmed.size();
    std::vector<std::vector<KnnDelta>> per_r(nq);
    std::atomic<bool> bad{false};

    pool.parallel_jobs(nq, [&](size_t r) {
        std::vector<uint32_t> ops;
        std::vector<double> lbs, ubs;
        for (uint64_t op = cands.r2op_offsets[r]; op < cands.r2op_offsets[r + 1]; ++op) {
            if (cands.status[op] != PairStatus::Undecided) continue;
            ops.push_back(static_cast<uint32_t>(op));
            lbs.push_back(cands.intervals[op].lb);
            ubs.push_back(cands.intervals[op].ub);
        }
        if (ops.empty()) return;
        const int64_t k_left =
            static_cast<int64_t>(state.k) - static_cast<int64_t>(state.num_confirmed[r]);
        if (k_left < 0) {
            bad.store(true);
            return;
        }
        std::vector<double> sorted_lb = lbs, sorted_ub = ubs;
        std::sort(sorted_lb.begin(), sorted_lb.end());
        std::sort(sorted_ub.begin(), sorted_ub.end());
        const int64_t u = static_cast<int64_t>(ops.size());
        for (size_t m = 0; m < ops.size(); ++m) {
            // m itself never counts: lb(m) <= ub(m) keeps it out of both tails.
            const int64_t farther =
                u - (std::upper_bound(sorted_lb.begin(), sorted_lb.end(), ubs[m]) -
                     sorted_lb.begin());
            const int64_t closer =
                std::lower_bound(sorted_ub.begin(), sorted_ub.end(), lbs[m]) - sorted_ub.begin();
            if ((u - 1) - farther < k_left)
                per_r[r].push_back({ops[m], PairStatus::Confirmed});
            else if (closer >= k_left)
                per_r[r].push_back({ops[m], PairStatus::Removed});
        }
    });

    if (bad.load()) throw EngineError("knn_prune_round: confirmed count exceeds k");
    std::vector<KnnDelta> out;
    for (auto& v : per_r) out.insert(out.end(), v.begin(), v.end());
    return out;
}

size_t knn_apply_deltas(KnnState& state, CandidateSet& cands, std::span<const KnnDelta> deltas,
                        int16_t stage_code) {
    for (const KnnDelta& d : deltas) {
        if (cands.status[d.op] != PairStatus::Undecided)
            throw EngineError("knn_apply_deltas: candidate decided twice");
        cands.status[d.op] = d.status;
        cands.decided_at[d.op] = stage_code;
        if (d.status == PairStatus::Confirmed) {
            const uint32_t r = cands.pairs[d.op].first;
            ++cands.num_confirmed[r];
            if (++state.num_confirmed[r] > state.k)
                throw EngineError("knn_apply_deltas: confirmed count exceeds k");
        }
    }
    return deltas.size();
}

size_t knn_prune_to_fixpoint(KnnState& state, CandidateSet& cands, int16_t stage_code,
                             ThreadPool& pool) {
    size_t total = 0;
    for (;;) {
        const std::vector<KnnDelta> deltas = knn_prune_round(state, cands, pool);
        if (deltas.empty()) break;
        total += knn_apply_deltas(state, cands, deltas, stage_code);
    }
    return total;
}

void knn_finalize(KnnState& state, CandidateSet& cands) {
    for (size_t r = 0; r < state.num_confirmed.size(); ++r) {
        std::vector<uint32_t> ops;
        for (uint64_t op = cands.r2op_offsets[r]; op < cands.r2op_offsets[r + 1]; ++op)
            if (cands.status[op] == PairStatus::Undecided) ops.push_back(static_cast<uint32_t>(op));
        if (ops.empty()) continue;
        std::sort(ops.begin(), ops.end(), [&](uint32_t a, uint32_t b) {
            if (cands.intervals[a].lb != cands.intervals[b].lb)
                return cands.intervals[a].lb < cands.intervals[b].lb;
            return cands.pairs[a].second < cands.pairs[b].second;
        });
        uint32_t k_left =
            state.k > state.num_confirmed[r] ? state.k - state.num_confirmed[r] : 0;
        for (uint32_t op : ops) {
            if (k_left > 0) {
                cands.status[op] = PairStatus::Confirmed;
                ++cands.num_confirmed[r];
                ++state.num_confirmed[r];
                --k_left;
            } else {
                cands.status[op] = PairStatus::Removed;
            }
            cands.decided_at[op] = 100;
        }
    }
}

void knn_resolve(KnnState& state, CandidateSet& cands, const VoxelPairList& vplist,
                 const PreparedDataset& R, const PreparedDataset& S, const RefineConfig& config,
                 ThreadPool& pool, RefineStats* stats, const JoinTrace* trace) {
    refine_loop(cands, vplist, R, S, config, std::nullopt, &state, pool, stats, trace);
}

} // namespace trijoin
