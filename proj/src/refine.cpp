#include <algorithm>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "trijoin/knn.hpp"
#include "trijoin/refine.hpp"

namespace trijoin {

namespace {

size_t level_index_of(const PreparedDataset& d, uint32_t level) {
    for (size_t i = 0; i < d.lod_schedule.size(); ++i)
        if (d.lod_schedule[i] == level) return i;
    throw EngineError("refine: level " + std::to_string(level) +
                      " is not in the dataset's lod schedule");
}

} // namespace

VoxelPairBatch gather_facet_data(std::span<const ActiveVp> slice, uint32_t level,
                                 const PreparedDataset& R, const PreparedDataset& S,
                                 const CandidateSet& cands) {
    const size_t li_r = level_index_of(R, level);
    const size_t li_s = level_index_of(S, level);

    VoxelPairBatch batch;
    batch.descs.reserve(slice.size());

    using Segment = std::pair<uint64_t, uint32_t>; // offset, length
    std::unordered_map<uint64_t, Segment> seen_r, seen_s;

    auto segment = [&](const PreparedObject& obj, uint32_t obj_idx, size_t li, uint32_t voxel,
                       std::unordered_map<uint64_t, Segment>& seen) {
        const uint64_t key = (static_cast<uint64_t>(obj_idx) << 32) | voxel;
        const auto it = seen.find(key);
        if (it != seen.end()) return it->second;
        const LodMesh& lod = obj.ladder.levels[li];
        const std::vector<uint32_t>& ids = obj.voxels.facets_per_level[li][voxel];
        const Segment seg{batch.tris.size(), static_cast<uint32_t>(ids.size())};
        for (uint32_t f : ids) {
            batch.tris.push_back(lod.mesh.triangle(f));
            batch.hd.push_back(lod.hd[f]);
            batch.ph.push_back(lod.ph[f]);
        }
        seen.emplace(key, seg);
        return seg;
    };

    for (const ActiveVp& avp : slice) {
        const auto [r, s] = cands.pairs[avp.op];
        const Segment sr = segment(R.objects[r], r, li_r, avp.vr, seen_r);
        const Segment ss = segment(S.objects[s], s, li_s, avp.vs, seen_s);
        batch.descs.push_back({sr.first, ss.first, sr.second, ss.second, avp.op});
    }
    return batch;
}

void refine_kernel(const VoxelPairBatch& batch, ThreadPool& pool, std::vector<double>& vp_lb,
                   std::vector<double>& vp_ub) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    vp_lb.assign(batch.descs.size(), kInf);
    vp_ub.assign(batch.descs.size(), kInf);

    pool.parallel_jobs(batch.descs.size(), [&](size_t d) {
        const VpDesc& desc = batch.descs[d];
        const uint64_t total = static_cast<uint64_t>(desc.r_len) * desc.s_len;
        double lb = kInf, ub = kInf;
        for (uint64_t t = 0; t < total; ++t) {
            const auto [i, j] = decode_pair(t, desc.s_len);
            const uint64_t fi = desc.r_off + i;
            const uint64_t fj = desc.s_off + j;
            const double dist = tri_tri_distance(batch.tris[fi], batch.tris[fj]);
            lb = std::min(lb, std::max(0.0, dist - batch.ph[fi] - batch.ph[fj]));
            ub = std::min(ub, dist + batch.hd[fi] + batch.hd[fj]);
        }
        vp_lb[d] = lb;
        vp_ub[d] = ub;
    });
}

size_t aggregate_object_bounds(std::span<const double> vp_lb, std::span<const double> vp_ub,
                               std::span<const uint32_t> vp_op, CandidateSet& cands,
                               int16_t stage_code, const JoinTrace* trace) {
    if (vp_lb.size() != vp_ub.size() || vp_lb.size() != vp_op.size())
        throw std::invalid_argument("aggregate_object_bounds: array size mismatch");

    std::vector<uint32_t> touched;
    std::vector<double> min_lb, min_ub;
    std::unordered_map<uint32_t, size_t> slot;
    for (size_t t = 0; t < vp_op.size(); ++t) {
        const auto [it, fresh] = slot.try_emplace(vp_op[t], touched.size());
        if (fresh) {
            touched.push_back(vp_op[t]);
            min_lb.push_back(vp_lb[t]);
            min_ub.push_back(vp_ub[t]);
        } else {
            min_lb[it->second] = std::min(min_lb[it->second], vp_lb[t]);
            min_ub[it->second] = std::min(min_ub[it->second], vp_ub[t]);
        }
    }

    std::vector<size_t> order(touched.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return touched[a] < touched[b]; });

    size_t updated = 0;
    for (size_t i : order) {
        const uint32_t op = touched[i];
        if (cands.status[op] != PairStatus::Undecided) continue;
        if (std::isinf(min_lb[i])) continue; // every voxel pair was empty at this level
        intersect_interval(cands.intervals[op], min_lb[i], min_ub[i]);
        if (trace && trace->on_interval) trace->on_interval(op, stage_code, cands.intervals[op]);
        ++updated;
    }
    return updated;
}

namespace {

struct LevelOutputs {
    std::vector<double> lb, ub;
    std::vector<uint32_t> op;
};

struct Arena {
    VoxelPairBatch batch;
    std::vector<double> lb, ub;
};

void run_level(std::span<const ActiveVp> active, uint32_t level, const PreparedDataset& R,
               const PreparedDataset& S, const CandidateSet& cands, const RefineConfig& config,
               ThreadPool& pool, LevelOutputs& out, RefineStats* stats) {
    const uint64_t n = active.size();
    const uint64_t n_chunks = (n + config.chunk - 1) / config.chunk;
    out.lb.clear();
    out.ub.clear();
    out.op.clear();
    out.lb.reserve(n);
    out.ub.reserve(n);
    out.op.reserve(n);

    auto slice_of = [&](uint64_t c) {
        const uint64_t lo = c * config.chunk;
        return active.subspan(lo, std::min(n - lo, config.chunk));
    };
    auto finish_chunk = [&](Arena& a) {
        if (stats) {
            stats->kernel_vps += a.batch.descs.size();
            for (const VpDesc& d : a.batch.descs)
                stats->facet_pairs += static_cast<uint64_t>(d.r_len) * d.s_len;
            ++stats->chunks;
        }
        out.lb.insert(out.lb.end(), a.lb.begin(), a.lb.end());
        out.ub.insert(out.ub.end(), a.ub.begin(), a.ub.end());
        for (const VpDesc& d : a.batch.descs) out.op.push_back(d.op);
    };

    if (!config.pipeline) {
        Arena arena;
        for (uint64_t c = 0; c < n_chunks; ++c) {
            const VoxelPairBatch staged = gather_facet_data(slice_of(c), level, R, S, cands);
            arena.batch = staged; // same staged copy as the pipelined path
            refine_kernel(arena.batch, pool, arena.lb, arena.ub);
            finish_chunk(arena);
        }
        return;
    }

    // Three overlapped roles: the prep worker gathers chunk c+2 into a
    // staging slot, the stage worker copies chunk c+1 into a free arena, and
    // this thread computes chunk c. Two slots and two arenas; a buffer is
    // reused only once its consumer finished. Results are folded in chunk
    // order, so the outcome matches the sequential path exactly.
    struct Shared {
        std::mutex mu;
        std::condition_variable cv;
        VoxelPairBatch slot[2];
        int64_t slot_chunk[2] = {-1, -1};  // chunk staged in the slot, -1 = free
        Arena arena[2];
        int64_t arena_chunk[2] = {-1, -1}; // chunk ready in the arena, -1 = free
        bool failed = false;
        std::exception_ptr error;
    } sh;

    auto fail = [&](std::exception_ptr e) {
        std::lock_guard lk(sh.mu);
        if (!sh.failed) {
            sh.failed = true;
            sh.error = e;
        }
        sh.cv.notify_all();
    };

    std::thread prep([&] {
        try {
            for (uint64_t c = 0; c < n_chunks; ++c) {
                VoxelPairBatch b = gather_facet_data(slice_of(c), level, R, S, cands);
                std::unique_lock lk(sh.mu);
                sh.cv.wait(lk, [&] { return sh.failed || sh.slot_chunk[c % 2] < 0; });
                if (sh.failed) return;
                sh.slot[c % 2] = std::move(b);
                sh.slot_chunk[c % 2] = static_cast<int64_t>(c);
                sh.cv.notify_all();
            }
        } catch (...) {
            fail(std::current_exception());
        }
    });

    std::thread stager([&] {
        try {
            for (uint64_t c = 0; c < n_chunks; ++c) {
                std::unique_lock lk(sh.mu);
                sh.cv.wait(lk, [&] {
                    return sh.failed || (sh.slot_chunk[c % 2] == static_cast<int64_t>(c) &&
                                         sh.arena_chunk[c % 2] < 0);
                });
                if (sh.failed) return;
                lk.unlock();
                sh.arena[c % 2].batch = sh.slot[c % 2]; // the staged copy
                lk.lock();
                sh.slot_chunk[c % 2] = -1;
                sh.arena_chunk[c % 2] = static_cast<int64_t>(c);
                sh.cv.notify_all();
            }
        } catch (...) {
            fail(std::current_exception());
        }
    });

    try {
        for (uint64_t c = 0; c < n_chunks; ++c) {
            {
                std::unique_lock lk(sh.mu);
                sh.cv.wait(lk, [&] {
                    return sh.failed || sh.arena_chunk[c % 2] == static_cast<int64_t>(c);
                });
                if (sh.failed) break;
            }
            Arena& a = sh.arena[c % 2];
            refine_kernel(a.batch, pool, a.lb, a.ub);
            finish_chunk(a);
            std::lock_guard lk(sh.mu);
            sh.arena_chunk[c % 2] = -1;
            sh.cv.notify_all();
        }
    } catch (...) {
        fail(std::current_exception());
    }
    prep.join();
    stager.join();
    if (sh.failed) std::rethrow_exception(sh.error);
}

} // namespace

void refine_loop(CandidateSet& cands, const VoxelPairList& vplist, const PreparedDataset& R,
                 const PreparedDataset& S, const RefineConfig& config, std::optional<double> tau,
                 KnnState* knn, ThreadPool& pool, RefineStats* stats, const JoinTrace* trace) {
    if (tau.has_value() == (knn != nullptr))
        throw std::invalid_argument("refine_loop: exactly one of tau and knn must be set");
    if (config.chunk == 0) throw std::invalid_argument("refine_loop: chunk size must be >= 1");
    if (config.lods.empty() || config.lods.back() != 100)
        throw std::invalid_argument("refine_loop: lod schedule must end at 100");
    for (size_t i = 0; i < config.lods.size(); ++i) {
        if (i > 0 && config.lods[i] <= config.lods[i - 1])
            throw std::invalid_argument("refine_loop: lod schedule must be ascending");
        level_index_of(R, config.lods[i]);
        level_index_of(S, config.lods[i]);
    }

    std::vector<ActiveVp> active;
    active.reserve(vplist.vpairs.size());
    for (uint32_t op = 0; op < cands.size(); ++op) {
        if (cands.status[op] != PairStatus::Undecided) continue;
        for (uint64_t t = vplist.op_offsets[op]; t < vplist.op_offsets[op + 1]; ++t)
            active.push_back({op, vplist.vpairs[t].first, vplist.vpairs[t].second});
    }

    LevelOutputs outs;
    for (uint32_t level : config.lods) {
        if (active.empty()) break;
        const auto t0 = std::chrono::steady_clock::now();
        const uint64_t vps0 = stats ? stats->kernel_vps : 0;
        const uint64_t fp0 = stats ? stats->facet_pairs : 0;
        run_level(active, level, R, S, cands, config, pool, outs, stats);
        aggregate_object_bounds(outs.lb, outs.ub, outs.op, cands, static_cast<int16_t>(level),
                                trace);
        if (tau)
            prune_within(cands, *tau, static_cast<int16_t>(level));
        else
            knn_prune_to_fixpoint(*knn, cands, static_cast<int16_t>(level), pool);
        std::erase_if(active, [&](const ActiveVp& a) {
            return cands.status[a.op] != PairStatus::Undecided;
        });
        if (stats) {
            const std::chrono::duration<double, std::milli> dt =
                std::chrono::steady_clock::now() - t0;
            stats->levels.push_back(
                {level, dt.count(), stats->kernel_vps - vps0, stats->facet_pairs - fp0});
        }
    }

    if (knn)
        knn_finalize(*knn, cands);
    else if (cands.undecided_count() != 0)
        throw EngineError("refine_loop: candidates left undecided after the exact level");
}

} // namespace trijoin
