#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <queue>
#include <thread>

#include "trijoin/filter.hpp"

namespace trijoin {

std::string stage_name(int16_t code) {
    switch (code) {
        case stage::kNone: return "undecided";
        case stage::kMbb: return "mbb";
        case stage::kVoxel: return "voxel";
        default: break;
    }
    if (code == 100) return "exact";
    return "lod-" + std::to_string(code);
}

void intersect_interval(Interval& io, double lb, double ub) {
    io.lb = std::max(io.lb, lb);
    io.ub = std::min(io.ub, ub);
    if (io.lb > io.ub) {
        if (io.lb - io.ub > 1e-9)
            throw EngineError("bound crossing: lb " + std::to_string(io.lb) + " > ub " +
                              std::to_string(io.ub));
        const double mid = 0.5 * (io.lb + io.ub);
        io.lb = io.ub = mid;
    }
}

uint64_t CandidateSet::undecided_count() const {
    uint64_t n = 0;
    for (PairStatus s : status)
        if (s == PairStatus::Undecided) ++n;
    return n;
}

namespace {

struct LocalCand {
    uint32_t s;
    double lb, ub;
};

void finalize_candidate_set(CandidateSet& cs, size_t n_queries,
                            std::vector<std::vector<LocalCand>>& per_r,
                            std::vector<std::vector<uint32_t>>& confirmed_per_r) {
    cs.r2op_offsets.assign(n_queries + 1, 0);
    size_t total = 0;
    for (size_t r = 0; r < n_queries; ++r) {
        cs.r2op_offsets[r] = total;
        total += per_r[r].size();
    }
    cs.r2op_offsets[n_queries] = total;

    cs.pairs.reserve(total);
    cs.intervals.reserve(total);
    cs.status.assign(total, PairStatus::Undecided);
    cs.decided_at.assign(total, stage::kNone);
    cs.num_confirmed.assign(n_queries, 0);
    for (size_t r = 0; r < n_queries; ++r) {
        std::sort(per_r[r].begin(), per_r[r].end(),
                  [](const LocalCand& a, const LocalCand& b) { return a.s < b.s; });
        for (const LocalCand& c : per_r[r]) {
            cs.pairs.emplace_back(static_cast<uint32_t>(r), c.s);
            cs.intervals.push_back({c.lb, c.ub});
        }
        for (uint32_t s : confirmed_per_r[r]) {
            const uint64_t base = cs.r2op_offsets[r];
            const auto begin = cs.pairs.begin() + static_cast<ptrdiff_t>(base);
            const auto end = cs.pairs.begin() + static_cast<ptrdiff_t>(cs.r2op_offsets[r + 1]);
            const auto it = std::lower_bound(begin, end, s, [](const auto& p, uint32_t sv) {
                return p.second < sv;
            });
            const uint64_t op = static_cast<uint64_t>(it - cs.pairs.begin());
            cs.status[op] = PairStatus::Confirmed;
            cs.decided_at[op] = stage::kMbb;
            ++cs.num_confirmed[r];
        }
    }
}

} // namespace

CandidateSet mbb_filter_within(const PreparedDataset& R, const PreparedDataset& S,
                               const RTree& tree, double tau, ThreadPool& pool,
                               const JoinTrace* trace) {
    if (tau < 0) throw std::invalid_argument("mbb_filter_within: tau must be >= 0");
    const size_t nr = R.objects.size();
    std::vector<std::vector<LocalCand>> per_r(nr);
    std::vector<std::vector<uint32_t>> confirmed_per_r(nr);

    pool.parallel_jobs(nr, [&](size_t r) {
        if (tree.empty()) return;
        const Aabb& rb = R.objects[r].mbb;
        const Point3& ra = R.objects[r].anchor;
        std::vector<uint32_t> stack{tree.root};
        while (!stack.empty()) {
            const RTree::Node& node = tree.nodes[stack.back()];
            stack.pop_back();
            if (mindist_aabb(rb, node.box) > tau) continue;
            if (node.leaf) {
                for (uint32_t i = 0; i < node.count; ++i) {
                    const uint32_t s = tree.entries[node.first + i];
                    const double lb = mindist_aabb(rb, S.objects[s].mbb);
                    if (lb > tau) continue;
                    const double ub = distance(ra, S.objects[s].anchor);
                    per_r[r].push_back({s, lb, ub});
                    if (ub <= tau) confirmed_per_r[r].push_back(s);
                }
            } else {
                for (uint32_t i = 0; i < node.count; ++i) stack.push_back(node.first + i);
            }
        }
    });

    CandidateSet cs;
    finalize_candidate_set(cs, nr, per_r, confirmed_per_r);
    if (trace && trace->on_interval)
        for (uint32_t op = 0; op < cs.size(); ++op)
            trace->on_interval(op, stage::kMbb, cs.intervals[op]);
    return cs;
}

CandidateSet mbb_filter_knn(const PreparedDataset& R, const PreparedDataset& S, const RTree& tree,
                            uint32_t k, ThreadPool& pool, const JoinTrace* trace) {
    if (k == 0) throw std::invalid_argument("mbb_filter_knn: k must be >= 1");
    const size_t nr = R.objects.size();
    std::vector<std::vector<LocalCand>> per_r(nr);
    std::vector<std::vector<uint32_t>> confirmed_per_r(nr); // stays empty

    pool.parallel_jobs(nr, [&](size_t r) {
        if (tree.empty()) return;
        const Aabb& rb = R.objects[r].mbb;
        const Point3& ra = R.objects[r].anchor;

        struct QItem {
            double key;
            uint32_t node;
            bool operator>(const QItem& o) const {
                if (key != o.key) return key > o.key;
                return node > o.node;
            }
        };
        std::priority_queue<QItem, std::vector<QItem>, std::greater<>> pq;
        pq.push({mindist_aabb(rb, tree.nodes[tree.root].box), tree.root});

        std::priority_queue<double> kth_ubs; // max-heap of the k smallest ubs
        auto theta = [&] {
            return kth_ubs.size() < k ? std::numeric_limits<double>::infinity() : kth_ubs.top();
        };

        while (!pq.empty()) {
            const QItem it = pq.top();
            pq.pop();
            if (it.key > theta()) break;
            const RTree::Node& node = tree.nodes[it.node];
            if (node.leaf) {
                for (uint32_t i = 0; i < node.count; ++i) {
                    const uint32_t s = tree.entries[node.first + i];
                    const double lb = mindist_aabb(rb, S.objects[s].mbb);
                    if (lb > theta()) continue;
                    const double ub = distance(ra, S.objects[s].anchor);
                    per_r[r].push_back({s, lb, ub});
                    kth_ubs.push(ub);
                    if (kth_ubs.size() > k) kth_ubs.pop();
                }
            } else {
                for (uint32_t i = 0; i < node.count; ++i) {
                    const uint32_t c = node.first + i;
                    const double key = mindist_aabb(rb, tree.nodes[c].box);
                    if (key <= theta()) pq.push({key, c});
                }
            }
        }

        const double th = theta();
        std::erase_if(per_r[r], [&](const LocalCand& c) { return c.lb > th; });
    });

    CandidateSet cs;
    finalize_candidate_set(cs, nr, per_r, confirmed_per_r);
    if (trace && trace->on_interval)
        for (uint32_t op = 0; op < cs.size(); ++op)
            trace->on_interval(op, stage::kMbb, cs.intervals[op]);
    return cs;
}

uint64_t voxel_pair_count(const CandidateSet& cands, uint32_t op, const PreparedDataset& R,
                          const PreparedDataset& S) {
    const auto [r, s] = cands.pairs[op];
    return static_cast<uint64_t>(R.objects[r].voxels.voxel_count()) *
           S.objects[s].voxels.voxel_count();
}

ChunkBounds voxel_pair_bounds(const FilterChunk& chunk, CandidateSet& cands,
                              const PreparedDataset& R, const PreparedDataset& S, ThreadPool& pool,
                              const JoinTrace* trace) {
    ChunkBounds out;
    const uint64_t total = chunk.total_vp();
    out.vp_lb.resize(total);
    out.vp_ub.resize(total);
    out.op_lb.resize(chunk.ops.size());
    out.op_ub.resize(chunk.ops.size());

    pool.parallel_jobs(chunk.ops.size(), [&](size_t ci) {
        const uint32_t op = chunk.ops[ci];
        const auto [r, s] = cands.pairs[op];
        const VoxelSet& vr = R.objects[r].voxels;
        const VoxelSet& vs = S.objects[s].voxels;
        const uint64_t n_s = vs.voxel_count();
        const uint64_t base = chunk.vp_offsets[ci];
        const uint64_t count = chunk.vp_offsets[ci + 1] - base;
        double min_lb = std::numeric_limits<double>::infinity();
        double min_ub = std::numeric_limits<double>::infinity();
        for (uint64_t t = 0; t < count; ++t) {
            const auto [i, j] = decode_pair(t, n_s);
            const double lb = mindist_aabb(vr.boxes[i], vs.boxes[j]);
            const double ub = distance(vr.anchors[i], vs.anchors[j]);
            out.vp_lb[base + t] = lb;
            out.vp_ub[base + t] = ub;
            min_lb = std::min(min_lb, lb);
            min_ub = std::min(min_ub, ub);
        }
        out.op_lb[ci] = min_lb;
        out.op_ub[ci] = min_ub;
    });

    for (size_t ci = 0; ci < chunk.ops.size(); ++ci) {
        const uint32_t op = chunk.ops[ci];
        if (cands.status[op] != PairStatus::Undecided) continue;
        intersect_interval(cands.intervals[op], out.op_lb[ci], out.op_ub[ci]);
        if (trace && trace->on_interval) trace->on_interval(op, stage::kVoxel, cands.intervals[op]);
    }
    return out;
}

size_t prune_within(CandidateSet& cands, double tau, int16_t stage_code,
                    std::span<const uint32_t> ops) {
    size_t changed = 0;
    auto visit = [&](uint32_t op) {
        if (cands.status[op] != PairStatus::Undecided) return;
        const Interval& iv = cands.intervals[op];
        if (iv.ub <= tau) {
            cands.status[op] = PairStatus::Confirmed;
            cands.decided_at[op] = stage_code;
            ++cands.num_confirmed[cands.pairs[op].first];
            ++changed;
        } else if (iv.lb > tau) {
            cands.status[op] = PairStatus::Removed;
            cands.decided_at[op] = stage_code;
            ++changed;
        }
    };
    if (ops.empty())
        for (uint32_t op = 0; op < cands.size(); ++op) visit(op);
    else
        for (uint32_t op : ops) visit(op);
    return changed;
}

std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> voxel_pair_compact(
    const FilterChunk& chunk, const ChunkBounds& bounds, const CandidateSet& cands,
    const PreparedDataset& R, const PreparedDataset& S, ThreadPool& pool,
    const JoinTrace* trace) {
    const uint64_t total = chunk.total_vp();
    std::vector<uint64_t> ids(total);
    for (uint64_t t = 0; t < total; ++t) ids[t] = t;

    auto slot_of = [&](uint64_t t) {
        return static_cast<uint32_t>(
            std::upper_bound(chunk.vp_offsets.begin(), chunk.vp_offsets.end(), t) -
            chunk.vp_offsets.begin() - 1);
    };
    // Decided ops are skipped entirely; for the rest the voxel pair survives
    // iff its box lower bound cannot rule it out against the object's ub.
    auto survives = [&](uint64_t t) {
        const uint32_t op = chunk.ops[slot_of(t)];
        if (cands.status[op] != PairStatus::Undecided) return false;
        return bounds.vp_lb[t] <= cands.intervals[op].ub;
    };

    const std::vector<uint64_t> survivors =
        compact_par(pool, std::span<const uint64_t>(ids), survives);

    auto decode = [&](uint64_t t) {
        const uint32_t ci = slot_of(t);
        const uint32_t op = chunk.ops[ci];
        const uint64_t n_s = S.objects[cands.pairs[op].second].voxels.voxel_count();
        const auto [i, j] = decode_pair(t - chunk.vp_offsets[ci], n_s);
        return std::tuple(op, static_cast<uint32_t>(i), static_cast<uint32_t>(j));
    };

    if (trace && trace->on_vp_pruned) {
        size_t si = 0;
        for (uint64_t t = 0; t < total; ++t) {
            if (si < survivors.size() && survivors[si] == t) {
                ++si;
                continue;
            }
            const uint32_t op = chunk.ops[slot_of(t)];
            if (cands.status[op] != PairStatus::Undecided) continue; // skipped, not pruned
            const auto [op2, vr, vs] = decode(t);
            trace->on_vp_pruned(op2, vr, vs, bounds.vp_lb[t], cands.intervals[op].ub);
        }
    }

    std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> out;
    out.reserve(survivors.size());
    for (uint64_t t : survivors) out.push_back(decode(t));
    return out;
}

namespace {

std::vector<FilterChunk> pack_chunks(const CandidateSet& cands, const PreparedDataset& R,
                                     const PreparedDataset& S, uint64_t budget) {
    std::vector<FilterChunk> chunks;
    FilterChunk cur;
    cur.vp_offsets.push_back(0);
    auto flush = [&] {
        if (!cur.ops.empty()) chunks.push_back(std::move(cur));
        cur = FilterChunk{};
        cur.vp_offsets.push_back(0);
    };
    for (uint32_t op = 0; op < cands.size(); ++op) {
        if (cands.status[op] != PairStatus::Undecided) continue;
        const uint64_t n = voxel_pair_count(cands, op, R, S);
        if (n > budget) { // dedicated oversized chunk
            flush();
            cur.ops.push_back(op);
            cur.vp_offsets.push_back(n);
            cur.oversized = true;
            flush();
            continue;
        }
        if (!cur.ops.empty() && cur.total_vp() + n > budget) flush();
        cur.ops.push_back(op);
        cur.vp_offsets.push_back(cur.total_vp() + n);
    }
    flush();
    return chunks;
}

} // namespace

VoxelPairList chunked_filter(CandidateSet& cands, const PreparedDataset& R,
                             const PreparedDataset& S, uint64_t budget,
                             std::optional<double> tau, bool pipeline, ThreadPool& pool,
                             FilterStats* stats, const JoinTrace* trace) {
    if (budget == 0) throw std::invalid_argument("chunked_filter: budget must be >= 1");
    const std::vector<FilterChunk> chunks = pack_chunks(cands, R, S, budget);

    std::vector<uint64_t> op_counts(cands.size(), 0);
    std::vector<std::vector<std::tuple<uint32_t, uint32_t, uint32_t>>> drained(chunks.size());

    // Two survivor buffers; a buffer is reused only after its drain finished.
    struct Slot {
        std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> survivors;
        size_t chunk_index = 0;
        bool full = false; // awaiting or under drain
    };
    Slot slots[2];
    std::mutex mu;
    std::condition_variable cv_free, cv_full;
    bool done = false;

    std::thread drainer;
    auto drain_one = [&](Slot& slot) {
        drained[slot.chunk_index] = std::move(slot.survivors);
        slot.survivors = {};
    };
    if (pipeline) {
        drainer = std::thread([&] {
            size_t next = 0;
            for (;;) {
                std::unique_lock lk(mu);
                cv_full.wait(lk, [&] {
                    return done || slots[next % 2].full;
                });
                if (!slots[next % 2].full) return; // done and drained everything
                Slot& slot = slots[next % 2];
                lk.unlock();
                drain_one(slot); // the copy-out overlaps the next chunk's compute
                lk.lock();
                slot.full = false;
                ++next;
                cv_free.notify_all();
            }
        });
    }

    for (size_t c = 0; c < chunks.size(); ++c) {
        const FilterChunk& chunk = chunks[c];
        const ChunkBounds bounds = voxel_pair_bounds(chunk, cands, R, S, pool, trace);
        if (tau) prune_within(cands, *tau, stage::kVoxel, chunk.ops);
        auto survivors = voxel_pair_compact(chunk, bounds, cands, R, S, pool, trace);
        if (stats) {
            stats->vp_generated += chunk.total_vp();
            // Pairs decided by this chunk's prune contribute no survivors;
            // count only genuine box-test prunes of undecided pairs.
            uint64_t undecided_vp = 0;
            for (size_t i = 0; i < chunk.ops.size(); ++i)
                if (cands.status[chunk.ops[i]] == PairStatus::Undecided)
                    undecided_vp += chunk.vp_offsets[i + 1] - chunk.vp_offsets[i];
            stats->vp_pruned += undecided_vp - survivors.size();
            ++stats->chunks;
            if (chunk.oversized) ++stats->oversized_chunks;
        }
        if (pipeline) {
            std::unique_lock lk(mu);
            Slot& slot = slots[c % 2];
            cv_free.wait(lk, [&] { return !slot.full; });
            slot.survivors = std::move(survivors);
            slot.chunk_index = c;
            slot.full = true;
            cv_full.notify_all();
        } else {
            Slot slot;
            slot.survivors = std::move(survivors);
            slot.chunk_index = c;
            drain_one(slot);
        }
    }
    if (pipeline) {
        {
            std::lock_guard lk(mu);
            done = true;
        }
        cv_full.notify_all();
        drainer.join();
    }

    VoxelPairList out;
    for (const auto& chunk_survivors : drained)
        for (const auto& [op, vr, vs] : chunk_survivors) ++op_counts[op];
    out.op_offsets.assign(cands.size() + 1, 0);
    for (uint32_t op = 0; op < cands.size(); ++op)
        out.op_offsets[op + 1] = out.op_offsets[op] + op_counts[op];
    out.vpairs.resize(out.op_offsets.back());
    std::vector<uint64_t> cursor(out.op_offsets.begin(), out.op_offsets.end() - 1);
    for (const auto& chunk_survivors : drained)
        for (const auto& [op, vr, vs] : chunk_survivors) out.vpairs[cursor[op]++] = {vr, vs};
    return out;
}

} // namespace trijoin
