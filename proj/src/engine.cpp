#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>

#include <json.hpp>

#include "trijoin/bvh.hpp"
#include "trijoin/engine.hpp"

namespace trijoin {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt_g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string join_type_name(JoinType t) {
    switch (t) {
        case JoinType::Within: return "within";
        case JoinType::Intersect: return "intersect";
        default: return "knn";
    }
}

void validate(const JoinSpec& spec) {
    if (spec.type == JoinType::Knn) {
        if (spec.k == 0) throw std::invalid_argument("join: k must be >= 1");
    } else {
        if (spec.tau < 0) throw std::invalid_argument("join: tau must be >= 0");
        if (spec.type == JoinType::Intersect && spec.tau != 0.0)
            throw std::invalid_argument("join: intersection requires tau == 0");
    }
    if (spec.filter_chunk == 0) throw std::invalid_argument("join: filter chunk must be >= 1");
    if (spec.refine_chunk == 0) throw std::invalid_argument("join: refine chunk must be >= 1");
    if (spec.lods.empty() || spec.lods.back() != 100)
        throw std::invalid_argument("join: lod schedule must end at 100");
    for (size_t i = 0; i < spec.lods.size(); ++i) {
        if (spec.lods[i] == 0 || spec.lods[i] > 100)
            throw std::invalid_argument("join: lod levels must be in (0, 100]");
        if (i > 0 && spec.lods[i] <= spec.lods[i - 1])
            throw std::invalid_argument("join: lod schedule must be ascending");
    }
}

std::string format_record(const JoinResultRecord& rec, bool knn) {
    std::string line = std::to_string(rec.r) + " " + std::to_string(rec.s) + " " +
                       fmt_g17(rec.lb) + " " + fmt_g17(rec.ub) + " " +
                       stage_name(rec.decided_at);
    if (knn) line += " " + std::to_string(rec.rank);
    return line;
}

std::string format_records(std::span<const JoinResultRecord> recs, bool knn) {
    std::string out;
    for (const JoinResultRecord& r : recs) {
        out += format_record(r, knn);
        out += '\n';
    }
    return out;
}

std::string StageStats::to_json() const {
    nlohmann::json j;
    j["query"] = query;
    j["results"] = results;
    j["total_ms"] = total_ms;
    j["stages"] = nlohmann::json::array();
    for (const StageCounters& s : stages)
        j["stages"].push_back({{"stage", s.name},
                               {"wall_ms", s.wall_ms},
                               {"pairs_in", s.pairs_in},
                               {"confirmed", s.confirmed},
                               {"removed", s.removed},
                               {"pairs_out", s.pairs_out},
                               {"vp_generated", s.vp_generated},
                               {"vp_pruned", s.vp_pruned},
                               {"facet_pairs", s.facet_pairs}});
    return j.dump(2);
}

namespace {

void recompute_exact(const PreparedDataset& R, const PreparedDataset& S, CandidateSet& cands,
                     ThreadPool& pool) {
    std::vector<uint8_t> need_r(R.objects.size(), 0), need_s(S.objects.size(), 0);
    std::vector<uint32_t> ops;
    for (uint32_t op = 0; op < cands.size(); ++op) {
        if (cands.status[op] != PairStatus::Confirmed) continue;
        need_r[cands.pairs[op].first] = 1;
        need_s[cands.pairs[op].second] = 1;
        ops.push_back(op);
    }
    std::vector<std::unique_ptr<TriBvh>> br(R.objects.size()), bs(S.objects.size());
    pool.parallel_jobs(br.size(), [&](size_t i) {
        if (need_r[i]) br[i] = std::make_unique<TriBvh>(R.objects[i].ladder.levels.back().mesh);
    });
    pool.parallel_jobs(bs.size(), [&](size_t i) {
        if (need_s[i]) bs[i] = std::make_unique<TriBvh>(S.objects[i].ladder.levels.back().mesh);
    });
    pool.parallel_jobs(ops.size(), [&](size_t i) {
        const auto [r, s] = cands.pairs[ops[i]];
        const double d = TriBvh::pair_distance(*br[r], *bs[s]);
        cands.intervals[ops[i]] = {d, d};
    });
}

} // namespace

JoinOutput run_join(const PreparedDataset& R, const PreparedDataset& S, const JoinSpec& spec,
                    ThreadPool& pool, const JoinTrace* trace) {
    validate(spec);
    const bool knn = spec.type == JoinType::Knn;
    const double tau = spec.type == JoinType::Intersect ? 0.0 : spec.tau;

    JoinOutput out;
    out.stats.query = join_type_name(spec.type);
    const auto t_total = Clock::now();

    auto t0 = Clock::now();
    const RTree tree = build_rtree(S.objects);
    CandidateSet cands = knn ? mbb_filter_knn(R, S, tree, spec.k, pool, trace)
                             : mbb_filter_within(R, S, tree, tau, pool, trace);
    KnnState knn_state;
    if (knn) {
        knn_state = make_knn_state(cands, spec.k);
        knn_prune_to_fixpoint(knn_state, cands, stage::kMbb, pool);
    }
    const double mbb_ms = ms_since(t0);

    t0 = Clock::now();
    FilterStats fstats;
    const VoxelPairList vplist =
        chunked_filter(cands, R, S, spec.filter_chunk,
                       knn ? std::nullopt : std::optional<double>(tau), spec.pipeline, pool,
                       &fstats, trace);
    if (knn) knn_prune_to_fixpoint(knn_state, cands, stage::kVoxel, pool);
    const double voxel_ms = ms_since(t0);

    RefineConfig rconf{spec.lods, spec.refine_chunk, spec.pipeline};
    RefineStats rstats;
    if (knn)
        knn_resolve(knn_state, cands, vplist, R, S, rconf, pool, &rstats, trace);
    else
        refine_loop(cands, vplist, R, S, rconf, tau, nullptr, pool, &rstats, trace);

    if (spec.exact) recompute_exact(R, S, cands, pool);

    if (!knn) {
        for (uint32_t op = 0; op < cands.size(); ++op) {
            if (cands.status[op] != PairStatus::Confirmed) continue;
            const auto [r, s] = cands.pairs[op];
            out.records.push_back(
                {r, s, cands.intervals[op].lb, cands.intervals[op].ub, cands.decided_at[op], 0});
        }
    } else {
        for (uint32_t r = 0; r + 1 < cands.r2op_offsets.size(); ++r) {
            std::vector<uint32_t> conf;
            for (uint64_t op = cands.r2op_offsets[r]; op < cands.r2op_offsets[r + 1]; ++op)
                if (cands.status[op] == PairStatus::Confirmed)
                    conf.push_back(static_cast<uint32_t>(op));
            std::sort(conf.begin(), conf.end(), [&](uint32_t a, uint32_t b) {
                if (cands.intervals[a].ub != cands.intervals[b].ub)
                    return cands.intervals[a].ub < cands.intervals[b].ub;
                if (cands.intervals[a].lb != cands.intervals[b].lb)
                    return cands.intervals[a].lb < cands.intervals[b].lb;
                return cands.pairs[a].second < cands.pairs[b].second;
            });
            uint32_t rank = 0;
            for (uint32_t op : conf)
                out.records.push_back({r, cands.pairs[op].second, cands.intervals[op].lb,
                                       cands.intervals[op].ub, cands.decided_at[op], ++rank});
        }
    }

    std::map<int16_t, std::pair<uint64_t, uint64_t>> tally; // stage -> (confirmed, removed)
    for (uint32_t op = 0; op < cands.size(); ++op) {
        if (cands.status[op] == PairStatus::Confirmed)
            ++tally[cands.decided_at[op]].first;
        else if (cands.status[op] == PairStatus::Removed)
            ++tally[cands.decided_at[op]].second;
    }

    struct StagePlan {
        int16_t code;
        double wall;
        uint64_t vpg, vpp, fp;
    };
    std::vector<StagePlan> plan{{stage::kMbb, mbb_ms, 0, 0, 0},
                                {stage::kVoxel, voxel_ms, fstats.vp_generated, fstats.vp_pruned,
                                 0}};
    for (uint32_t level : spec.lods) {
        StagePlan p{static_cast<int16_t>(level), 0.0, 0, 0, 0};
        for (const RefineLevelStats& ls : rstats.levels)
            if (ls.level == level) {
                p.wall = ls.wall_ms;
                p.vpg = ls.vps;
                p.fp = ls.facet_pairs;
            }
        plan.push_back(p);
    }

    const uint64_t all_pairs =
        static_cast<uint64_t>(R.objects.size()) * static_cast<uint64_t>(S.objects.size());
    uint64_t flowing = all_pairs;
    for (const StagePlan& p : plan) {
        auto [conf, rem] = tally.count(p.code) ? tally[p.code] : std::pair<uint64_t, uint64_t>{};
        if (p.code == stage::kMbb) rem += all_pairs - cands.size();
        StageCounters sc;
        sc.name = stage_name(p.code);
        sc.wall_ms = p.wall;
        sc.pairs_in = flowing;
        sc.confirmed = conf;
        sc.removed = rem;
        sc.pairs_out = flowing - conf - rem;
        sc.vp_generated = p.vpg;
        sc.vp_pruned = p.vpp;
        sc.facet_pairs = p.fp;
        out.stats.stages.push_back(sc);
        flowing = sc.pairs_out;
    }
    out.stats.results = out.records.size();
    out.stats.total_ms = ms_since(t_total);
    return out;
}

} // namespace trijoin
