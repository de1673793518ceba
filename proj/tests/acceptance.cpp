// End-to-end acceptance harness. Each numbered criterion prints one
// [PASS]/[FAIL] line; the exit code is the number of failed criteria.
// Run with argument "scaling" to execute only the CLI scaling check
// (needs TRIJOIN_BIN pointing at the command line tool).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "trijoin/bvh.hpp"
#include "trijoin/engine.hpp"

using namespace trijoin;
using namespace trijoin::testing;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
int g_reported = 0;

void report(int num, const std::string& what, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", num, what.c_str(),
                detail.empty() ? "" : " - ", detail.c_str());
    std::fflush(stdout);
    ++g_reported;
    if (!ok) ++g_failures;
}

void note(const std::string& line) {
    std::fprintf(stderr, "  %s\n", line.c_str());
    std::fflush(stderr);
}

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
    char buf[512];
    va_list args;
    va_start(args, pattern);
    std::vsnprintf(buf, sizeof(buf), pattern, args);
    va_end(args);
    return buf;
}

using Pair = std::pair<uint32_t, uint32_t>;
using PairSet = std::set<Pair>;

PairSet pair_set(const std::vector<JoinResultRecord>& recs) {
    PairSet out;
    for (const auto& r : recs) out.insert({r.r, r.s});
    return out;
}

// ---------------------------------------------------------------- datasets

PreparedDataset prep(const std::vector<Mesh>& meshes, ThreadPool& pool, double voxel_ratio = 0.02,
                     uint64_t seed = 1) {
    PreprocessParams pp;
    pp.voxel_ratio = voxel_ratio;
    pp.seed = seed;
    return preprocess_dataset(meshes, pp, pool);
}

std::vector<Mesh> grid_meshes(uint32_t count, uint32_t facets, double spacing, double jitter,
                              uint64_t seed, const std::string& shape = "mixed") {
    std::vector<Mesh> out;
    SplitMix64 rng(seed);
    uint32_t dims = 1;
    while (dims * dims * dims < count) ++dims;
    for (uint32_t i = 0; i < count; ++i) {
        const Point3 shift{spacing * (i % dims) + rng.next_in(-jitter, jitter),
                           spacing * (i / dims % dims) + rng.next_in(-jitter, jitter),
                           spacing * (i / (dims * dims)) + rng.next_in(-jitter, jitter)};
        out.push_back(translated(make_builtin(shape, facets, i), shift));
    }
    return out;
}

// A dozen large tubes plus a cloud of small spheres scattered through the
// tubes' overall extent: two populations with very different facet sizes,
// overlap allowed.
std::vector<Mesh> parts_meshes(uint32_t spheres, uint64_t seed) {
    std::vector<Mesh> out;
    Aabb box = Aabb::empty();
    for (uint32_t i = 0; i < 12; ++i) {
        Mesh t = translated(scaled(make_tube(200), 3.0),
                            {8.0 * (i % 3), 4.0 * (i / 3 % 2), 4.0 * (i / 6)});
        box.expand(t.bounds());
        out.push_back(std::move(t));
    }
    SplitMix64 rng(seed);
    for (uint32_t i = 0; i < spheres; ++i) {
        Mesh s = scaled(make_sphere(80), 0.35);
        const Point3 target{rng.next_in(box.min.x, box.max.x), rng.next_in(box.min.y, box.max.y),
                            rng.next_in(box.min.z, box.max.z)};
        const Point3 shift = target - s.bounds().center();
        out.push_back(translated(std::move(s), shift));
    }
    return out;
}

JoinSpec within_spec(double tau) {
    JoinSpec s;
    s.type = JoinType::Within;
    s.tau = tau;
    return s;
}

// Cache of full-resolution BVHs keyed by dataset identity and object id.
struct BvhCache {
    std::map<std::pair<const void*, uint32_t>, std::unique_ptr<TriBvh>> map;

    const TriBvh& of(const PreparedDataset& ds, uint32_t id) {
        auto& slot = map[{&ds, id}];
        if (!slot) slot = std::make_unique<TriBvh>(level100(ds.objects[id]));
        return *slot;
    }
};

double exact_distance(BvhCache& cache, const PreparedDataset& R, const PreparedDataset& S,
                      uint32_t r, uint32_t s) {
    return TriBvh::pair_distance(cache.of(R, r), cache.of(S, s));
}

// ------------------------------------------------------- criteria 1 and 2

struct JoinSetting {
    std::string name;
    const PreparedDataset* R;
    const PreparedDataset* S;
    std::vector<double> taus;
};

void criterion_within_joins(const std::vector<JoinSetting>& settings, ThreadPool& pool) {
    bool ok = true;
    std::string detail;
    int run_count = 0;
    uint64_t results = 0;
    double max_wall = 0.0;

    for (const JoinSetting& st : settings) {
        for (double tau : st.taus) {
            const auto t0 = Clock::now();
            const JoinOutput eng = run_join(*st.R, *st.S, within_spec(tau), pool);
            const JoinOutput ref = run_oracle(*st.R, *st.S, within_spec(tau), pool);
            const double wall = ms_since(t0);
            max_wall = std::max(max_wall, wall);
            ++run_count;
            results += ref.records.size();

            if (pair_set(eng.records) != pair_set(ref.records)) {
                ok = false;
                detail = fmt("%s tau=%g: result sets differ (%zu vs %zu)", st.name.c_str(), tau,
                             eng.records.size(), ref.records.size());
                break;
            }
            std::map<Pair, double> exact;
            for (const auto& r : ref.records) exact[{r.r, r.s}] = r.lb;
            for (const auto& rec : eng.records) {
                const double d = exact.at({rec.r, rec.s});
                if (rec.lb > d + 1e-9 || rec.ub < d - 1e-9) {
                    ok = false;
                    detail = fmt("%s tau=%g pair (%u,%u): interval [%.17g, %.17g] misses %.17g",
                                 st.name.c_str(), tau, rec.r, rec.s, rec.lb, rec.ub, d);
                    break;
                }
            }
            if (tau == 0.0 && ok) {
                JoinSpec isect;
                isect.type = JoinType::Intersect;
                const JoinOutput ieng = run_join(*st.R, *st.S, isect, pool);
                if (pair_set(ieng.records) != pair_set(ref.records)) {
                    ok = false;
                    detail = fmt("%s: intersection join differs from the tau=0 reference",
                                 st.name.c_str());
                }
            }
            if (wall > 300000.0) {
                ok = false;
                detail = fmt("%s tau=%g took %.0f ms", st.name.c_str(), tau, wall);
            }
            note(fmt("within %s tau=%g: %zu results, %.0f ms", st.name.c_str(), tau,
                     ref.records.size(), wall));
            if (!ok) break;
        }
        if (!ok) break;
    }
    if (ok)
        detail = fmt("%d settings, %llu reference results matched exactly, "
                     "intervals contain exact distances (tol 1e-9), slowest setting %.1f s",
                     run_count, static_cast<unsigned long long>(results), max_wall / 1000.0);
    report(1, "within and intersection joins match the exact reference", ok, detail);
}

void criterion_knn_joins(const std::vector<std::pair<JoinSetting, std::vector<uint32_t>>>& settings,
                         ThreadPool& pool) {
    bool ok = true;
    std::string detail;
    int run_count = 0;

    for (const auto& [st, ks] : settings) {
        for (uint32_t k : ks) {
            JoinSpec spec;
            spec.type = JoinType::Knn;
            spec.k = k;
            const auto t0 = Clock::now();
            const JoinOutput eng = run_join(*st.R, *st.S, spec, pool);
            const JoinOutput ref = run_oracle(*st.R, *st.S, spec, pool);
            ++run_count;

            std::map<uint32_t, std::set<uint32_t>> mine, want;
            for (const auto& r : eng.records) mine[r.r].insert(r.s);
            for (const auto& r : ref.records) want[r.r].insert(r.s);
            if (mine != want || eng.records.size() != ref.records.size()) {
                ok = false;
                uint32_t bad = 0;
                for (const auto& [r, set] : want)
                    if (mine[r] != set) {
                        bad = r;
                        break;
                    }
                detail = fmt("%s k=%u: neighbor set differs at query %u", st.name.c_str(), k, bad);
                break;
            }
            note(fmt("knn %s k=%u: %zu records, %.0f ms", st.name.c_str(), k, eng.records.size(),
                     ms_since(t0)));
        }
        if (!ok) break;
    }
    if (ok) detail = fmt("%d settings, per-query neighbor sets equal the reference exactly", run_count);
    report(2, "k-nearest joins return the exact top-k per query", ok, detail);
}

// ------------------------------------------------------------ criterion 3

struct StageEvent {
    uint32_t op;
    int16_t stage;
    double lb, ub;
};

void criterion_stage_bounds(const std::vector<JoinSetting>& runs, BvhCache& cache,
                            ThreadPool& pool) {
    uint64_t checks = 0, widenings = 0, misses = 0;
    std::string detail;
    std::map<std::tuple<const void*, const void*, uint32_t, uint32_t>, double> dcache;

    for (const JoinSetting& st : runs) {
        const double tau = st.taus[0];
        std::vector<StageEvent> events;
        JoinTrace trace;
        trace.on_interval = [&](uint32_t op, int16_t stage, const Interval& iv) {
            events.push_back({op, stage, iv.lb, iv.ub});
        };

        const RTree tree = build_rtree(st.S->objects);
        CandidateSet cands = mbb_filter_within(*st.R, *st.S, tree, tau, pool, &trace);
        const VoxelPairList vplist =
            chunked_filter(cands, *st.R, *st.S, 4194304, tau, true, pool, nullptr, &trace);
        RefineConfig config;
        refine_loop(cands, vplist, *st.R, *st.S, config, tau, nullptr, pool, nullptr, &trace);

        std::map<uint32_t, Interval> last;
        for (const StageEvent& ev : events) {
            const auto [r, s] = cands.pairs[ev.op];
            auto [it, fresh] = dcache.try_emplace({st.R, st.S, r, s}, 0.0);
            if (fresh) it->second = exact_distance(cache, *st.R, *st.S, r, s);
            const double d = it->second;
            ++checks;
            if (ev.lb > d + 1e-9 || ev.ub < d - 1e-9) {
                ++misses;
                if (detail.empty())
                    detail = fmt("%s op %u stage %d: [%.17g, %.17g] misses %.17g", st.name.c_str(),
                                 ev.op, ev.stage, ev.lb, ev.ub, d);
            }
            auto [lit, first] = last.try_emplace(ev.op, Interval{ev.lb, ev.ub});
            if (!first) {
                if (ev.lb < lit->second.lb - 1e-12 || ev.ub > lit->second.ub + 1e-12) {
                    ++widenings;
                    if (detail.empty())
                        detail = fmt("%s op %u stage %d widened its interval", st.name.c_str(),
                                     ev.op, ev.stage);
                }
                lit->second = {ev.lb, ev.ub};
            }
        }
        note(fmt("stage bounds %s tau=%g: %zu candidates, %zu interval events", st.name.c_str(),
                 tau, cands.size(), events.size()));
    }

    const bool ok = checks >= 100000 && misses == 0 && widenings == 0;
    if (ok)
        detail = fmt("%llu pair-stage checks, every interval contains the exact distance, "
                     "no interval ever widened",
                     static_cast<unsigned long long>(checks));
    else if (detail.empty())
        detail = fmt("only %llu pair-stage checks accumulated",
                     static_cast<unsigned long long>(checks));
    report(3, "stage intervals always bracket the exact distance and only narrow", ok, detail);
}

// ------------------------------------------------------------ criterion 4

void criterion_no_losses(const PreparedDataset& cross_r, const PreparedDataset& cross_s,
                         const std::vector<std::pair<const PreparedDataset*, double>>& audits,
                         ThreadPool& pool) {
    bool ok = true;
    std::string detail;

    // Every reference result must end Confirmed, never Removed.
    const double tau = 0.8;
    const RTree tree = build_rtree(cross_s.objects);
    CandidateSet cands = mbb_filter_within(cross_r, cross_s, tree, tau, pool);
    const VoxelPairList vplist = chunked_filter(cands, cross_r, cross_s, 4194304, tau, true, pool);
    RefineConfig config;
    refine_loop(cands, vplist, cross_r, cross_s, config, tau, nullptr, pool);

    std::map<Pair, uint32_t> op_of;
    for (uint32_t op = 0; op < cands.size(); ++op) op_of[cands.pairs[op]] = op;
    const JoinOutput ref = run_oracle(cross_r, cross_s, within_spec(tau), pool);
    uint64_t confirmed_refs = 0;
    for (const auto& rec : ref.records) {
        const auto it = op_of.find({rec.r, rec.s});
        if (it == op_of.end() || cands.status[it->second] != PairStatus::Confirmed) {
            ok = false;
            detail = fmt("reference pair (%u,%u) was dropped before confirmation", rec.r, rec.s);
            break;
        }
        ++confirmed_refs;
    }

    // Exhaustive audit of every pruned voxel pair on small datasets. The
    // facets behind a pruned voxel pair must really sit beyond the pair's
    // upper bound at prune time.
    uint64_t audited = 0, unsound = 0;
    for (const auto& [ds, atau] : audits) {
        if (!ok) break;
        struct Pruned {
            uint32_t op, vr, vs;
            double lb_v, ub_o;
        };
        std::vector<Pruned> pruned;
        JoinTrace trace;
        trace.on_vp_pruned = [&](uint32_t op, uint32_t vr, uint32_t vs, double lb_v, double ub_o) {
            pruned.push_back({op, vr, vs, lb_v, ub_o});
        };
        const RTree t2 = build_rtree(ds->objects);
        CandidateSet c2 = mbb_filter_within(*ds, *ds, t2, atau, pool, &trace);
        chunked_filter(c2, *ds, *ds, 256, atau, false, pool, nullptr, &trace);
        for (const Pruned& p : pruned) {
            const auto [r, s] = c2.pairs[p.op];
            const PreparedObject& a = ds->objects[r];
            const PreparedObject& b = ds->objects[s];
            const size_t last_a = a.ladder.levels.size() - 1;
            const size_t last_b = b.ladder.levels.size() - 1;
            const double d = brute_facet_set_distance(level100(a),
                                                      a.voxels.facets_per_level[last_a][p.vr],
                                                      level100(b),
                                                      b.voxels.facets_per_level[last_b][p.vs]);
            ++audited;
            if (p.lb_v <= p.ub_o || d <= p.ub_o) {
                ++unsound;
                if (detail.empty())
                    detail = fmt("pruned voxel pair op=%u (%u,%u): exact %.17g <= bound %.17g",
                                 p.op, p.vr, p.vs, d, p.ub_o);
            }
        }
    }
    if (audited == 0 || unsound > 0) ok = false;

    if (ok)
        detail = fmt("%llu reference results all confirmed, %llu pruned voxel pairs audited "
                     "exhaustively, none reachable",
                     static_cast<unsigned long long>(confirmed_refs),
                     static_cast<unsigned long long>(audited));
    report(4, "no reference result is ever lost to pruning", ok, detail);
}

// ------------------------------------------------------------ criterion 5

void criterion_chunk_invariance(const PreparedDataset& R, const PreparedDataset& S,
                                ThreadPool& pool) {
    const uint64_t kInf = std::numeric_limits<uint64_t>::max();
    std::set<std::string> within_outputs, knn_outputs;
    int runs = 0;

    for (uint64_t budget : {uint64_t{1}, uint64_t{7}, uint64_t{64}, kInf})
        for (uint64_t chunk : {uint64_t{1}, uint64_t{100}, uint64_t{500000}})
            for (bool pipeline : {false, true}) {
                JoinSpec spec = within_spec(0.8);
                spec.filter_chunk = budget;
                spec.refine_chunk = chunk;
                spec.pipeline = pipeline;
                within_outputs.insert(format_records(run_join(R, S, spec, pool).records, false));
                ++runs;
            }

    for (uint64_t budget : {uint64_t{7}, kInf})
        for (uint64_t chunk : {uint64_t{1}, uint64_t{100}, uint64_t{500000}})
            for (bool pipeline : {false, true}) {
                JoinSpec spec;
                spec.type = JoinType::Knn;
                spec.k = 5;
                spec.filter_chunk = budget;
                spec.refine_chunk = chunk;
                spec.pipeline = pipeline;
                knn_outputs.insert(format_records(run_join(R, S, spec, pool).records, true));
                ++runs;
            }

    const bool ok = within_outputs.size() == 1 && knn_outputs.size() == 1 &&
                    !within_outputs.begin()->empty() && !knn_outputs.begin()->empty();
    report(5, "chunk budgets and pipeline mode never change a result byte", ok,
           ok ? fmt("%d runs across budget, chunk and pipeline settings produced "
                    "one distinct output each for within and knn",
                    runs)
              : fmt("%zu distinct within outputs, %zu distinct knn outputs",
                    within_outputs.size(), knn_outputs.size()));
}

// ------------------------------------------------------------ criterion 6

double dense_sample_distance(const Triangle& a, const Triangle& b, int grid) {
    std::vector<Point3> pa, pb;
    const auto sample = [grid](const Triangle& t, std::vector<Point3>& out) {
        for (int i = 0; i <= grid; ++i)
            for (int j = 0; j <= grid - i; ++j) {
                const double u = static_cast<double>(i) / grid;
                const double v = static_cast<double>(j) / grid;
                out.push_back(t.v0 * (1.0 - u - v) + t.v1 * u + t.v2 * v);
            }
    };
    sample(a, pa);
    sample(b, pb);
    double best = std::numeric_limits<double>::infinity();
    for (const Point3& p : pa)
        for (const Point3& q : pb) best = std::min(best, distance(p, q));
    return best;
}

void criterion_primitives() {
    bool ok = true;
    std::string detail;
    const size_t kN = 1 << 20;

    SplitMix64 rng(0xACCE55);
    std::vector<long long> ints(kN);
    for (auto& v : ints) v = static_cast<long long>(rng.next_below(2001)) - 1000;
    std::vector<double> reals(kN);
    for (auto& v : reals) v = rng.next_in(-1e6, 1e6);

    std::vector<long long> inc_ref(kN);
    std::partial_sum(ints.begin(), ints.end(), inc_ref.begin());
    std::vector<long long> exc_ref(kN);
    exc_ref[0] = 0;
    for (size_t i = 1; i < kN; ++i) exc_ref[i] = inc_ref[i - 1];
    const double min_ref = *std::min_element(reals.begin(), reals.end());
    std::vector<double> compact_ref;
    std::copy_if(reals.begin(), reals.end(), std::back_inserter(compact_ref),
                 [](double v) { return v > 0; });

    for (unsigned workers : {1u, 2u, 8u, 0u}) {
        ThreadPool pool(workers);
        const auto inc = inclusive_scan_par<long long>(pool, ints, std::plus<>{});
        const auto exc = exclusive_scan_par<long long>(pool, ints, std::plus<>{}, 0LL);
        const double mn = block_reduce_min(pool, reals);
        const auto cp = compact_par<double>(pool, reals, [](double v) { return v > 0; });
        if (inc != inc_ref || exc != exc_ref || mn != min_ref || cp != compact_ref) {
            ok = false;
            detail = fmt("primitive mismatch at %u workers", workers);
            break;
        }
    }

    // Triangle distance against a dense point-sampling reference plus
    // analytically known configurations.
    uint64_t tri_checks = 0;
    if (ok) {
        SplitMix64 trng(20240817);
        for (int trial = 0; trial < 10000 && ok; ++trial) {
            const Triangle a = random_triangle(trng, -2, 2, 1.5);
            const Triangle b = random_triangle(trng, -2, 2, 1.5);
            const double d = tri_tri_distance(a, b);
            const double m = dense_sample_distance(a, b, 12);
            const double slack = (a.longest_edge() + b.longest_edge()) / 12.0;
            if (d > m + 1e-12 || d < m - slack - 1e-12 || d != tri_tri_distance(b, a)) {
                ok = false;
                detail = fmt("triangle distance out of band at trial %d: %.17g vs sample %.17g",
                             trial, d, m);
            }
            ++tri_checks;
        }

        const Triangle base{{0, 0, 0}, {2, 0, 0}, {0, 2, 0}};
        const struct {
            Triangle other;
            double want;
        } cases[] = {
            {{{0, 0, 0.5}, {2, 0, 0.5}, {0, 2, 0.5}}, 0.5},
            {{{0, 0, 0}, {2, 0, 0}, {1, -1, 1}}, 0.0},
            {{{0.5, 0.5, -1}, {0.5, 0.5, 1}, {1.5, 1.5, 1}}, 0.0},
            {{{0.25, 0.25, 0.75}, {1, 0, 2}, {0, 1, 2}}, 0.75},
            {{{3, 0, 0}, {4, -1, 0}, {4, 1, 0}}, 1.0},
        };
        for (const auto& c : cases) {
            const double got = tri_tri_distance(base, c.other);
            if (std::abs(got - c.want) > 1e-12) {
                ok = false;
                detail = fmt("analytic triangle case expected %.17g, got %.17g", c.want, got);
                break;
            }
            ++tri_checks;
        }
    }

    if (ok)
        detail = fmt("scans, min-reduce and compaction bit-equal sequential references at 2^20 "
                     "elements for workers {1,2,8,max}; %llu triangle-distance trials in band",
                     static_cast<unsigned long long>(tri_checks));
    report(6, "parallel primitives and the triangle kernel match exact references", ok, detail);
}

// ------------------------------------------------------------ criterion 7

void criterion_deviation_sandwich() {
    SplitMix64 rng(777);
    std::vector<Mesh> meshes;
    std::vector<LodLadder> ladders;
    for (int i = 0; i < 40; ++i) {
        Mesh m = translated(make_builtin("mixed", 90 + 10 * (i % 7), i), random_point(rng, 0, 6.5));
        ladders.push_back(build_lod_ladder(m, {20, 40, 60, 80, 100}));
        meshes.push_back(std::move(m));
    }

    std::vector<Pair> pairs;
    for (uint32_t i = 0; i < meshes.size(); ++i)
        for (uint32_t j = i + 1; j < meshes.size(); ++j) pairs.push_back({i, j});
    for (size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.next_below(i)]);
    pairs.resize(200);

    uint64_t trials = 0, violations = 0;
    std::string detail;
    for (const auto& [i, j] : pairs) {
        const double d_true = brute_pair_distance(meshes[i], meshes[j]);
        for (size_t li = 0; li < ladders[i].levels.size(); ++li) {
            const LodMesh& ma = ladders[i].levels[li];
            const LodMesh& mb = ladders[j].levels[li];
            double ub = std::numeric_limits<double>::infinity();
            double lb = std::numeric_limits<double>::infinity();
            for (size_t f = 0; f < ma.mesh.facets.size(); ++f)
                for (size_t g = 0; g < mb.mesh.facets.size(); ++g) {
                    const double d = tri_tri_distance(ma.mesh.triangle(f), mb.mesh.triangle(g));
                    ub = std::min(ub, d + ma.hd[f] + mb.hd[g]);
                    lb = std::min(lb, std::max(0.0, d - ma.ph[f] - mb.ph[g]));
                }
            ++trials;
            if (ub < d_true - 1e-12 || lb > d_true + 1e-12) {
                ++violations;
                if (detail.empty())
                    detail = fmt("pair (%u,%u) level %u: [%.17g, %.17g] vs exact %.17g", i, j,
                                 ma.level, lb, ub, d_true);
            }
        }
    }

    const bool ok = trials >= 1000 && violations == 0;
    if (ok)
        detail = fmt("%llu level-wise bound trials, zero violations",
                     static_cast<unsigned long long>(trials));
    report(7, "deviation-padded bounds sandwich the exact distance at every level", ok, detail);
}

// ------------------------------------------------------------ criterion 8

void criterion_early_decisions(const PreparedDataset& separated, const PreparedDataset& cross_r,
                               const PreparedDataset& cross_s, ThreadPool& pool) {
    const JoinOutput sep = run_join(separated, separated, within_spec(2.8), pool);
    uint64_t early = 0;
    for (const auto& rec : sep.records)
        if (rec.decided_at != 100) ++early;
    const double frac = sep.records.empty() ? 0.0 : double(early) / double(sep.records.size());

    const JoinOutput mixed = run_join(cross_r, cross_s, within_spec(0.8), pool);
    uint64_t mixed_early = 0;
    for (const auto& rec : mixed.records)
        if (rec.decided_at != 100) ++mixed_early;
    const double mixed_frac =
        mixed.records.empty() ? 0.0 : double(mixed_early) / double(mixed.records.size());

    const bool ok = !sep.records.empty() && frac >= 0.9 && mixed_frac > 0.0;
    report(8, "most results on well-separated data resolve before full resolution", ok,
           fmt("%.1f%% of %zu results early on separated data (threshold 90%%), "
               "%.1f%% of %zu on overlapping grids",
               frac * 100.0, sep.records.size(), mixed_frac * 100.0, mixed.records.size()));
}

// ------------------------------------------------------------ criterion 9

int run_scaling() {
    const char* bin = std::getenv("TRIJOIN_BIN");
    if (!bin || !*bin) {
        report(9, "join runtime grows moderately when the input doubles", false,
               "TRIJOIN_BIN is not set");
        return 1;
    }
    char tmpl[] = "/tmp/trijoin_scaling_XXXXXX";
    const char* dir = mkdtemp(tmpl);
    if (!dir) {
        report(9, "join runtime grows moderately when the input doubles", false,
               "cannot create a scratch directory");
        return 1;
    }
    const std::string out = std::string(dir) + "/bench.json";
    const std::string cmd = std::string("\"") + bin +
                            "\" bench --sizes 250,500,1000,2000 --tau 1.0 --facets 120 --workdir " +
                            dir + " --out " + out + " --seed 9";
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    const double wall = ms_since(t0);

    bool ok = rc == 0 && wall <= 900000.0;
    std::string detail;
    if (!ok) detail = fmt("bench exited with %d after %.0f s", rc, wall / 1000.0);

    if (ok) {
        std::ifstream in(out);
        if (!in) {
            ok = false;
            detail = "bench wrote no report";
        } else {
            const auto j = nlohmann::json::parse(in);
            const auto& runs = j.at("runs");
            const double max_growth = j.at("max_growth").get<double>();
            ok = runs.size() == 4 && max_growth <= 3.0;
            std::string sizes;
            for (const auto& r : runs)
                sizes += fmt("%s%u: %.0f ms (%.0f%% early)", sizes.empty() ? "" : ", ",
                             r.at("objects").get<uint32_t>(), r.at("join_ms").get<double>(),
                             r.at("pre_exact_fraction").get<double>() * 100.0);
            detail = fmt("250 to 2000 objects in %.0f s, max growth per doubling %.2fx "
                         "(limit 3.0x); join times %s",
                         wall / 1000.0, max_growth, sizes.c_str());
        }
    }
    std::filesystem::remove_all(dir);
    report(9, "join runtime grows moderately when the input doubles", ok, detail);
    return g_failures;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1 && std::string(argv[1]) == "scaling") return run_scaling();

    ThreadPool pool(2);
    const auto t0 = Clock::now();
    note("building datasets");
    const PreparedDataset parts = prep(parts_meshes(300, 101), pool);
    const PreparedDataset grid = prep(grid_meshes(200, 120, 3.4, 0.25, 102), pool);
    const PreparedDataset cross_r = prep(grid_meshes(27, 110, 3.2, 0.1, 103), pool);
    PreparedDataset cross_s = [&] {
        std::vector<Mesh> meshes = grid_meshes(27, 110, 3.2, 0.1, 104);
        for (Mesh& m : meshes) m = translated(std::move(m), {1.6, 1.6, 1.6});
        return prep(meshes, pool);
    }();
    const PreparedDataset separated = prep(grid_meshes(64, 120, 4.0, 0.1, 105, "sphere"), pool);
    const PreparedDataset audit_self = prep(grid_meshes(9, 150, 3.4, 0.1, 106), pool, 0.15);
    const PreparedDataset audit_dense = prep(grid_meshes(12, 150, 3.3, 0.1, 107), pool, 0.12);
    note(fmt("datasets ready after %.1f s", ms_since(t0) / 1000.0));

    criterion_within_joins(
        {
            {"parts", &parts, &parts, {0.0, 0.2, 0.5, 1.0, 2.0}},
            {"grid", &grid, &grid, {0.0, 0.4, 0.9, 1.6, 3.0}},
            {"cross", &cross_r, &cross_s, {0.0, 0.3, 0.8, 1.5, 2.5}},
        },
        pool);

    criterion_knn_joins(
        {
            {{"grid", &grid, &grid, {}}, {1, 5, 10}},
            {{"cross", &cross_r, &cross_s, {}}, {1, 5}},
        },
        pool);

    BvhCache cache;
    criterion_stage_bounds(
        {
            {"grid", &grid, &grid, {3.0}},
            {"grid", &grid, &grid, {5.5}},
            {"grid", &grid, &grid, {7.0}},
            {"parts", &parts, &parts, {2.0}},
            {"parts", &parts, &parts, {3.0}},
            {"cross", &cross_r, &cross_s, {2.5}},
            {"separated", &separated, &separated, {3.0}},
        },
        cache, pool);

    criterion_no_losses(cross_r, cross_s, {{&audit_self, 1.2}, {&audit_dense, 1.0}}, pool);
    criterion_chunk_invariance(cross_r, cross_s, pool);
    criterion_primitives();
    criterion_deviation_sandwich();
    criterion_early_decisions(separated, cross_r, cross_s, pool);

    std::printf("acceptance: %d passed, %d failed (%.1f s)\n", g_reported - g_failures, g_failures,
                ms_since(t0) / 1000.0);
    return g_failures;
}
