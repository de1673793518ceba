#include <algorithm>
#include <chrono>
#include <memory>
#include <numeric>
#include <queue>

#include "trijoin/engine.hpp"

namespace trijoin {

namespace {

// The oracle keeps its own facet-box tree on purpose: apart from the raw
// geometric primitives it shares no code with the engine's bound machinery,
// so agreement between the two is meaningful evidence.
struct OracleTree {
    struct Node {
        Aabb box = Aabb::empty();
        uint32_t left = 0, right = 0;
        uint32_t first = 0, count = 0; // count > 0 marks a leaf
    };

    std::vector<Triangle> tris;
    std::vector<uint32_t> order;
    std::vector<Node> nodes;

    explicit OracleTree(const Mesh& mesh) {
        tris.reserve(mesh.facets.size());
        for (size_t f = 0; f < mesh.facets.size(); ++f) tris.push_back(mesh.triangle(f));
        order.resize(tris.size());
        std::iota(order.begin(), order.end(), 0u);
        if (!tris.empty()) build(0, tris.size());
    }

    const Aabb& bounds() const { return nodes[0].box; }

  private:
    uint32_t build(size_t lo, size_t hi) {
        const uint32_t id = static_cast<uint32_t>(nodes.size());
        nodes.emplace_back();
        Aabb box = Aabb::empty();
        for (size_t i = lo; i < hi; ++i) box.expand(tris[order[i]]);
        nodes[id].box = box;
        if (hi - lo <= 4) {
            nodes[id].first = static_cast<uint32_t>(lo);
            nodes[id].count = static_cast<uint32_t>(hi - lo);
            return id;
        }
        const Point3 ext = box.extent();
        const int axis = ext.x >= ext.y ? (ext.x >= ext.z ? 0 : 2) : (ext.y >= ext.z ? 1 : 2);
        const auto key = [&](uint32_t t) {
            const Point3 c = tris[t].centroid();
            return axis == 0 ? c.x : axis == 1 ? c.y : c.z;
        };
        const size_t mid = (lo + hi) / 2;
        std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                         [&](uint32_t a, uint32_t b) {
                             const double ca = key(a), cb = key(b);
                             return ca != cb ? ca < cb : a < b;
                         });
        const uint32_t l = build(lo, mid);
        const uint32_t r = build(mid, hi);
        nodes[id].left = l;
        nodes[id].right = r;
        return id;
    }
};

struct NodePair {
    double lb;
    uint32_t a, b;
    bool operator>(const NodePair& o) const {
        if (lb != o.lb) return lb > o.lb;
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

double diag2(const Aabb& box) {
    const Point3 e = box.extent();
    return e.x * e.x + e.y * e.y + e.z * e.z;
}

// Exact minimum facet-to-facet distance between two objects. Branches whose
// box gap already reaches the best distance found cannot improve it, so
// skipping them never changes the result.
double oracle_pair_distance(const OracleTree& A, const OracleTree& B) {
    double best = std::numeric_limits<double>::infinity();
    if (A.tris.empty() || B.tris.empty()) return best;
    std::priority_queue<NodePair, std::vector<NodePair>, std::greater<NodePair>> heap;
    heap.push({mindist_aabb(A.nodes[0].box, B.nodes[0].box), 0, 0});
    while (!heap.empty()) {
        const NodePair top = heap.top();
        heap.pop();
        if (top.lb >= best) break;
        const OracleTree::Node& na = A.nodes[top.a];
        const OracleTree::Node& nb = B.nodes[top.b];
        const bool la = na.count > 0, lb = nb.count > 0;
        if (la && lb) {
            for (uint32_t i = 0; i < na.count; ++i)
                for (uint32_t j = 0; j < nb.count; ++j) {
                    const double d = tri_tri_distance(A.tris[A.order[na.first + i]],
                                                      B.tris[B.order[nb.first + j]]);
                    best = std::min(best, d);
                    if (best == 0.0) return 0.0;
                }
        } else if (!la && (lb || diag2(na.box) >= diag2(nb.box))) {
            for (uint32_t child : {na.left, na.right}) {
                const double g = mindist_aabb(A.nodes[child].box, nb.box);
                if (g < best) heap.push({g, child, top.b});
            }
        } else {
            for (uint32_t child : {nb.left, nb.right}) {
                const double g = mindist_aabb(na.box, B.nodes[child].box);
                if (g < best) heap.push({g, top.a, child});
            }
        }
    }
    return best;
}

} // namespace

JoinOutput run_oracle(const PreparedDataset& R, const PreparedDataset& S, const JoinSpec& spec,
                      ThreadPool& pool) {
    validate(spec);
    const bool knn = spec.type == JoinType::Knn;
    const double tau = spec.type == JoinType::Intersect ? 0.0 : spec.tau;
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<std::unique_ptr<OracleTree>> tr(R.objects.size()), ts(S.objects.size());
    pool.parallel_jobs(tr.size(), [&](size_t i) {
        tr[i] = std::make_unique<OracleTree>(R.objects[i].ladder.levels.back().mesh);
    });
    pool.parallel_jobs(ts.size(), [&](size_t i) {
        ts[i] = std::make_unique<OracleTree>(S.objects[i].ladder.levels.back().mesh);
    });

    std::vector<std::vector<JoinResultRecord>> per_r(R.objects.size());
    if (!knn) {
        pool.parallel_jobs(per_r.size(), [&](size_t r) {
            for (uint32_t s = 0; s < ts.size(); ++s) {
                if (mindist_aabb(tr[r]->bounds(), ts[s]->bounds()) > tau) continue;
                const double d = oracle_pair_distance(*tr[r], *ts[s]);
                if (d <= tau)
                    per_r[r].push_back({static_cast<uint32_t>(r), s, d, d, 100, 0});
            }
        });
    } else {
        pool.parallel_jobs(per_r.size(), [&](size_t r) {
            std::vector<std::pair<double, uint32_t>> top; // ascending (distance, id)
            for (uint32_t s = 0; s < ts.size(); ++s) {
                if (top.size() >= spec.k &&
                    mindist_aabb(tr[r]->bounds(), ts[s]->bounds()) > top[spec.k - 1].first)
                    continue;
                top.emplace_back(oracle_pair_distance(*tr[r], *ts[s]), s);
                std::sort(top.begin(), top.end());
                if (top.size() > spec.k) top.resize(spec.k);
            }
            uint32_t rank = 0;
            for (const auto& [d, s] : top)
                per_r[r].push_back({static_cast<uint32_t>(r), s, d, d, 100, ++rank});
        });
    }

    JoinOutput out;
    for (const auto& recs : per_r)
        out.records.insert(out.records.end(), recs.begin(), recs.end());

    const uint64_t all_pairs =
        static_cast<uint64_t>(R.objects.size()) * static_cast<uint64_t>(S.objects.size());
    out.stats.query = join_type_name(spec.type);
    out.stats.results = out.records.size();
    out.stats.total_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    StageCounters sc;
    sc.name = "exhaustive";
    sc.wall_ms = out.stats.total_ms;
    sc.pairs_in = all_pairs;
    sc.confirmed = out.records.size();
    sc.removed = all_pairs - out.records.size();
    sc.pairs_out = 0;
    out.stats.stages.push_back(sc);
    return out;
}

} // namespace trijoin
