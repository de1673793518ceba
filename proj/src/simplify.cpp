#include <algorithm>
#include <queue>
#include <unordered_map>

#include "trijoin/bvh.hpp"
#include "trijoin/mesh.hpp"

namespace trijoin {

namespace {

struct HeapEntry {
    double len2;
    uint32_t a, b; // a < b
    uint32_t ver_a, ver_b;
};

struct HeapCmp {
    bool operator()(const HeapEntry& x, const HeapEntry& y) const {
        if (x.len2 != y.len2) return x.len2 > y.len2;
        if (x.a != y.a) return x.a > y.a;
        return x.b > y.b;
    }
};

// Collapsing below 4 facets would destroy the smallest closed surface.
constexpr size_t kMinFacets = 4;

class Simplifier {
public:
    explicit Simplifier(const Mesh& mesh)
        : pos_(mesh.vertices),
          fv_(mesh.facets),
          vertex_alive_(mesh.vertices.size(), 1),
          version_(mesh.vertices.size(), 0),
          facet_alive_(mesh.facets.size(), 1),
          vfacets_(mesh.vertices.size()),
          members_(mesh.facets.size()),
          alive_count_(mesh.facets.size()) {
        for (uint32_t f = 0; f < fv_.size(); ++f) {
            members_[f] = {f};
            for (uint32_t v : fv_[f]) vfacets_[v].push_back(f);
        }
        for (uint32_t f = 0; f < fv_.size(); ++f)
            for (int e = 0; e < 3; ++e) push_edge(fv_[f][e], fv_[f][(e + 1) % 3]);
    }

    // Collapse until at most `target` facets remain or no legal collapse is left.
    void shrink_to(size_t target) {
        while (alive_count_ > target && !heap_.empty()) {
            const HeapEntry e = heap_.top();
            heap_.pop();
            if (!valid(e)) continue;
            try_collapse(e.a, e.b);
        }
    }

    size_t alive_count() const { return alive_count_; }

    // Compacted snapshot of the current surface plus the original->current
    // facet correspondence.
    LodMesh snapshot(int level) const {
        LodMesh lod;
        lod.level = level;
        std::vector<uint32_t> facet_new(fv_.size(), UINT32_MAX);
        std::vector<uint32_t> vertex_new(pos_.size(), UINT32_MAX);
        for (uint32_t f = 0; f < fv_.size(); ++f) {
            if (!facet_alive_[f]) continue;
            const uint32_t nf = static_cast<uint32_t>(lod.mesh.facets.size());
            facet_new[f] = nf;
            std::array<uint32_t, 3> tri;
            for (int i = 0; i < 3; ++i) {
                uint32_t v = fv_[f][i];
                if (vertex_new[v] == UINT32_MAX) {
                    vertex_new[v] = static_cast<uint32_t>(lod.mesh.vertices.size());
                    lod.mesh.vertices.push_back(pos_[v]);
                }
                tri[i] = vertex_new[v];
            }
            lod.mesh.facets.push_back(tri);
        }
        lod.ancestor_of_original.assign(members_.size(), UINT32_MAX);
        for (uint32_t f = 0; f < fv_.size(); ++f) {
            if (!facet_alive_[f]) continue;
            for (uint32_t orig : members_[f]) lod.ancestor_of_original[orig] = facet_new[f];
        }
        return lod;
    }

private:
    void push_edge(uint32_t x, uint32_t y) {
        if (x == y) return;
        if (x > y) std::swap(x, y);
        heap_.push({norm2(pos_[x] - pos_[y]), x, y, version_[x], version_[y]});
    }

    bool valid(const HeapEntry& e) const {
        if (!vertex_alive_[e.a] || !vertex_alive_[e.b]) return false;
        if (version_[e.a] != e.ver_a || version_[e.b] != e.ver_b) return false;
        for (uint32_t f : vfacets_[e.a]) {
            if (!facet_alive_[f]) continue;
            const auto& t = fv_[f];
            if ((t[0] == e.b || t[1] == e.b || t[2] == e.b)) return true;
        }
        return false;
    }

    Point3 centroid(uint32_t f) const {
        return (pos_[fv_[f][0]] + pos_[fv_[f][1]] + pos_[fv_[f][2]]) * (1.0 / 3.0);
    }

    void try_collapse(uint32_t a, uint32_t b) {
        // Facets sharing the edge die with it.
        std::vector<uint32_t> kill;
        for (uint32_t f : vfacets_[a]) {
            if (!facet_alive_[f]) continue;
            const auto& t = fv_[f];
            if (t[0] == b || t[1] == b || t[2] == b) kill.push_back(f);
        }
        if (kill.empty()) return;
        if (alive_count_ - kill.size() < kMinFacets) return;

        std::sort(kill.begin(), kill.end());
        std::vector<Point3> dead_centroids;
        dead_centroids.reserve(kill.size());
        for (uint32_t f : kill) dead_centroids.push_back(centroid(f));

        pos_[a] = (pos_[a] + pos_[b]) * 0.5;
        vertex_alive_[b] = 0;
        ++version_[a];
        ++version_[b];
        for (uint32_t f : kill) facet_alive_[f] = 0;
        alive_count_ -= kill.size();

        for (uint32_t f : vfacets_[b]) {
            if (!facet_alive_[f]) continue;
            for (int i = 0; i < 3; ++i)
                if (fv_[f][i] == b) fv_[f][i] = a;
            vfacets_[a].push_back(f);
        }
        vfacets_[b].clear();
        compact_incidence(a);

        // Reassign dead facets' members to the nearest surviving facet around a.
        for (size_t k = 0; k < kill.size(); ++k) {
            const uint32_t adoptive = nearest_facet(dead_centroids[k], vfacets_[a]);
            auto& from = members_[kill[k]];
            auto& to = members_[adoptive];
            to.insert(to.end(), from.begin(), from.end());
            from.clear();
            from.shrink_to_fit();
        }

        for (uint32_t f : vfacets_[a])
            for (int e = 0; e < 3; ++e) push_edge(fv_[f][e], fv_[f][(e + 1) % 3]);
    }

    void compact_incidence(uint32_t v) {
        auto& list = vfacets_[v];
        list.erase(std::remove_if(list.begin(), list.end(),
                                  [&](uint32_t f) { return !facet_alive_[f]; }),
                   list.end());
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }

    uint32_t nearest_facet(const Point3& c, const std::vector<uint32_t>& candidates) const {
        double best = std::numeric_limits<double>::infinity();
        uint32_t best_f = UINT32_MAX;
        auto consider = [&](uint32_t f) {
            if (!facet_alive_[f]) return;
            const double d = norm2(centroid(f) - c);
            if (d < best || (d == best && f < best_f)) {
                best = d;
                best_f = f;
            }
        };
        for (uint32_t f : candidates) consider(f);
        if (best_f == UINT32_MAX) { // survivor vertex left with no facets
            for (uint32_t f = 0; f < fv_.size(); ++f) consider(f);
        }
        return best_f;
    }

    std::vector<Point3> pos_;
    std::vector<std::array<uint32_t, 3>> fv_;
    std::vector<uint8_t> vertex_alive_;
    std::vector<uint32_t> version_;
    std::vector<uint8_t> facet_alive_;
    std::vector<std::vector<uint32_t>> vfacets_;
    std::vector<std::vector<uint32_t>> members_;
    size_t alive_count_;
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, HeapCmp> heap_;
};

} // namespace

LodLadder build_lod_ladder(const Mesh& mesh, const std::vector<int>& levels, int hd_grid) {
    if (mesh.facets.empty()) throw std::invalid_argument("build_lod_ladder: empty mesh");
    if (levels.empty() || levels.back() != 100)
        throw std::invalid_argument("build_lod_ladder: levels must end at 100");
    for (size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] <= 0 || levels[i] > 100)
            throw std::invalid_argument("build_lod_ladder: levels must lie in (0, 100]");
        if (i > 0 && levels[i] <= levels[i - 1])
            throw std::invalid_argument("build_lod_ladder: levels must be strictly ascending");
    }

    const size_t n_orig = mesh.facets.size();
    LodLadder ladder;
    ladder.levels.resize(levels.size());

    LodMesh& finest = ladder.levels.back();
    finest.level = 100;
    finest.mesh = mesh;
    finest.hd.assign(n_orig, 0.0);
    finest.ph.assign(n_orig, 0.0);
    finest.ancestor_of_original.resize(n_orig);
    for (uint32_t f = 0; f < n_orig; ++f) finest.ancestor_of_original[f] = f;

    Simplifier simp(mesh);
    for (size_t i = levels.size() - 1; i-- > 0;) {
        const size_t target = std::max<size_t>(1, n_orig * static_cast<size_t>(levels[i]) / 100);
        simp.shrink_to(target);
        ladder.levels[i] = simp.snapshot(levels[i]);
        ladder.levels[i].clamped = simp.alive_count() > target;
    }

    const TriBvh original_bvh(mesh);
    for (size_t i = 0; i + 1 < ladder.levels.size(); ++i) {
        LodMesh& lod = ladder.levels[i];
        const size_t nf = lod.mesh.facets.size();
        lod.hd.resize(nf);
        lod.ph.resize(nf);
        for (uint32_t f = 0; f < nf; ++f)
            lod.hd[f] = compute_facet_hd(lod.mesh.triangle(f), original_bvh, hd_grid);

        // Group original facets by ancestor once; the per-facet op would
        // rescan the whole map for every facet.
        std::vector<std::vector<uint32_t>> groups(nf);
        for (uint32_t orig = 0; orig < n_orig; ++orig)
            groups[lod.ancestor_of_original[orig]].push_back(orig);
        for (uint32_t f = 0; f < nf; ++f) {
            const Triangle tri = lod.mesh.triangle(f);
            double m = 0.0;
            for (uint32_t orig : groups[f]) {
                const auto& ov = mesh.facets[orig];
                for (int i3 = 0; i3 < 3; ++i3)
                    m = std::max(m, point_triangle_distance(mesh.vertices[ov[i3]], tri));
            }
            lod.ph[f] = m;
        }
    }
    return ladder;
}

double compute_facet_ph(uint32_t f_prime_id, const LodMesh& lod, const Mesh& original) {
    const Triangle tri = lod.mesh.triangle(f_prime_id);
    double m = 0.0;
    for (uint32_t orig = 0; orig < lod.ancestor_of_original.size(); ++orig) {
        if (lod.ancestor_of_original[orig] != f_prime_id) continue;
        const auto& ov = original.facets[orig];
        for (int i = 0; i < 3; ++i)
            m = std::max(m, point_triangle_distance(original.vertices[ov[i]], tri));
    }
    return m;
}

} // namespace trijoin
