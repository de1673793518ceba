#include <doctest.h>

#include "helpers.hpp"
#include "trijoin/mesh.hpp"

using namespace trijoin;
using namespace trijoin::testing;

namespace {

Mesh make_tetrahedron() {
    Mesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.facets = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    return m;
}

} // namespace

TEST_SUITE("simplify") {

TEST_CASE("levels=[100] is the identity ladder") {
    const Mesh sphere = make_sphere(140);
    const LodLadder ladder = build_lod_ladder(sphere, {100});
    REQUIRE(ladder.levels.size() == 1);
    const LodMesh& top = ladder.levels[0];
    CHECK(top.level == 100);
    CHECK(top.mesh == sphere);
    CHECK_FALSE(top.clamped);
    for (size_t f = 0; f < sphere.facets.size(); ++f) {
        CHECK(top.hd[f] == 0.0);
        CHECK(top.ph[f] == 0.0);
        CHECK(top.ancestor_of_original[f] == f);
    }
}

TEST_CASE("facet counts hit the requested percentages") {
    const Mesh sphere = make_sphere(320);
    const size_t n = sphere.facets.size();
    const LodLadder ladder = build_lod_ladder(sphere, {20, 40, 60, 80, 100});
    REQUIRE(ladder.levels.size() == 5);
    size_t prev = 0;
    for (const LodMesh& lod : ladder.levels) {
        const double target = n * lod.level / 100.0;
        if (!lod.clamped)
            CHECK(std::abs(static_cast<double>(lod.mesh.facets.size()) - target) <= 2.0);
        CHECK(lod.mesh.facets.size() > prev); // strictly increasing along the ladder
        prev = lod.mesh.facets.size();
    }
    CHECK(ladder.levels.back().mesh == sphere);
}

TEST_CASE("ancestor map is total and in range at every level") {
    const Mesh torus = make_torus(260);
    const LodLadder ladder = build_lod_ladder(torus, {20, 40, 60, 80, 100});
    for (const LodMesh& lod : ladder.levels) {
        REQUIRE(lod.ancestor_of_original.size() == torus.facets.size());
        for (uint32_t a : lod.ancestor_of_original) REQUIRE(a < lod.mesh.facets.size());
        for (double v : lod.hd) REQUIRE(v >= 0.0);
        for (double v : lod.ph) REQUIRE(v >= 0.0);
    }
}

TEST_CASE("tiny meshes clamp instead of failing") {
    const LodLadder ladder = build_lod_ladder(make_tetrahedron(), {20, 100});
    REQUIRE(ladder.levels.size() == 2);
    CHECK(ladder.levels[0].clamped);
    CHECK(ladder.levels[0].mesh.facets.size() >= 4); // a closed surface cannot shrink below this
    CHECK(ladder.levels[1].mesh.facets.size() == 4);
}

TEST_CASE("ladder construction is deterministic") {
    const Mesh tube = make_tube(300);
    const LodLadder a = build_lod_ladder(tube, {20, 60, 100});
    const LodLadder b = build_lod_ladder(tube, {20, 60, 100});
    REQUIRE(a.levels.size() == b.levels.size());
    for (size_t i = 0; i < a.levels.size(); ++i) {
        CHECK(a.levels[i].mesh == b.levels[i].mesh);
        CHECK(a.levels[i].hd == b.levels[i].hd);
        CHECK(a.levels[i].ph == b.levels[i].ph);
        CHECK(a.levels[i].ancestor_of_original == b.levels[i].ancestor_of_original);
    }
}

TEST_CASE("ph equals the brute-force max over mapped original vertices") {
    const Mesh original = make_sphere(200);
    const LodLadder ladder = build_lod_ladder(original, {30, 100});
    const LodMesh& coarse = ladder.levels[0];
    for (uint32_t fp = 0; fp < coarse.mesh.facets.size(); ++fp) {
        double ref = 0.0;
        const Triangle tri = coarse.mesh.triangle(fp);
        for (size_t g = 0; g < original.facets.size(); ++g) {
            if (coarse.ancestor_of_original[g] != fp) continue;
            const Triangle og = original.triangle(g);
            for (const Point3& v : {og.v0, og.v1, og.v2})
                ref = std::max(ref, point_triangle_distance(v, tri));
        }
        REQUIRE(coarse.ph[fp] == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("per-object max deviation shrinks toward finer levels") {
    for (const Mesh& mesh : {make_sphere(300), make_torus(300)}) {
        const LodLadder ladder = build_lod_ladder(mesh, {20, 40, 60, 80, 100});
        double prev_hd = std::numeric_limits<double>::infinity();
        double prev_ph = std::numeric_limits<double>::infinity();
        for (const LodMesh& lod : ladder.levels) {
            double max_hd = 0.0, max_ph = 0.0;
            for (double v : lod.hd) max_hd = std::max(max_hd, v);
            for (double v : lod.ph) max_ph = std::max(max_ph, v);
            CHECK(max_hd <= prev_hd + 1e-12);
            CHECK(max_ph <= prev_ph + 1e-12);
            prev_hd = max_hd;
            prev_ph = max_ph;
        }
        CHECK(prev_hd == 0.0); // level 100
        CHECK(prev_ph == 0.0);
    }
}

TEST_CASE("distance sandwich holds on random mesh pairs at every level") {
    SplitMix64 rng(555);
    int trials = 0;
    for (int pair = 0; pair < 12; ++pair) {
        const Mesh a = make_builtin("mixed", 90 + 10 * (pair % 4), pair);
        const Mesh b = translated(make_builtin("mixed", 110, pair + 1),
                                  random_point(rng, 1.5, 4.0));
        const double d_true = brute_pair_distance(a, b);
        const LodLadder la = build_lod_ladder(a, {20, 60, 100});
        const LodLadder lb = build_lod_ladder(b, {20, 60, 100});
        for (size_t li = 0; li < la.levels.size(); ++li) {
            const LodMesh& ma = la.levels[li];
            const LodMesh& mb = lb.levels[li];
            double ub = std::numeric_limits<double>::infinity();
            double lb_bound = std::numeric_limits<double>::infinity();
            for (size_t f = 0; f < ma.mesh.facets.size(); ++f)
                for (size_t g = 0; g < mb.mesh.facets.size(); ++g) {
                    const double d = tri_tri_distance(ma.mesh.triangle(f), mb.mesh.triangle(g));
                    ub = std::min(ub, d + ma.hd[f] + mb.hd[g]);
                    lb_bound = std::min(lb_bound, std::max(0.0, d - ma.ph[f] - mb.ph[g]));
                }
            REQUIRE(ub >= d_true - 1e-12);
            REQUIRE(lb_bound <= d_true + 1e-12);
            ++trials;
        }
    }
    CHECK(trials == 36);
}

} // TEST_SUITE
