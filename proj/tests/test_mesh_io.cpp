#include <doctest.h>

#include "helpers.hpp"
#include "trijoin/mesh.hpp"

using namespace trijoin;
using namespace trijoin::testing;

TEST_SUITE("mesh_io") {

TEST_CASE("quad faces are fan triangulated") {
    const char* off = R"(OFF
# unit cube as quads
8 6 12
-1 -1 -1
 1 -1 -1
-1  1 -1
 1  1 -1
-1 -1  1
 1 -1  1
-1  1  1
 1  1  1
4 0 1 3 2
4 4 6 7 5
4 0 4 5 1
4 2 3 7 6
4 0 2 6 4
4 1 5 7 3
)";
    const Mesh m = parse_off(off);
    CHECK(m.vertices.size() == 8);
    CHECK(m.facets.size() == 12);
    CHECK(m.facets[0] == std::array<uint32_t, 3>{0, 1, 3});
    CHECK(m.facets[1] == std::array<uint32_t, 3>{0, 3, 2});
}

TEST_CASE("write/parse round-trip is the identity") {
    const Mesh cube = make_cube(0.75, {1, 2, 3});
    const std::string text = write_off(cube);
    const Mesh back = parse_off(text);
    CHECK(back == cube);
    CHECK(write_off(back) == text); // byte-stable
}

TEST_CASE("round-trip preserves awkward coordinates") {
    Mesh m;
    m.vertices = {{1.0 / 3.0, -2.5e-17, 1e300},
                  {0.1, 0.2, 0.30000000000000004},
                  {-0.0, 7.25, -1024.0}};
    m.facets = {{0, 1, 2}};
    CHECK(parse_off(write_off(m)) == m);
}

TEST_CASE("parse errors carry line numbers") {
    const auto line_of = [](const char* text) -> size_t {
        try {
            parse_off(text);
        } catch (const ParseError& e) {
            return e.line;
        }
        return 0;
    };
    CHECK(line_of("OFX\n1 0 0\n0 0 0\n") == 1);
    CHECK(line_of("OFF\nnot numbers\n") == 2);
    CHECK(line_of("OFF\n1 1 0\n0 0 0\n3 0 9 0\n") == 4);  // vertex id out of range
    CHECK(line_of("OFF\n2 1 0\n0 0 0\n1 1 1\n2 0 1\n") == 5); // facet arity < 3
    CHECK(line_of("OFF\n3 1 0\n0 0 0\n") == 4); // truncated vertex list
    CHECK_THROWS_AS(parse_off(""), ParseError);
}

TEST_CASE("comments and blank lines are tolerated") {
    const char* off = R"(OFF
# a comment

3 1 0
0 0 0
# another
1 0 0
0 1 0

3 0 1 2
)";
    const Mesh m = parse_off(off);
    CHECK(m.vertices.size() == 3);
    CHECK(m.facets.size() == 1);
}

} // TEST_SUITE
