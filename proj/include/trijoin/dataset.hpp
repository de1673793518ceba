#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trijoin/geom.hpp"
#include "trijoin/mesh.hpp"

namespace trijoin {

// Closed procedural seed meshes, sized to roughly `target_facets` facets.
Mesh make_sphere(uint32_t target_facets);
Mesh make_torus(uint32_t target_facets);
Mesh make_tube(uint32_t target_facets);

// shape in {sphere, torus, tube, mixed}; mixed cycles the three by index.
Mesh make_builtin(const std::string& shape, uint32_t target_facets, uint32_t index);

struct GenerateParams {
    std::string shape = "sphere"; // builtin name; ignored when seed_off is set
    std::string seed_off;         // path to a seed OFF file, optional
    uint32_t facets = 320;        // builtin facet target
    double scale = 1.0;
    uint32_t count = 1;
    double spacing = 0.0; // grid pitch; must exceed extent + 2*jitter
    double jitter = 0.0;
    uint64_t seed = 0;
    // Place objects uniformly inside this box instead of on the grid
    // (overlap allowed; used for a second population inside the first's
    // extent).
    std::optional<Aabb> scatter_within;
};

struct GeneratedDataset {
    std::vector<std::string> files; // relative to out_dir, placement order
    Aabb extent = Aabb::empty();
    uint64_t total_facets = 0;
};

// Writes numbered OFF files plus manifest.json into out_dir. Deterministic
// for a fixed seed. count == 1 places the seed mesh at the origin untouched.
GeneratedDataset generate_dataset(const GenerateParams& params, const std::string& out_dir);

} // namespace trijoin
