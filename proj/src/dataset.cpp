#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "trijoin/dataset.hpp"
#include "trijoin/rng.hpp"

namespace trijoin {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

uint32_t at_least(double v, uint32_t floor_value) {
    const double r = std::llround(v);
    return r < floor_value ? floor_value : static_cast<uint32_t>(r);
}

void push_quad(Mesh& m, uint32_t a, uint32_t b, uint32_t c, uint32_t d) {
    m.facets.push_back({a, b, c});
    m.facets.push_back({a, c, d});
}

} // namespace

Mesh make_sphere(uint32_t target_facets) {
    // 2 * segs * (bands - 1) facets; poles fan into the first and last ring.
    const uint32_t segs = at_least(std::sqrt(target_facets / 2.0), 3);
    const uint32_t bands = at_least(target_facets / (2.0 * segs) + 1, 2);
    const uint32_t rings = bands - 1; // interior vertex rings

    Mesh m;
    m.vertices.push_back({0, 1, 0});
    for (uint32_t i = 1; i <= rings; ++i) {
        const double theta = std::numbers::pi * i / bands;
        for (uint32_t j = 0; j < segs; ++j) {
            const double phi = kTwoPi * j / segs;
            m.vertices.push_back({std::sin(theta) * std::cos(phi), std::cos(theta),
                                  std::sin(theta) * std::sin(phi)});
        }
    }
    m.vertices.push_back({0, -1, 0});

    const uint32_t bottom = static_cast<uint32_t>(m.vertices.size()) - 1;
    auto ring = [&](uint32_t i, uint32_t j) { return 1 + (i - 1) * segs + j % segs; };
    for (uint32_t j = 0; j < segs; ++j) m.facets.push_back({0, ring(1, j), ring(1, j + 1)});
    for (uint32_t i = 1; i < rings; ++i)
        for (uint32_t j = 0; j < segs; ++j)
            push_quad(m, ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
    for (uint32_t j = 0; j < segs; ++j)
        m.facets.push_back({bottom, ring(rings, j + 1), ring(rings, j)});
    return m;
}

Mesh make_torus(uint32_t target_facets) {
    constexpr double kMajor = 1.0, kMinor = 0.35;
    // 2 * u * v facets; keep cells roughly square: u/v ~ major/minor circumference.
    const double ratio = kMajor / kMinor;
    const uint32_t v = at_least(std::sqrt(target_facets / (2.0 * ratio)), 3);
    const uint32_t u = at_least(target_facets / (2.0 * v), 3);

    Mesh m;
    for (uint32_t i = 0; i < u; ++i) {
        const double phi = kTwoPi * i / u;
        for (uint32_t j = 0; j < v; ++j) {
            const double psi = kTwoPi * j / v;
            const double rad = kMajor + kMinor * std::cos(psi);
            m.vertices.push_back({rad * std::cos(phi), kMinor * std::sin(psi),
                                  rad * std::sin(phi)});
        }
    }
    auto at = [&](uint32_t i, uint32_t j) { return (i % u) * v + j % v; };
    for (uint32_t i = 0; i < u; ++i)
        for (uint32_t j = 0; j < v; ++j)
            push_quad(m, at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
    return m;
}

Mesh make_tube(uint32_t target_facets) {
    constexpr double kRadius = 0.5, kLength = 2.4;
    // 2 * segs * (stacks + 1) facets: side quads plus two cap fans.
    const uint32_t segs = at_least(std::sqrt(target_facets / 2.0), 3);
    const uint32_t stacks = at_least(target_facets / (2.0 * segs) - 1, 1);

    Mesh m;
    m.vertices.push_back({-kLength / 2, 0, 0});
    m.vertices.push_back({kLength / 2, 0, 0});
    for (uint32_t i = 0; i <= stacks; ++i) {
        const double x = -kLength / 2 + kLength * i / stacks;
        for (uint32_t j = 0; j < segs; ++j) {
            const double phi = kTwoPi * j / segs;
            m.vertices.push_back({x, kRadius * std::cos(phi), kRadius * std::sin(phi)});
        }
    }
    auto ring = [&](uint32_t i, uint32_t j) { return 2 + i * segs + j % segs; };
    for (uint32_t j = 0; j < segs; ++j) m.facets.push_back({0, ring(0, j + 1), ring(0, j)});
    for (uint32_t i = 0; i < stacks; ++i)
        for (uint32_t j = 0; j < segs; ++j)
            push_quad(m, ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
    for (uint32_t j = 0; j < segs; ++j) m.facets.push_back({1, ring(stacks, j), ring(stacks, j + 1)});
    return m;
}

Mesh make_builtin(const std::string& shape, uint32_t target_facets, uint32_t index) {
    if (shape == "sphere") return make_sphere(target_facets);
    if (shape == "torus") return make_torus(target_facets);
    if (shape == "tube") return make_tube(target_facets);
    if (shape == "mixed") {
        switch (index % 3) {
            case 0: return make_sphere(target_facets);
            case 1: return make_torus(target_facets);
            default: return make_tube(target_facets);
        }
    }
    throw std::invalid_argument("unknown builtin shape: " + shape);
}

GeneratedDataset generate_dataset(const GenerateParams& params, const std::string& out_dir) {
    if (params.count < 1) throw std::invalid_argument("generate: count must be >= 1");
    if (params.jitter < 0) throw std::invalid_argument("generate: jitter must be >= 0");

    Mesh seed;
    if (!params.seed_off.empty()) {
        std::ifstream in(params.seed_off, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read seed mesh: " + params.seed_off);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        seed = parse_off(bytes);
    }

    auto seed_mesh = [&](uint32_t index) {
        Mesh m = params.seed_off.empty() ? make_builtin(params.shape, params.facets, index) : seed;
        if (params.scale != 1.0)
            for (Point3& v : m.vertices) v = v * params.scale;
        return m;
    };

    const bool grid = !params.scatter_within.has_value();
    const uint32_t per_axis =
        static_cast<uint32_t>(std::ceil(std::cbrt(static_cast<double>(params.count))));

    if (grid && params.count > 1) {
        // The largest extent over the shapes in play bounds every object.
        Point3 ext{0, 0, 0};
        const uint32_t variants = params.seed_off.empty() && params.shape == "mixed" ? 3u : 1u;
        for (uint32_t i = 0; i < variants; ++i) {
            const Point3 e = seed_mesh(i).bounds().extent();
            ext.x = std::max(ext.x, e.x);
            ext.y = std::max(ext.y, e.y);
            ext.z = std::max(ext.z, e.z);
        }
        const double need = std::max({ext.x, ext.y, ext.z}) + 2 * params.jitter;
        if (params.spacing <= need)
            throw std::invalid_argument(
                "generate: spacing " + std::to_string(params.spacing) +
                " cannot keep bounding boxes disjoint; need > " + std::to_string(need));
    }

    std::filesystem::create_directories(out_dir);

    GeneratedDataset out;
    nlohmann::json files_json = nlohmann::json::array();
    for (uint32_t i = 0; i < params.count; ++i) {
        Mesh m = seed_mesh(i);
        SplitMix64 rng(params.seed ^ ((i + 1) * 0x9E3779B97F4A7C15ULL));
        Point3 shift{0, 0, 0};
        if (!grid) {
            const Aabb& box = *params.scatter_within;
            const Point3 target{rng.next_in(box.min.x, box.max.x),
                                rng.next_in(box.min.y, box.max.y),
                                rng.next_in(box.min.z, box.max.z)};
            shift = target - m.bounds().center();
        } else if (params.count > 1) {
            shift = {params.spacing * (i % per_axis),
                     params.spacing * ((i / per_axis) % per_axis),
                     params.spacing * (i / (per_axis * per_axis))};
            if (params.jitter > 0) {
                shift.x += rng.next_in(-params.jitter, params.jitter);
                shift.y += rng.next_in(-params.jitter, params.jitter);
                shift.z += rng.next_in(-params.jitter, params.jitter);
            }
        }
        for (Point3& v : m.vertices) v += shift;

        char name[32];
        std::snprintf(name, sizeof(name), "obj_%05u.off", i);
        const std::string path = out_dir + "/" + name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << write_off(m);
        if (!f) throw std::runtime_error("write failed: " + path);

        const Aabb box = m.bounds();
        out.files.push_back(name);
        out.extent.expand(box);
        out.total_facets += m.facets.size();
        files_json.push_back({{"file", name}, {"facets", m.facets.size()}});
    }

    nlohmann::json manifest{
        {"shape", params.seed_off.empty() ? params.shape : ""},
        {"seed_off", params.seed_off},
        {"facets", params.facets},
        {"scale", params.scale},
        {"count", params.count},
        {"spacing", params.spacing},
        {"jitter", params.jitter},
        {"seed", params.seed},
        {"total_facets", out.total_facets},
        {"extent",
         {out.extent.min.x, out.extent.min.y, out.extent.min.z, out.extent.max.x,
          out.extent.max.y, out.extent.max.z}},
        {"files", files_json},
    };
    if (params.scatter_within) {
        const Aabb& b = *params.scatter_within;
        manifest["scatter_within"] = {b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z};
    }
    std::ofstream mf(out_dir + "/manifest.json", std::ios::binary);
    if (!mf) throw std::runtime_error("cannot write " + out_dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
    return out;
}

} // namespace trijoin
