// Python module exposing the dataset generator, the preprocessor, and the
// join/oracle entry points over index files on disk.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trijoin/dataset.hpp"
#include "trijoin/engine.hpp"
#include "trijoin/filter.hpp"
#include "trijoin/index.hpp"
#include "trijoin/mesh.hpp"
#include "trijoin/parcore.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace trijoin;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<Mesh> load_off_dir(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".off")
            names.push_back(entry.path().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("no .off files in " + dir);
    std::vector<Mesh> meshes;
    meshes.reserve(names.size());
    for (const std::string& name : names) {
        try {
            meshes.push_back(parse_off(slurp(name)));
        } catch (const std::exception& e) {
            throw std::runtime_error(name + ": " + e.what());
        }
    }
    return meshes;
}

using PyVertices = std::vector<std::array<double, 3>>;
using PyFacets = std::vector<std::array<uint32_t, 3>>;

Mesh mesh_from_py(const PyVertices& vertices, const PyFacets& facets) {
    Mesh m;
    m.vertices.reserve(vertices.size());
    for (const auto& v : vertices) m.vertices.push_back({v[0], v[1], v[2]});
    m.facets = facets;
    return m;
}

std::pair<PyVertices, PyFacets> mesh_to_py(const Mesh& m) {
    PyVertices vertices;
    vertices.reserve(m.vertices.size());
    for (const Point3& v : m.vertices) vertices.push_back({v.x, v.y, v.z});
    return {std::move(vertices), m.facets};
}

JoinSpec spec_from_args(const std::string& type, double tau, uint32_t k, uint64_t filter_chunk,
                        uint64_t refine_chunk, const std::vector<uint32_t>& lods, bool pipeline,
                        uint32_t workers, uint64_t seed, bool exact) {
    JoinSpec spec;
    if (type == "within")
        spec.type = JoinType::Within;
    else if (type == "intersect")
        spec.type = JoinType::Intersect;
    else if (type == "knn")
        spec.type = JoinType::Knn;
    else
        throw std::invalid_argument("type must be within, intersect, or knn, got: " + type);
    spec.tau = tau;
    spec.k = k;
    spec.filter_chunk = filter_chunk;
    spec.refine_chunk = refine_chunk;
    spec.lods = lods;
    spec.pipeline = pipeline;
    spec.workers = workers;
    spec.seed = seed;
    spec.exact = exact;
    validate(spec);
    return spec;
}

// (records, stats_json). Records are (r, s, lb, ub, stage, rank) tuples; the
// heavy work runs without the GIL.
py::tuple run(const std::string& r_path, const std::string& s_path, const JoinSpec& spec,
              bool oracle) {
    JoinOutput out;
    {
        py::gil_scoped_release release;
        ThreadPool pool(spec.workers);
        const PreparedDataset R = load_index(r_path);
        PreparedDataset s_store;
        const PreparedDataset* S = &R;
        if (!s_path.empty() && s_path != r_path) {
            s_store = load_index(s_path);
            S = &s_store;
        }
        out = oracle ? run_oracle(R, *S, spec, pool) : run_join(R, *S, spec, pool);
    }
    py::list records;
    for (const JoinResultRecord& rec : out.records)
        records.append(
            py::make_tuple(rec.r, rec.s, rec.lb, rec.ub, stage_name(rec.decided_at), rec.rank));
    return py::make_tuple(records, out.stats.to_json());
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Parallel filter-and-refine spatial joins over triangulated polyhedra";

    m.def(
        "parse_off",
        [](const std::string& text) {
            const auto [vertices, facets] = mesh_to_py(parse_off(text));
            return py::make_tuple(vertices, facets);
        },
        py::arg("text"),
        "Parse OFF text into (vertices, facets); polygons are fan-triangulated.");

    m.def(
        "write_off",
        [](const PyVertices& vertices, const PyFacets& facets) {
            return write_off(mesh_from_py(vertices, facets));
        },
        py::arg("vertices"), py::arg("facets"), "Serialize (vertices, facets) as OFF text.");

    m.def(
        "generate",
        [](const std::string& out_dir, const std::string& shape, const std::string& seed_off,
           uint32_t facets, double scale, uint32_t count, double spacing, double jitter,
           uint64_t seed, std::optional<std::array<double, 6>> scatter_within) {
            GenerateParams gp;
            gp.shape = shape;
            gp.seed_off = seed_off;
            gp.facets = facets;
            gp.scale = scale;
            gp.count = count;
            gp.spacing = spacing;
            gp.jitter = jitter;
            gp.seed = seed;
            if (scatter_within) {
                const auto& b = *scatter_within;
                Aabb box;
                box.min = {b[0], b[1], b[2]};
                box.max = {b[3], b[4], b[5]};
                gp.scatter_within = box;
            }
            GeneratedDataset out;
            {
                py::gil_scoped_release release;
                out = generate_dataset(gp, out_dir);
            }
            py::dict result;
            result["files"] = out.files;
            result["total_facets"] = out.total_facets;
            result["extent"] = std::array<double, 6>{out.extent.min.x, out.extent.min.y,
                                                     out.extent.min.z, out.extent.max.x,
                                                     out.extent.max.y, out.extent.max.z};
            return result;
        },
        py::arg("out_dir"), py::arg("shape") = "sphere", py::arg("seed_off") = "",
        py::arg("facets") = 320, py::arg("scale") = 1.0, py::arg("count") = 1,
        py::arg("spacing") = 0.0, py::arg("jitter") = 0.0, py::arg("seed") = 0,
        py::arg("scatter_within") = py::none(),
        "Write numbered OFF files plus manifest.json into out_dir; returns the manifest "
        "fields. scatter_within is (minx, miny, minz, maxx, maxy, maxz).");

    m.def(
        "preprocess",
        [](const std::string& in_dir, const std::string& out_path, double voxel_ratio,
           const std::vector<int>& lods, uint64_t seed, int hd_grid, uint32_t workers) {
            size_t count = 0;
            {
                py::gil_scoped_release release;
                PreprocessParams params;
                params.voxel_ratio = voxel_ratio;
                params.lods = lods;
                params.seed = seed;
                params.hd_grid = hd_grid;
                ThreadPool pool(workers);
                const std::vector<Mesh> meshes = load_off_dir(in_dir);
                const PreparedDataset ds = preprocess_dataset(meshes, params, pool);
                save_index(ds, out_path);
                count = ds.objects.size();
            }
            return count;
        },
        py::arg("in_dir"), py::arg("out_path"), py::arg("voxel_ratio") = 0.02,
        py::arg("lods") = std::vector<int>{20, 40, 60, 80, 100}, py::arg("seed") = 0,
        py::arg("hd_grid") = 8, py::arg("workers") = 0,
        "Build the multi-resolution index for every .off file in in_dir (sorted by name) "
        "and save it to out_path; returns the object count.");

    const auto query_doc =
        "Returns (records, stats_json). Each record is (r, s, lb, ub, stage, rank); rank is "
        "0 except for knn. s defaults to a self-join on r.";

    m.def(
        "join",
        [](const std::string& r, const std::string& s, const std::string& type, double tau,
           uint32_t k, uint64_t filter_chunk, uint64_t refine_chunk,
           const std::vector<uint32_t>& lods, bool pipeline, uint32_t workers, uint64_t seed,
           bool exact) {
            return run(r, s,
                       spec_from_args(type, tau, k, filter_chunk, refine_chunk, lods, pipeline,
                                      workers, seed, exact),
                       false);
        },
        py::arg("r"), py::arg("s") = "", py::arg("type") = "within", py::arg("tau") = 0.0,
        py::arg("k") = 1, py::arg("filter_chunk") = 4194304, py::arg("refine_chunk") = 500000,
        py::arg("lods") = std::vector<uint32_t>{20, 40, 60, 80, 100}, py::arg("pipeline") = true,
        py::arg("workers") = 0, py::arg("seed") = 0, py::arg("exact") = false, query_doc);

    m.def(
        "oracle",
        [](const std::string& r, const std::string& s, const std::string& type, double tau,
           uint32_t k, uint32_t workers, uint64_t seed) {
            return run(r, s,
                       spec_from_args(type, tau, k, 4194304, 500000, {20, 40, 60, 80, 100}, true,
                                      workers, seed, false),
                       true);
        },
        py::arg("r"), py::arg("s") = "", py::arg("type") = "within", py::arg("tau") = 0.0,
        py::arg("k") = 1, py::arg("workers") = 0, py::arg("seed") = 0, query_doc);
}
