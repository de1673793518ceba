#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "trijoin/dataset.hpp"
#include "trijoin/engine.hpp"
#include "trijoin/index.hpp"
#include "trijoin/mesh.hpp"
#include "trijoin/parcore.hpp"

namespace fs = std::filesystem;
using namespace trijoin;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
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

Aabb manifest_extent(const std::string& manifest_path) {
    const auto j = nlohmann::json::parse(slurp(manifest_path));
    const auto& e = j.at("extent");
    if (!e.is_array() || e.size() != 6)
        throw std::runtime_error(manifest_path + ": malformed extent");
    Aabb box;
    box.min = {e[0].get<double>(), e[1].get<double>(), e[2].get<double>()};
    box.max = {e[3].get<double>(), e[4].get<double>(), e[5].get<double>()};
    return box;
}

double ms_between(std::chrono::steady_clock::time_point a,
                  std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

struct QueryOpts {
    std::string r_path, s_path, out_path, stats_path;
    std::string type = "within";
    std::string pipeline = "on";
    double tau = 0.0;
    uint32_t k = 1;
    uint64_t filter_chunk = 4194304;
    uint64_t refine_chunk = 500000;
    std::vector<uint32_t> lods{20, 40, 60, 80, 100};
    uint32_t workers = 0;
    uint64_t seed = 0;
    bool exact = false;
};

void add_common_query_flags(CLI::App& cmd, QueryOpts& q) {
    cmd.add_option("--r", q.r_path, "Index file of dataset R")->required();
    cmd.add_option("--s", q.s_path, "Index file of dataset S (defaults to --r: self-join)");
    cmd.add_option("--type", q.type, "Query type")
        ->check(CLI::IsMember({"within", "intersect", "knn"}))
        ->capture_default_str();
    cmd.add_option("--tau", q.tau, "Distance threshold for within")->capture_default_str();
    cmd.add_option("--k", q.k, "Neighbor count for knn")->capture_default_str();
    cmd.add_option("--workers", q.workers, "Worker threads (0 = hardware)")
        ->capture_default_str();
    cmd.add_option("--seed", q.seed, "RNG seed")->capture_default_str();
    cmd.add_option("--out", q.out_path, "Result file (default: stdout)");
    cmd.add_option("--stats", q.stats_path, "Stage statistics JSON (default: stderr)");
}

JoinSpec make_spec(const QueryOpts& q) {
    JoinSpec spec;
    spec.type = q.type == "within" ? JoinType::Within
              : q.type == "intersect" ? JoinType::Intersect
                                      : JoinType::Knn;
    spec.tau = q.tau;
    spec.k = q.k;
    spec.filter_chunk = q.filter_chunk;
    spec.refine_chunk = q.refine_chunk;
    spec.lods = q.lods;
    spec.pipeline = q.pipeline == "on";
    spec.workers = q.workers;
    spec.seed = q.seed;
    spec.exact = q.exact;
    return spec;
}

int run_query(const QueryOpts& q, bool oracle) {
    const JoinSpec spec = make_spec(q);
    ThreadPool pool(spec.workers);
    const PreparedDataset R = load_index(q.r_path);
    PreparedDataset s_store;
    const PreparedDataset* S = &R;
    if (!q.s_path.empty() && q.s_path != q.r_path) {
        s_store = load_index(q.s_path);
        S = &s_store;
    }
    const JoinOutput out =
        oracle ? run_oracle(R, *S, spec, pool) : run_join(R, *S, spec, pool);
    const std::string text = format_records(out.records, spec.type == JoinType::Knn);
    if (q.out_path.empty())
        std::cout << text;
    else
        spill(q.out_path, text);
    const std::string stats = out.stats.to_json() + "\n";
    if (q.stats_path.empty())
        std::cerr << stats;
    else
        spill(q.stats_path, stats);
    return 0;
}

int run_bench(const std::vector<uint32_t>& sizes, double tau, uint32_t facets,
              const std::string& workdir, const std::string& out_path, uint32_t workers,
              uint64_t seed) {
    using Clock = std::chrono::steady_clock;
    ThreadPool pool(workers);
    nlohmann::json report;
    report["query"] = "within";
    report["tau"] = tau;
    report["workers"] = pool.size();
    report["runs"] = nlohmann::json::array();

    double prev_ms = -1.0, max_growth = 0.0;
    std::vector<double> growth;
    for (uint32_t n : sizes) {
        const std::string dir = workdir + "/n" + std::to_string(n);
        GenerateParams gp;
        gp.shape = "mixed";
        gp.facets = facets;
        gp.count = n;
        gp.spacing = 3.4;
        gp.jitter = 0.25;
        gp.seed = seed;
        auto t0 = Clock::now();
        generate_dataset(gp, dir);
        auto t1 = Clock::now();
        const std::vector<Mesh> meshes = load_off_dir(dir);
        PreprocessParams pp;
        pp.seed = seed;
        const PreparedDataset ds = preprocess_dataset(meshes, pp, pool);
        auto t2 = Clock::now();
        JoinSpec spec;
        spec.type = JoinType::Within;
        spec.tau = tau;
        spec.workers = workers;
        spec.seed = seed;
        const JoinOutput out = run_join(ds, ds, spec, pool);
        auto t3 = Clock::now();

        uint64_t pre_exact = 0;
        for (const JoinResultRecord& rec : out.records)
            if (rec.decided_at != 100) ++pre_exact;
        const double join_ms = ms_between(t2, t3);
        nlohmann::json run{{"objects", n},
                           {"generate_ms", ms_between(t0, t1)},
                           {"preprocess_ms", ms_between(t1, t2)},
                           {"join_ms", join_ms},
                           {"results", out.records.size()},
                           {"pre_exact_fraction",
                            out.records.empty()
                                ? 0.0
                                : static_cast<double>(pre_exact) / out.records.size()}};
        report["runs"].push_back(run);
        std::cerr << "bench n=" << n << " join_ms=" << join_ms
                  << " results=" << out.records.size() << "\n";
        if (prev_ms > 0.0) {
            growth.push_back(join_ms / prev_ms);
            max_growth = std::max(max_growth, growth.back());
        }
        prev_ms = join_ms;
    }
    report["growth_factors"] = growth;
    report["max_growth"] = max_growth;
    const std::string text = report.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else
        spill(out_path, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parallel filter-and-refine spatial joins over triangulated polyhedra"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file");

    // generate
    auto* gen = app.add_subcommand("generate", "Generate an OFF dataset plus manifest");
    GenerateParams gp;
    std::string gen_out, scatter_manifest;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--shape", gp.shape, "Builtin seed: sphere|torus|tube|mixed")
        ->check(CLI::IsMember({"sphere", "torus", "tube", "mixed"}))
        ->capture_default_str();
    gen->add_option("--seed-off", gp.seed_off, "Seed OFF file (overrides --shape)");
    gen->add_option("--facets", gp.facets, "Builtin facet target")->capture_default_str();
    gen->add_option("--scale", gp.scale, "Uniform scale applied to the seed")
        ->capture_default_str();
    gen->add_option("--count", gp.count, "Number of objects")->capture_default_str();
    gen->add_option("--spacing", gp.spacing, "Grid pitch (must exceed extent + 2*jitter)")
        ->capture_default_str();
    gen->add_option("--jitter", gp.jitter, "Per-axis uniform jitter amplitude")
        ->capture_default_str();
    gen->add_option("--seed", gp.seed, "RNG seed")->capture_default_str();
    gen->add_option("--scatter-within", scatter_manifest,
                    "manifest.json of an existing dataset; place objects uniformly inside "
                    "its extent instead of on a grid");

    // preprocess
    auto* prep = app.add_subcommand("preprocess", "Build a query-ready index from OFF files");
    std::string prep_in, prep_out;
    PreprocessParams pp;
    uint32_t prep_workers = 0;
    prep->add_option("--in", prep_in, "Directory of OFF files")->required();
    prep->add_option("--out", prep_out, "Index file to write")->required();
    prep->add_option("--voxel-ratio", pp.voxel_ratio, "Voxels per facet ratio")
        ->check(CLI::Range(1e-9, 1.0))
        ->capture_default_str();
    prep->add_option("--lods", pp.lods, "LoD schedule, ascending, ends at 100")
        ->delimiter(',')
        ->capture_default_str();
    prep->add_option("--seed", pp.seed, "RNG seed")->capture_default_str();
    prep->add_option("--workers", prep_workers, "Worker threads (0 = hardware)")
        ->capture_default_str();

    // join
    auto* join = app.add_subcommand("join", "Run a spatial join between two indexed datasets");
    QueryOpts jq;
    add_common_query_flags(*join, jq);
    join->add_option("--filter-chunk", jq.filter_chunk, "Voxel-pair budget per filter chunk")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    join->add_option("--refine-chunk", jq.refine_chunk, "Voxel-pair budget per refine chunk")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    join->add_option("--lods", jq.lods, "LoD schedule, ascending, ends at 100")
        ->delimiter(',')
        ->capture_default_str();
    join->add_option("--pipeline", jq.pipeline, "Overlap staging with compute")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    join->add_flag("--exact", jq.exact, "Recompute exact distances for confirmed pairs");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Exhaustive reference join (quadratic)");
    QueryOpts oq;
    add_common_query_flags(*oracle, oq);

    // bench
    auto* bench = app.add_subcommand("bench", "Self-contained scaling benchmark");
    std::vector<uint32_t> bench_sizes{250, 500, 1000, 2000};
    double bench_tau = 1.0;
    uint32_t bench_facets = 320, bench_workers = 0;
    uint64_t bench_seed = 0;
    std::string bench_workdir, bench_out;
    bench->add_option("--sizes", bench_sizes, "Object counts to run")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--tau", bench_tau, "within-tau threshold")->capture_default_str();
    bench->add_option("--facets", bench_facets, "Facets per generated object")
        ->capture_default_str();
    bench->add_option("--workdir", bench_workdir, "Scratch directory")->required();
    bench->add_option("--out", bench_out, "Report JSON (default: stdout)");
    bench->add_option("--workers", bench_workers, "Worker threads (0 = hardware)")
        ->capture_default_str();
    bench->add_option("--seed", bench_seed, "RNG seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) {
            if (!scatter_manifest.empty()) gp.scatter_within = manifest_extent(scatter_manifest);
            const GeneratedDataset ds = generate_dataset(gp, gen_out);
            std::cout << "wrote " << ds.files.size() << " objects (" << ds.total_facets
                      << " facets) to " << gen_out << "\n";
        } else if (*prep) {
            ThreadPool pool(prep_workers);
            const std::vector<Mesh> meshes = load_off_dir(prep_in);
            const PreparedDataset ds = preprocess_dataset(meshes, pp, pool);
            save_index(ds, prep_out);
            std::cout << "indexed " << ds.objects.size() << " objects -> " << prep_out << "\n";
        } else if (*join) {
            return run_query(jq, false);
        } else if (*oracle) {
            return run_query(oq, true);
        } else if (*bench) {
            return run_bench(bench_sizes, bench_tau, bench_facets, bench_workdir, bench_out,
                             bench_workers, bench_seed);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
