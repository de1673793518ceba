#include <bit>
#include <cstring>
#include <fstream>

#include "trijoin/index.hpp"

static_assert(std::endian::native == std::endian::little,
              "index container serialization assumes a little-endian host");

namespace trijoin {

namespace {

constexpr char kMagic[5] = {'3', 'D', 'P', 'J', '1'};
constexpr uint32_t kVersion = 1;

void put_u8(std::string& out, uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u32(std::string& out, uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::string& out, double v) { out.append(reinterpret_cast<const char*>(&v), 8); }
void put_point(std::string& out, const Point3& p) {
    put_f64(out, p.x);
    put_f64(out, p.y);
    put_f64(out, p.z);
}
void put_box(std::string& out, const Aabb& b) {
    put_point(out, b.min);
    put_point(out, b.max);
}

struct Reader {
    std::string_view data;
    size_t pos = 0;
    std::string section = "header";

    void need(size_t n) {
        if (pos + n > data.size())
            throw IndexError("truncated index: " + section);
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(data[pos++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, data.data() + pos, 4);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v;
        std::memcpy(&v, data.data() + pos, 8);
        pos += 8;
        return v;
    }
    double f64() {
        need(8);
        double v;
        std::memcpy(&v, data.data() + pos, 8);
        pos += 8;
        return v;
    }
    Point3 point() {
        const double x = f64(), y = f64(), z = f64();
        return {x, y, z};
    }
    Aabb box() {
        Aabb b;
        b.min = point();
        b.max = point();
        return b;
    }
};

void put_mesh(std::string& out, const Mesh& m) {
    put_u64(out, m.vertices.size());
    for (const Point3& v : m.vertices) put_point(out, v);
    put_u64(out, m.facets.size());
    for (const auto& f : m.facets) {
        put_u32(out, f[0]);
        put_u32(out, f[1]);
        put_u32(out, f[2]);
    }
}

Mesh read_mesh(Reader& r) {
    Mesh m;
    const uint64_t nv = r.u64();
    r.need(nv * 24);
    m.vertices.resize(nv);
    for (uint64_t i = 0; i < nv; ++i) m.vertices[i] = r.point();
    const uint64_t nf = r.u64();
    r.need(nf * 12);
    m.facets.resize(nf);
    for (uint64_t i = 0; i < nf; ++i) {
        m.facets[i][0] = r.u32();
        m.facets[i][1] = r.u32();
        m.facets[i][2] = r.u32();
        for (uint32_t v : m.facets[i])
            if (v >= nv) throw IndexError("corrupt index: facet index out of range in " + r.section);
    }
    return m;
}

} // namespace

std::string serialize_index(const PreparedDataset& ds) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(ds.lod_schedule.size()));
    for (int l : ds.lod_schedule) put_u32(out, static_cast<uint32_t>(l));
    put_u64(out, ds.objects.size());

    for (const PreparedObject& obj : ds.objects) {
        std::string body;
        put_u32(body, obj.id);
        put_box(body, obj.mbb);
        put_point(body, obj.anchor);
        put_u32(body, static_cast<uint32_t>(obj.ladder.levels.size()));
        for (const LodMesh& lod : obj.ladder.levels) {
            put_u32(body, static_cast<uint32_t>(lod.level));
            put_u8(body, lod.clamped ? 1 : 0);
            put_mesh(body, lod.mesh);
            for (double v : lod.hd) put_f64(body, v);
            for (double v : lod.ph) put_f64(body, v);
            put_u64(body, lod.ancestor_of_original.size());
            for (uint32_t a : lod.ancestor_of_original) put_u32(body, a);
        }
        const VoxelSet& vs = obj.voxels;
        put_u32(body, vs.voxel_count());
        put_u32(body, vs.reassigned);
        for (uint32_t v = 0; v < vs.voxel_count(); ++v) {
            put_box(body, vs.boxes[v]);
            put_point(body, vs.anchors[v]);
        }
        for (const auto& level : vs.facets_per_level) {
            for (const auto& ids : level) {
                put_u64(body, ids.size());
                for (uint32_t f : ids) put_u32(body, f);
            }
        }
        put_u64(out, body.size());
        out += body;
    }
    return out;
}

PreparedDataset deserialize_index(std::string_view bytes) {
    Reader r{bytes};
    r.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw IndexError("not a spatial join index (bad magic)");
    r.pos = sizeof(kMagic);
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw IndexError("unsupported index version " + std::to_string(version) + " (expected " +
                         std::to_string(kVersion) + ")");

    PreparedDataset ds;
    const uint32_t n_lods = r.u32();
    ds.lod_schedule.resize(n_lods);
    for (uint32_t i = 0; i < n_lods; ++i) ds.lod_schedule[i] = static_cast<int>(r.u32());
    const uint64_t n_objects = r.u64();

    ds.objects.resize(n_objects);
    for (uint64_t oi = 0; oi < n_objects; ++oi) {
        const std::string tag = "object " + std::to_string(oi);
        r.section = tag + " header";
        const uint64_t body_len = r.u64();
        const size_t body_end = r.pos + body_len;
        r.need(body_len);

        PreparedObject& obj = ds.objects[oi];
        obj.id = r.u32();
        obj.mbb = r.box();
        obj.anchor = r.point();
        const uint32_t n_levels = r.u32();
        if (n_levels != n_lods)
            throw IndexError("corrupt index: " + tag + " level count mismatch");
        obj.ladder.levels.resize(n_levels);
        for (uint32_t li = 0; li < n_levels; ++li) {
            r.section = tag + " level " + std::to_string(ds.lod_schedule[li]) + " mesh";
            LodMesh& lod = obj.ladder.levels[li];
            lod.level = static_cast<int>(r.u32());
            lod.clamped = r.u8() != 0;
            lod.mesh = read_mesh(r);
            r.section = tag + " level " + std::to_string(lod.level) + " bounds";
            const size_t nf = lod.mesh.facets.size();
            r.need(nf * 16);
            lod.hd.resize(nf);
            for (size_t i = 0; i < nf; ++i) lod.hd[i] = r.f64();
            lod.ph.resize(nf);
            for (size_t i = 0; i < nf; ++i) lod.ph[i] = r.f64();
            r.section = tag + " level " + std::to_string(lod.level) + " ancestors";
            const uint64_t n_orig = r.u64();
            r.need(n_orig * 4);
            lod.ancestor_of_original.resize(n_orig);
            for (uint64_t i = 0; i < n_orig; ++i) {
                lod.ancestor_of_original[i] = r.u32();
                if (lod.ancestor_of_original[i] >= nf)
                    throw IndexError("corrupt index: ancestor out of range in " + r.section);
            }
        }
        r.section = tag + " voxels";
        VoxelSet& vs = obj.voxels;
        const uint32_t n_voxels = r.u32();
        vs.reassigned = r.u32();
        vs.boxes.resize(n_voxels);
        vs.anchors.resize(n_voxels);
        for (uint32_t v = 0; v < n_voxels; ++v) {
            vs.boxes[v] = r.box();
            vs.anchors[v] = r.point();
        }
        vs.facets_per_level.assign(n_levels, {});
        for (uint32_t li = 0; li < n_levels; ++li) {
            r.section = tag + " voxel facets, level " + std::to_string(ds.lod_schedule[li]);
            vs.facets_per_level[li].resize(n_voxels);
            for (uint32_t v = 0; v < n_voxels; ++v) {
                const uint64_t count = r.u64();
                r.need(count * 4);
                auto& ids = vs.facets_per_level[li][v];
                ids.resize(count);
                for (uint64_t i = 0; i < count; ++i) ids[i] = r.u32();
            }
        }
        if (r.pos != body_end)
            throw IndexError("corrupt index: " + tag + " section length mismatch");
    }
    if (r.pos != bytes.size()) throw IndexError("corrupt index: trailing bytes after last object");
    return ds;
}

void save_index(const PreparedDataset& ds, const std::string& path) {
    const std::string bytes = serialize_index(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IndexError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IndexError("failed writing " + path);
}

PreparedDataset load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_index(bytes);
}

} // namespace trijoin
