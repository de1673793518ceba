#include <charconv>
#include <cstdio>
#include <optional>

#include "trijoin/mesh.hpp"

namespace trijoin {

namespace {

struct Cursor {
    std::string_view text;
    size_t pos = 0;
    size_t line = 1;
};

// Next whitespace-delimited token, skipping blank lines and # comments.
// Reports the line the token starts on.
std::optional<std::string_view> next_token(Cursor& c, size_t* token_line = nullptr) {
    const std::string_view t = c.text;
    while (c.pos < t.size()) {
        const char ch = t[c.pos];
        if (ch == '#') {
            while (c.pos < t.size() && t[c.pos] != '\n') ++c.pos;
        } else if (ch == '\n') {
            ++c.line;
            ++c.pos;
        } else if (ch == ' ' || ch == '\t' || ch == '\r') {
            ++c.pos;
        } else {
            break;
        }
    }
    if (c.pos >= t.size()) return std::nullopt;
    const size_t start = c.pos;
    while (c.pos < t.size() && t[c.pos] != ' ' && t[c.pos] != '\t' && t[c.pos] != '\r' &&
           t[c.pos] != '\n' && t[c.pos] != '#')
        ++c.pos;
    if (token_line) *token_line = c.line;
    return t.substr(start, c.pos - start);
}

uint64_t parse_count(Cursor& c, const char* what, size_t* out_line = nullptr) {
    size_t line = c.line;
    auto tok = next_token(c, &line);
    if (out_line) *out_line = tok ? line : c.line;
    if (!tok) throw ParseError(c.line, std::string("unexpected end of input, expected ") + what);
    uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok->data(), tok->data() + tok->size(), v);
    if (ec != std::errc{} || p != tok->data() + tok->size())
        throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(*tok) + "'");
    return v;
}

double parse_real(Cursor& c, const char* what) {
    size_t line = c.line;
    auto tok = next_token(c, &line);
    if (!tok) throw ParseError(c.line, std::string("unexpected end of input, expected ") + what);
    double v = 0;
    auto [p, ec] = std::from_chars(tok->data(), tok->data() + tok->size(), v);
    if (ec != std::errc{} || p != tok->data() + tok->size())
        throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(*tok) + "'");
    return v;
}

} // namespace

Mesh parse_off(std::string_view text) {
    Cursor c{text};
    size_t line = 1;
    auto header = next_token(c, &line);
    if (!header || *header != "OFF") throw ParseError(line, "malformed header, expected OFF");

    Mesh m;
    const uint64_t nv = parse_count(c, "vertex count");
    const uint64_t nf = parse_count(c, "face count");
    parse_count(c, "edge count"); // present in the format, ignored

    m.vertices.reserve(nv);
    for (uint64_t i = 0; i < nv; ++i) {
        const double x = parse_real(c, "vertex coordinate");
        const double y = parse_real(c, "vertex coordinate");
        const double z = parse_real(c, "vertex coordinate");
        m.vertices.push_back({x, y, z});
    }

    for (uint64_t f = 0; f < nf; ++f) {
        size_t face_line = 0;
        const uint64_t n = parse_count(c, "face vertex count", &face_line);
        if (n < 3) throw ParseError(face_line, "face with fewer than 3 vertices");
        std::vector<uint32_t> ids(n);
        for (uint64_t i = 0; i < n; ++i) {
            size_t id_line = 0;
            const uint64_t v = parse_count(c, "vertex index", &id_line);
            if (v >= nv)
                throw ParseError(id_line, "vertex index " + std::to_string(v) + " out of range (" +
                                              std::to_string(nv) + " vertices)");
            ids[i] = static_cast<uint32_t>(v);
        }
        for (uint64_t i = 1; i + 1 < n; ++i)
            m.facets.push_back({ids[0], ids[i], ids[i + 1]});
    }
    if (next_token(c, &line))
        throw ParseError(line, "trailing content after the declared faces");
    return m;
}

std::string write_off(const Mesh& m) {
    std::string out = "OFF\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%zu %zu 0\n", m.vertices.size(), m.facets.size());
    out += buf;
    for (const Point3& v : m.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x, v.y, v.z);
        out += buf;
    }
    for (const auto& f : m.facets) {
        std::snprintf(buf, sizeof(buf), "3 %u %u %u\n", f[0], f[1], f[2]);
        out += buf;
    }
    return out;
}

} // namespace trijoin
