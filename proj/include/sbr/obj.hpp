#pragma once

// Wavefront OBJ subset: `v` and `f` records only. Texture/normal indices on faces
// are accepted and ignored, every other record type is skipped.

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "sbr/error.hpp"
#include "sbr/geometry.hpp"

namespace sbr {

struct LoadOptions {
    bool strict = false;  // reject the file on the first degenerate face instead of dropping it
};

namespace detail {

inline std::string_view next_token(std::string_view& line) {
    std::size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        line = {};
        return {};
    }
    std::size_t e = line.find_first_of(" \t\r", b);
    if (e == std::string_view::npos) e = line.size();
    std::string_view tok = line.substr(b, e - b);
    line.remove_prefix(e);
    return tok;
}

inline double parse_double(std::string_view tok, std::size_t line_no) {
    // from_chars rejects a leading '+'
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ConfigError("line " + std::to_string(line_no) + ": bad coordinate '" + std::string(tok) + "'");
    return v;
}

inline std::size_t resolve_index(std::string_view tok, std::size_t vertex_count, std::size_t line_no) {
    tok = tok.substr(0, tok.find('/'));
    long long idx = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ConfigError("line " + std::to_string(line_no) + ": bad vertex index '" + std::string(tok) + "'");
    long long resolved = idx > 0 ? idx - 1 : static_cast<long long>(vertex_count) + idx;
    if (idx == 0 || resolved < 0 || resolved >= static_cast<long long>(vertex_count))
        throw ConfigError("line " + std::to_string(line_no) + ": vertex index " + std::to_string(idx) +
                          " out of range (" + std::to_string(vertex_count) + " vertices defined)");
    return static_cast<std::size_t>(resolved);
}

}  // namespace detail

/// Parses OBJ text. Faces with more than three vertices are fan-triangulated around their
/// first vertex; triangle order follows the file.
template <typename Real = double>
Mesh<Real> parse_obj(std::istream& in, const std::string& source, LoadOptions opts = {}) {
    std::vector<Vec3<double>> vertices;
    std::vector<Triangle<Real>> tris;
    std::vector<std::size_t> dropped;
    std::vector<std::size_t> face;
    std::string line;
    std::size_t line_no = 0;
    std::size_t face_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view rest(line);
        std::string_view kind = detail::next_token(rest);
        if (kind == "v") {
            Vec3<double> p;
            for (int i = 0; i < 3; ++i) {
                std::string_view tok = detail::next_token(rest);
                if (tok.empty()) throw ConfigError("line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
                p[i] = detail::parse_double(tok, line_no);
            }
            vertices.push_back(p);
        } else if (kind == "f") {
            face.clear();
            for (std::string_view tok = detail::next_token(rest); !tok.empty(); tok = detail::next_token(rest))
                face.push_back(detail::resolve_index(tok, vertices.size(), line_no));
            if (face.size() < 3)
                throw ConfigError("line " + std::to_string(line_no) + ": face needs at least 3 vertices");
            for (std::size_t k = 1; k + 1 < face.size(); ++k) {
                auto tri = make_triangle(Vec3<Real>(vertices[face[0]]), Vec3<Real>(vertices[face[k]]),
                                         Vec3<Real>(vertices[face[k + 1]]));
                if (tri) {
                    tris.push_back(*tri);
                } else if (opts.strict) {
                    throw ConfigError("face " + std::to_string(face_no) + " (line " + std::to_string(line_no) +
                                      ") has zero area");
                } else if (dropped.empty() || dropped.back() != face_no) {
                    dropped.push_back(face_no);
                }
            }
            ++face_no;
        }
    }
    Mesh<Real> mesh = make_mesh(std::move(tris), source);
    mesh.dropped_faces = std::move(dropped);
    return mesh;
}

template <typename Real = double>
Mesh<Real> load_mesh(const std::filesystem::path& path, LoadOptions opts = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file '" + path.string() + "'");
    return parse_obj<Real>(in, path.string(), opts);
}

/// Writes the mesh as indexed OBJ; bitwise-identical vertex positions are shared.
template <typename Real>
void write_obj(const Mesh<Real>& mesh, std::ostream& out) {
    std::map<std::tuple<Real, Real, Real>, std::size_t> index;
    std::vector<const Vec3<Real>*> order;
    std::vector<std::array<std::size_t, 3>> faces;
    faces.reserve(mesh.triangles.size());
    for (const auto& t : mesh.triangles) {
        std::array<std::size_t, 3> f{};
        int k = 0;
        for (const auto* v : {&t.v0, &t.v1, &t.v2}) {
            auto [it, inserted] = index.try_emplace(std::make_tuple(v->x, v->y, v->z), order.size() + 1);
            if (inserted) order.push_back(v);
            f[k++] = it->second;
        }
        faces.push_back(f);
    }
    out << "# " << mesh.triangles.size() << " triangles\n" << std::setprecision(17);
    for (const auto* v : order) out << "v " << v->x << ' ' << v->y << ' ' << v->z << '\n';
    for (const auto& f : faces) out << "f " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
}

template <typename Real>
void write_obj(const Mesh<Real>& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    write_obj(mesh, out);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace sbr
