#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "sbr/error.hpp"
#include "sbr/geometry.hpp"

namespace sbr {

inline constexpr int kMaxIcosphereSubdivisions = 8;

/// Geodesic sphere: an icosahedron with each face split into four `subdivisions` times and
/// every vertex projected onto the sphere. Produces 20 * 4^s outward-facing triangles.
template <typename Real = double>
Mesh<Real> generate_icosphere(double radius, int subdivisions) {
    if (!(radius > 0) || !std::isfinite(radius)) throw ConfigError("icosphere radius must be positive");
    if (subdivisions < 0 || subdivisions > kMaxIcosphereSubdivisions)
        throw ConfigError("icosphere subdivisions must be in [0, " + std::to_string(kMaxIcosphereSubdivisions) + "]");

    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3d> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& v : verts) v = normalize(v);
    std::vector<std::array<std::uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};

    for (int level = 0; level < subdivisions; ++level) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            auto key = std::minmax(a, b);
            auto [it, inserted] = midpoint.try_emplace({key.first, key.second}, 0u);
            if (inserted) {
                it->second = static_cast<std::uint32_t>(verts.size());
                verts.push_back(normalize((verts[a] + verts[b]) * 0.5));
            }
            return it->second;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const std::uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    std::vector<Triangle<Real>> tris;
    tris.reserve(faces.size());
    for (const auto& f : faces) {
        Vec3d a = verts[f[0]] * radius, b = verts[f[1]] * radius, c = verts[f[2]] * radius;
        if (dot(cross(b - a, c - a), a + b + c) < 0) std::swap(b, c);
        auto tri = make_triangle(Vec3<Real>(a), Vec3<Real>(b), Vec3<Real>(c));
        if (!tri) throw NumericalError("icosphere produced a degenerate face; radius too small for the precision");
        tris.push_back(*tri);
    }
    return make_mesh(std::move(tris), "icosphere(r=" + std::to_string(radius) + ", s=" +
                                          std::to_string(subdivisions) + ")");
}

/// Largest distance between a flat facet and the sphere it approximates (facet sagitta).
template <typename Real>
double max_sagitta(const Mesh<Real>& sphere, double radius) {
    double worst = 0;
    for (const auto& t : sphere.triangles) {
        const double plane = std::abs(dot(Vec3d(t.normal), Vec3d(t.v0)));
        worst = std::max(worst, radius - plane);
    }
    return worst;
}

/// Square plate of side `side` in the z = 0 plane, centred on the origin, normal +z.
template <typename Real = double>
Mesh<Real> make_square_plate(double side) {
    const double h = side / 2;
    const Vec3<Real> a(-h, -h, 0), b(h, -h, 0), c(h, h, 0), d(-h, h, 0);
    return make_mesh(std::vector<Triangle<Real>>{*make_triangle(a, b, c), *make_triangle(a, c, d)},
                     "plate(a=" + std::to_string(side) + ")");
}

/// 90-degree dihedral: a floor plate z = 0 (x in [0, side]) and a wall plate x = 0
/// (z in [0, side]), both spanning y in [-side/2, side/2]. The open quadrant faces +x +z.
template <typename Real = double>
Mesh<Real> make_dihedral(double side) {
    const double h = side / 2;
    const Vec3<Real> o0(0, -h, 0), o1(0, h, 0);
    const Vec3<Real> f0(side, -h, 0), f1(side, h, 0);
    const Vec3<Real> w0(0, -h, side), w1(0, h, side);
    std::vector<Triangle<Real>> tris = {*make_triangle(o0, f0, f1), *make_triangle(o0, f1, o1),
                                        *make_triangle(o0, o1, w1), *make_triangle(o0, w1, w0)};
    return make_mesh(std::move(tris), "dihedral(a=" + std::to_string(side) + ")");
}

namespace detail {

/// Triangulates the parametric patch f(u, v) on an nu x nv grid over [0,1]^2. Degenerate
/// cells (poles, collapsed edges) are skipped.
template <typename Real, typename F>
void add_patch(std::vector<Triangle<Real>>& out, F&& f, int nu, int nv) {
    auto at = [&](int i, int j) { return Vec3<Real>(f(static_cast<double>(i) / nu, static_cast<double>(j) / nv)); };
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const auto a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            if (auto t = make_triangle(a, b, c)) out.push_back(*t);
            if (auto t = make_triangle(a, c, d)) out.push_back(*t);
        }
    }
}

/// Closed lens-shaped section: leading edge `le`, chord along +x, thickness along `up`.
inline Vec3d lens_point(const Vec3d& le, double chord, double thickness, const Vec3d& up, double v) {
    const double a = 2.0 * std::numbers::pi * v;
    return le + Vec3d{chord * 0.5 * (1.0 - std::cos(a)), 0, 0} + up * (0.5 * thickness * std::sin(a));
}

}  // namespace detail

/// Procedural airliner-like test target (about 70 m long, x forward-to-aft) with a fuselage of
/// revolution, swept wings, tail surfaces and four open engine nacelles. `detail` scales the
/// tessellation; detail = 1 gives roughly 1.5e5 triangles.
template <typename Real = double>
Mesh<Real> make_aircraft(int detail = 1) {
    if (detail < 1 || detail > 8) throw ConfigError("aircraft detail must be in [1, 8]");
    using std::numbers::pi;
    std::vector<Triangle<Real>> tris;
    const double length = 70.0, radius = 3.5;

    auto fuselage_radius = [&](double x) {
        if (x < 10.0) return radius * std::sqrt(std::max(0.0, 1.0 - std::pow((10.0 - x) / 10.0, 2)));
        if (x > 52.0) return radius - (radius - 0.6) * (x - 52.0) / (length - 52.0);
        return radius;
    };
    auto fuselage_centre = [&](double x) { return x > 52.0 ? 2.4 * (x - 52.0) / (length - 52.0) : 0.0; };
    detail::add_patch(tris, [&](double u, double v) {
        const double x = length * u, r = fuselage_radius(x), a = 2.0 * pi * v;
        return Vec3d{x, r * std::cos(a), fuselage_centre(x) + r * std::sin(a)};
    }, 400 * detail, 128 * detail);
    detail::add_patch(tris, [&](double u, double v) {  // tail cap
        const double r = fuselage_radius(length) * (1.0 - u), a = 2.0 * pi * v;
        return Vec3d{length, r * std::cos(a), fuselage_centre(length) + r * std::sin(a)};
    }, 2, 32 * detail);

    const Vec3d up{0, 0, 1};
    // wing(side): root at the fuselage, swept and with dihedral toward the tip
    auto lifting_surface = [&](double root_x, double root_y, double root_z, double root_chord, double span,
                               double sweep, double tip_chord, double rise, double root_t, double tip_t, int side,
                               int nu, int nv) {
        auto section = [=](double u) {
            return std::tuple{Vec3d{root_x + sweep * u, side * (root_y + span * u), root_z + rise * u},
                              root_chord + (tip_chord - root_chord) * u, root_t + (tip_t - root_t) * u};
        };
        detail::add_patch(tris, [=](double u, double v) {
            const auto [le, chord, t] = section(u);
            return detail::lens_point(le, chord, t, up, v);
        }, nu, nv);
        detail::add_patch(tris, [=](double u, double v) {  // tip cap
            const auto [le, chord, t] = section(1.0);
            const Vec3d mid = le + Vec3d{chord * 0.5, 0, 0};
            return mid + (detail::lens_point(le, chord, t, up, v) - mid) * (1.0 - u);
        }, 1, nv);
    };
    for (int side : {-1, 1}) {
        lifting_surface(24.0, 2.5, -1.8, 16.0, 37.0, 18.0, 4.0, 2.5, 1.4, 0.3, side, 120 * detail, 64 * detail);
        lifting_surface(58.0, 1.0, 2.0, 7.0, 10.0, 6.0, 2.5, 1.0, 0.6, 0.15, side, 40 * detail, 32 * detail);
    }
    // vertical fin: lens sections stacked along z
    detail::add_patch(tris, [&](double u, double v) {
        const Vec3d le{55.0 + 10.0 * u, 0, 3.0 + 12.0 * u};
        const double chord = 12.0 - 8.0 * u, t = 0.8 - 0.5 * u, a = 2.0 * pi * v;
        return le + Vec3d{chord * 0.5 * (1.0 - std::cos(a)), 0.5 * t * std::sin(a), 0};
    }, 60 * detail, 32 * detail);

    // open nacelles under the wings
    for (double y : {-21.0, -11.0, 11.0, 21.0}) {
        const double x0 = 20.0 + 0.5 * std::abs(y) - 6.0;
        detail::add_patch(tris, [&](double u, double v) {
            const double a = 2.0 * pi * v;
            return Vec3d{x0 + 6.0 * u, y + 1.5 * std::cos(a), -4.2 + 1.5 * std::sin(a)};
        }, 24 * detail, 48 * detail);
    }
    return make_mesh(std::move(tris), "aircraft(detail=" + std::to_string(detail) + ")");
}

}  // namespace sbr
