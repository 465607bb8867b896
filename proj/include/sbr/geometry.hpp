#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "sbr/error.hpp"
#include "sbr/vec3.hpp"

namespace sbr {

template <typename Real>
struct Aabb {
    Vec3<Real> min{std::numeric_limits<Real>::infinity(), std::numeric_limits<Real>::infinity(),
                   std::numeric_limits<Real>::infinity()};
    Vec3<Real> max{-std::numeric_limits<Real>::infinity(), -std::numeric_limits<Real>::infinity(),
                   -std::numeric_limits<Real>::infinity()};

    bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }

    void grow(const Vec3<Real>& p) {
        min = sbr::min(min, p);
        max = sbr::max(max, p);
    }

    void grow(const Aabb& b) {
        min = sbr::min(min, b.min);
        max = sbr::max(max, b.max);
    }

    Vec3<Real> extent() const { return max - min; }
    Vec3<Real> center() const { return (min + max) * Real(0.5); }
    Real diagonal() const { return length(extent()); }

    Real surface_area() const {
        if (empty()) return Real(0);
        const Vec3<Real> e = extent();
        return Real(2) * (e.x * e.y + e.y * e.z + e.z * e.x);
    }

    /// Index of the longest axis; ties resolve to the lower index.
    int longest_axis() const {
        const Vec3<Real> e = extent();
        if (e.x >= e.y && e.x >= e.z) return 0;
        return e.y >= e.z ? 1 : 2;
    }

    bool contains(const Vec3<Real>& p, Real slack = Real(0)) const {
        return p.x >= min.x - slack && p.x <= max.x + slack && p.y >= min.y - slack &&
               p.y <= max.y + slack && p.z >= min.z - slack && p.z <= max.z + slack;
    }

    bool contains(const Aabb& b, Real slack = Real(0)) const {
        return contains(b.min, slack) && contains(b.max, slack);
    }

    Vec3<Real> corner(int i) const {
        return {(i & 1) ? max.x : min.x, (i & 2) ? max.y : min.y, (i & 4) ? max.z : min.z};
    }

    friend bool operator==(const Aabb&, const Aabb&) = default;
};

template <typename Real>
struct Triangle {
    Vec3<Real> v0, v1, v2;
    Vec3<Real> normal;  // unit geometric normal, right-hand rule over (v0, v1, v2)

    Vec3<Real> centroid() const { return (v0 + v1 + v2) / Real(3); }
    Real area() const { return Real(0.5) * length(cross(v1 - v0, v2 - v0)); }

    Aabb<Real> bounds() const {
        Aabb<Real> b;
        b.grow(v0);
        b.grow(v1);
        b.grow(v2);
        return b;
    }
};

/// Builds a triangle with its geometric normal, or nothing if the triangle has zero area.
template <typename Real>
std::optional<Triangle<Real>> make_triangle(const Vec3<Real>& v0, const Vec3<Real>& v1,
                                            const Vec3<Real>& v2) {
    const Vec3<Real> e1 = v1 - v0;
    const Vec3<Real> e2 = v2 - v0;
    const Vec3<Real> c = cross(e1, e2);
    const Real len = length(c);
    const Real scale = length(e1) * length(e2);
    if (!(len > Real(0)) || !std::isfinite(len) || len <= scale * std::numeric_limits<Real>::epsilon())
        return std::nullopt;
    return Triangle<Real>{v0, v1, v2, c / len};
}

template <typename Real>
struct Mesh {
    std::vector<Triangle<Real>> triangles;
    Aabb<Real> aabb;
    std::string source;                    // file path or generator description
    std::vector<std::size_t> dropped_faces;  // face records rejected as degenerate

    std::size_t size() const { return triangles.size(); }
};

template <typename Real>
Aabb<Real> bounds_of(std::span<const Triangle<Real>> tris) {
    Aabb<Real> b;
    for (const auto& t : tris) b.grow(t.bounds());
    return b;
}

template <typename Real>
Mesh<Real> make_mesh(std::vector<Triangle<Real>> tris, std::string source = {}) {
    if (tris.empty()) throw ConfigError("mesh '" + source + "' contains no triangles");
    Mesh<Real> m;
    m.aabb = bounds_of<Real>(tris);
    m.triangles = std::move(tris);
    m.source = std::move(source);
    return m;
}

/// Converts a mesh between scalar types. Triangles that collapse in the target precision are dropped.
template <typename To, typename From>
Mesh<To> mesh_cast(const Mesh<From>& in) {
    if constexpr (std::is_same_v<To, From>) {
        return in;
    } else {
        std::vector<Triangle<To>> tris;
        tris.reserve(in.triangles.size());
        for (const auto& t : in.triangles) {
            if (auto c = make_triangle(Vec3<To>(t.v0), Vec3<To>(t.v1), Vec3<To>(t.v2))) tris.push_back(*c);
        }
        Mesh<To> out = make_mesh(std::move(tris), in.source);
        out.dropped_faces = in.dropped_faces;
        return out;
    }
}

/// FNV-1a over the raw vertex coordinates, stable for identical meshes.
template <typename Real>
std::uint64_t mesh_checksum(const Mesh<Real>& mesh) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](double v) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(&v);
        for (std::size_t i = 0; i < sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    };
    for (const auto& t : mesh.triangles) {
        for (const auto* v : {&t.v0, &t.v1, &t.v2}) {
            feed(static_cast<double>(v->x));
            feed(static_cast<double>(v->y));
            feed(static_cast<double>(v->z));
        }
    }
    return h;
}

template <typename Real>
struct TriangleHit {
    Real t;
    Vec3<Real> normal;
};

/// Moller-Trumbore test with inclusive edges. Returns the hit if t lies in (t_min, t_max].
/// The barycentric bounds are widened by a bound on their rounding error, so a ray through a
/// shared edge or vertex hits at least one of the adjacent triangles.
template <typename Real>
std::optional<TriangleHit<Real>> ray_triangle_intersect(const Vec3<Real>& origin, const Vec3<Real>& dir,
                                                        const Triangle<Real>& tri, Real t_min, Real t_max) {
    constexpr Real eps = std::numeric_limits<Real>::epsilon();
    const auto absdot = [](const Vec3<Real>& a, const Vec3<Real>& b) {
        return std::abs(a.x * b.x) + std::abs(a.y * b.y) + std::abs(a.z * b.z);
    };
    const Vec3<Real> e1 = tri.v1 - tri.v0;
    const Vec3<Real> e2 = tri.v2 - tri.v0;
    const Vec3<Real> p = cross(dir, e2);
    const Real det = dot(e1, p);
    if (det == Real(0) || !std::isfinite(det)) return std::nullopt;
    const Real inv_det = Real(1) / det;
    const Real abs_inv = std::abs(inv_det);
    const Real det_err = absdot(e1, p);
    const Vec3<Real> s = origin - tri.v0;
    const Real u = dot(s, p) * inv_det;
    const Real tol_u = Real(8) * eps * (absdot(s, p) + det_err * (std::abs(u) + Real(1))) * abs_inv;
    if (u < -tol_u || u > Real(1) + tol_u) return std::nullopt;
    const Vec3<Real> q = cross(s, e1);
    const Real v = dot(dir, q) * inv_det;
    const Real tol_v = Real(8) * eps * (absdot(dir, q) + det_err * (std::abs(v) + Real(1))) * abs_inv;
    if (v < -tol_v || u + v > Real(1) + tol_u + tol_v) return std::nullopt;
    const Real t = dot(e2, q) * inv_det;
    if (!(t > t_min) || t > t_max) return std::nullopt;
    return TriangleHit<Real>{t, tri.normal};
}

template <typename Real>
Vec3<Real> reciprocal(const Vec3<Real>& d) {
    return {Real(1) / d.x, Real(1) / d.y, Real(1) / d.z};
}

/// Slab test over the segment [0, t_max]. Returns the entry distance (clamped to 0) on overlap.
/// The far bound is widened by a few ulps so that any triangle hit inside the box is never culled.
template <typename Real>
std::optional<Real> ray_aabb_intersect(const Vec3<Real>& origin, const Vec3<Real>& dir_inv, const Aabb<Real>& box,
                                       Real t_max) {
    constexpr Real eps = std::numeric_limits<Real>::epsilon();
    constexpr Real widen = Real(1) + Real(2) * (Real(3) * eps) / (Real(1) - Real(3) * eps);
    Real t_near = Real(0);
    Real t_far = t_max * widen;
    for (int axis = 0; axis < 3; ++axis) {
        const Real o = origin[axis];
        const Real inv = dir_inv[axis];
        if (std::isinf(inv)) {
            if (o < box.min[axis] || o > box.max[axis]) return std::nullopt;
            continue;
        }
        Real t0 = (box.min[axis] - o) * inv;
        Real t1 = (box.max[axis] - o) * inv;
        if (t0 > t1) std::swap(t0, t1);
        t1 *= widen;
        t_near = t0 > t_near ? t0 : t_near;
        t_far = t1 < t_far ? t1 : t_far;
        if (t_near > t_far) return std::nullopt;
    }
    return t_near;
}

}  // namespace sbr
