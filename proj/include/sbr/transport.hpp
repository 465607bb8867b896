#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "sbr/bvh.hpp"
#include "sbr/error.hpp"
#include "sbr/geometry.hpp"
#include "sbr/parallel.hpp"

namespace sbr {

/// Incidence angles and the propagation direction they imply. The wave travels from the
/// source at (theta, phi) toward the origin: k_inc = -(sin t cos p, sin t sin p, cos t).
struct IncidentDirection {
    double theta = 0;  // elevation from +z, radians
    double phi = 0;    // azimuth from +x, radians
    Vec3d k_inc{0, 0, -1};

    static IncidentDirection from_angles(double theta, double phi) {
        const double st = std::sin(theta);
        return {theta, phi, Vec3d{-st * std::cos(phi), -st * std::sin(phi), -std::cos(theta)}};
    }
};

/// Aperture basis (u, v) for a propagation direction k. The seed is the world axis least
/// aligned with k (ties x, then y, then z); u = normalize(seed x k), v = k x u, so u x v = k.
inline std::pair<Vec3d, Vec3d> orthonormal_basis(const Vec3d& k) {
    int axis = 0;
    const double ax = std::abs(k.x), ay = std::abs(k.y), az = std::abs(k.z);
    if (ay < ax && ay <= az) axis = 1;
    if (az < ax && az < ay) axis = 2;
    Vec3d seed;
    seed[static_cast<std::size_t>(axis)] = 1.0;
    const Vec3d u = normalize(cross(seed, k));
    return {u, cross(k, u)};
}

/// Orthographic launch grid. Ray (i, j) starts at corner + (i + 1/2) ds u + (j + 1/2) ds v
/// and travels along k. Each ray stands for a tube of area ds^2.
struct ApertureGrid {
    Vec3d u, v, k;
    Vec3d corner;
    double spacing = 0;
    std::size_t nu = 0, nv = 0;
    double cell_area = 0;
    double standoff = 0;
    double margin = 0;
    double extent_u = 0, extent_v = 0;  // unpadded projected extents

    std::size_t ray_count() const { return nu * nv; }

    Vec3d ray_origin(std::size_t i, std::size_t j) const {
        return corner + u * ((static_cast<double>(i) + 0.5) * spacing) +
               v * ((static_cast<double>(j) + 0.5) * spacing);
    }
};

/// ceil() that ignores representation noise of a few ulps above an integer (e.g. 1/0.01).
inline std::size_t cell_count(double length, double spacing) {
    const double x = length / spacing;
    const double n = std::ceil(x * (1.0 - 1e-12));
    return n < 1.0 ? 1 : static_cast<std::size_t>(n);
}

/// Sizes the grid to cover the projection of the eight box corners, padded by (1 + margin),
/// centred on the projected box and placed one box diagonal behind it along -k.
template <typename Real>
ApertureGrid build_aperture(const Aabb<Real>& box, const IncidentDirection& dir, double spacing, double margin) {
    if (!(spacing > 0) || !std::isfinite(spacing)) throw ConfigError("ray spacing must be positive");
    if (!(margin >= 0)) throw ConfigError("aperture margin must be non-negative");
    if (box.empty()) throw ConfigError("aperture needs a non-empty bounding box");

    ApertureGrid g;
    g.k = dir.k_inc;
    std::tie(g.u, g.v) = orthonormal_basis(g.k);

    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin, kmin = umin;
    for (int c = 0; c < 8; ++c) {
        const Vec3d p(box.corner(c));
        const double pu = dot(p, g.u), pv = dot(p, g.v), pk = dot(p, g.k);
        umin = std::min(umin, pu);
        umax = std::max(umax, pu);
        vmin = std::min(vmin, pv);
        vmax = std::max(vmax, pv);
        kmin = std::min(kmin, pk);
    }
    g.extent_u = umax - umin;
    g.extent_v = vmax - vmin;
    g.spacing = spacing;
    g.margin = margin;
    g.nu = cell_count((1.0 + margin) * g.extent_u, spacing);
    g.nv = cell_count((1.0 + margin) * g.extent_v, spacing);
    g.cell_area = spacing * spacing;
    g.standoff = static_cast<double>(box.diagonal());

    const double cu = 0.5 * (umin + umax), cv = 0.5 * (vmin + vmax);
    g.corner = g.u * (cu - 0.5 * spacing * static_cast<double>(g.nu)) +
               g.v * (cv - 0.5 * spacing * static_cast<double>(g.nv)) + g.k * (kmin - g.standoff);
    return g;
}

struct SamplingCheck {
    bool ok;
    double ratio;  // spacing * factor / lambda; ok iff <= 1
};

/// Passes iff spacing <= lambda / factor (inclusive).
inline SamplingCheck sampling_check(double spacing, double lambda, double factor = 5.0) {
    return {spacing <= lambda / factor, spacing * factor / lambda};
}

template <typename Real>
Vec3<Real> reflect(const Vec3<Real>& d, const Vec3<Real>& n) {
    return d - n * (Real(2) * dot(d, n));
}

struct TraceParams {
    int max_bounces = 10;            // B_max
    double epsilon = 1e-6;           // origin offset along the hit normal, metres
    bool strict_orientation = false;  // drop rays whose first hit is a back face
};

inline void validate(const TraceParams& p) {
    if (p.max_bounces < 1 || p.max_bounces > 65535) throw ConfigError("max bounces must be in [1, 65535]");
    if (!(p.epsilon > 0)) throw ConfigError("epsilon must be positive");
}

/// Per-ray result of the transport stage. `path` is the summed segment length over all bounces;
/// `return_path` is the distance from the last hit point back to the launch plane along -k,
/// which closes the round trip for the phase term. `slope_u`/`slope_v` are the derivatives of
/// the round-trip path with respect to the launch position along u and v, used to integrate the
/// phase across the ray tube.
template <typename Real>
struct HitRecord {
    Vec3<Real> normal{};     // oriented normal at the first hit
    Real path = 0;           // R
    Real return_path = 0;
    Real slope_u = 0;
    Real slope_v = 0;
    std::uint16_t bounces = 0;  // N
    bool valid = false;
    bool trapped = false;    // exhausted B_max and the next segment still hits the target

    friend bool operator==(const HitRecord&, const HitRecord&) = default;
};

/// Transverse axes of the tube a ray stands for.
template <typename Real>
struct TubeAxes {
    Vec3<Real> u, v;

    static TubeAxes from_direction(const Vec3<Real>& dir) {
        const auto [u, v] = orthonormal_basis(Vec3d(dir));
        return {Vec3<Real>(u), Vec3<Real>(v)};
    }
};

/// Follows one ray through up to B_max specular reflections.
template <typename Real>
HitRecord<Real> trace_ray(const Bvh<Real>& bvh, const Vec3<Real>& origin, const Vec3<Real>& dir,
                          const TraceParams& params, const TubeAxes<Real>& axes, TraversalStats* stats = nullptr) {
    HitRecord<Real> rec;
    const Real eps = static_cast<Real>(params.epsilon);
    constexpr Real inf = std::numeric_limits<Real>::infinity();
    Vec3<Real> o = origin;
    Vec3<Real> d = dir;
    Vec3<Real> last_hit = origin;
    Vec3<Real> last_normal = dir;
    Vec3<Real> last_in = dir;
    Vec3<Real> au = axes.u, av = axes.v;  // tube axes carried through the reflections
    Vec3<Real> last_au = au, last_av = av;
    bool escaped = false;

    for (int b = 0; b < params.max_bounces; ++b) {
        const auto hit = closest_hit(bvh, o, d, Real(0), inf, stats);
        if (!hit) {
            escaped = true;
            break;
        }
        const Vec3<Real> x = o + d * hit->t;
        Vec3<Real> n = hit->normal;
        if (dot(n, d) > Real(0)) {
            if (rec.bounces == 0 && params.strict_orientation) return HitRecord<Real>{};
            n = -n;
        }
        rec.path += hit->t;
        ++rec.bounces;
        if (rec.bounces == 1) {
            rec.normal = n;
            rec.valid = true;
        }
        last_hit = x;
        last_normal = n;
        last_in = d;
        last_au = au;
        last_av = av;
        d = reflect(d, n);
        au = reflect(au, n);
        av = reflect(av, n);
        o = x + n * eps;
    }

    if (rec.valid) {
        rec.return_path = dot(last_hit - origin, dir);
        // Displacing the launch point by du along u moves the last hit point by
        // du * (au + beta d_in) within the last facet; the round-trip path changes by
        // (d_in + k) . dx there.
        const Real ndi = dot(last_normal, last_in);
        const Vec3<Real> lever = last_in + dir;
        if (ndi != Real(0)) {
            rec.slope_u = dot(lever, last_au - last_in * (dot(last_normal, last_au) / ndi));
            rec.slope_v = dot(lever, last_av - last_in * (dot(last_normal, last_av) / ndi));
        } else {
            rec.slope_u = rec.slope_v = inf;
        }
        if (!escaped) rec.trapped = closest_hit(bvh, o, d, Real(0), inf, stats).has_value();
    }
    return rec;
}

template <typename Real>
HitRecord<Real> trace_ray(const Bvh<Real>& bvh, const Vec3<Real>& origin, const Vec3<Real>& dir,
                          const TraceParams& params, TraversalStats* stats = nullptr) {
    return trace_ray(bvh, origin, dir, params, TubeAxes<Real>::from_direction(dir), stats);
}

/// Traces every ray of the grid; record i * nv + j belongs to ray (i, j). Each record is
/// computed independently, so the output is identical for any worker count.
template <typename Real>
std::vector<HitRecord<Real>> trace_grid(const Bvh<Real>& bvh, const ApertureGrid& grid, const TraceParams& params,
                                        unsigned workers = 1) {
    validate(params);
    std::vector<HitRecord<Real>> records(grid.ray_count());
    const Vec3<Real> dir(grid.k);
    const TubeAxes<Real> axes{Vec3<Real>(grid.u), Vec3<Real>(grid.v)};
    parallel_for(grid.nu, workers, [&](std::size_t i) {
        for (std::size_t j = 0; j < grid.nv; ++j)
            records[i * grid.nv + j] = trace_ray(bvh, Vec3<Real>(grid.ray_origin(i, j)), dir, params, axes);
    });
    return records;
}

/// Diagnostic CSV of hit records: i,j,valid,nx,ny,nz,R,N.
template <typename Real>
void dump_hits(std::span<const HitRecord<Real>> records, const ApertureGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "i,j,valid,nx,ny,nz,R,N\n";
    out.precision(9);
    for (std::size_t i = 0; i < grid.nu; ++i) {
        for (std::size_t j = 0; j < grid.nv; ++j) {
            const auto& r = records[i * grid.nv + j];
            out << i << ',' << j << ',' << (r.valid ? 1 : 0) << ',' << r.normal.x << ',' << r.normal.y << ','
                << r.normal.z << ',' << r.path << ',' << r.bounces << '\n';
        }
    }
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace sbr
