#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbr/error.hpp"
#include "sbr/mie.hpp"
#include "sbr/sweep.hpp"

namespace sbr {

/// %.9g, which prints "-inf" for the zero-sigma sentinel.
inline std::string format_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

inline void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (out.fail()) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace detail

/// One row per cell, theta outer. time_ms is written as 0 unless `with_timing` is set, so that
/// identical runs give identical bytes; real timings always go to the metadata file.
inline void write_csv(const SweepResult& r, std::ostream& out, bool with_timing = false) {
    out << "theta_deg,phi_deg,sigma_m2,sigma_dbsm,valid_rays,max_bounces_seen,time_ms\n";
    for (std::size_t it = 0; it < r.theta_deg.size(); ++it) {
        for (std::size_t ip = 0; ip < r.phi_deg.size(); ++ip) {
            const SweepCell& c = r.at(it, ip);
            out << format_g9(r.theta_deg[it]) << ',' << format_g9(r.phi_deg[ip]) << ',' << format_g9(c.sigma) << ','
                << format_g9(c.dbsm) << ',' << c.valid_rays << ',' << c.max_bounces_seen << ','
                << format_g9(with_timing ? c.time_ms : 0.0) << '\n';
        }
    }
}

inline void write_csv(const SweepResult& r, const std::filesystem::path& path, bool with_timing = false) {
    auto out = detail::open_out(path);
    write_csv(r, out, with_timing);
    detail::close_out(out, path);
}

// ---------------------------------------------------------------------------------------------
// Heatmap.
//
// Colormap: piecewise linear through five stops at t = 0, 1/4, 1/2, 3/4, 1
//   (0,0,4)  (87,16,110)  (188,55,84)  (249,142,9)  (252,255,164)
// where t = (clamp(dbsm, floor, ceil) - floor) / (ceil - floor). -inf maps to t = 0.

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr std::array<Rgb, 5> kColormapStops{{
    {0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}}};

inline Rgb colormap(double t) {
    if (!(t > 0)) return kColormapStops.front();
    if (t >= 1) return kColormapStops.back();
    const double x = t * (kColormapStops.size() - 1);
    const auto i = static_cast<std::size_t>(x);
    const double f = x - static_cast<double>(i);
    Rgb c{};
    for (std::size_t ch = 0; ch < 3; ++ch) {
        const double a = kColormapStops[i][ch], b = kColormapStops[i + 1][ch];
        c[ch] = static_cast<std::uint8_t>(std::lround(a + (b - a) * f));
    }
    return c;
}

inline Rgb dbsm_color(double dbsm, double db_floor, double db_ceil) {
    const double v = std::clamp(dbsm, db_floor, db_ceil);  // -inf clamps to the floor
    return colormap((v - db_floor) / (db_ceil - db_floor));
}

/// Binary PPM (P6), width N_phi, height N_theta; phi increases to the right, theta downward.
inline void write_heatmap(const SweepResult& r, const std::filesystem::path& path, double db_floor, double db_ceil) {
    if (!(db_floor < db_ceil)) throw ConfigError("heatmap needs db_floor < db_ceil");
    if (r.cells.size() != r.theta_deg.size() * r.phi_deg.size() || r.cells.empty())
        throw ConfigError("heatmap needs a populated result");
    auto out = detail::open_out(path, true);
    out << "P6\n" << r.phi_deg.size() << ' ' << r.theta_deg.size() << "\n255\n";
    for (std::size_t it = 0; it < r.theta_deg.size(); ++it) {
        for (std::size_t ip = 0; ip < r.phi_deg.size(); ++ip) {
            const Rgb c = dbsm_color(r.at(it, ip).dbsm, db_floor, db_ceil);
            out.write(reinterpret_cast<const char*>(c.data()), 3);
        }
    }
    detail::close_out(out, path);
}

/// Default heatmap range: [max - 60 dB, max] over the finite cells.
inline std::pair<double, double> default_db_range(const SweepResult& r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& c : r.cells)
        if (std::isfinite(c.dbsm)) hi = std::max(hi, c.dbsm);
    if (!std::isfinite(hi)) hi = 0;
    return {hi - 60.0, hi};
}

// ---------------------------------------------------------------------------------------------
// Run metadata.

inline nlohmann::json metadata_json(const SweepResult& r) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(r.mesh_checksum));
    j["mesh_checksum"] = hex;
    j["triangles"] = r.triangle_count;
    j["dropped_faces"] = r.dropped_faces;
    j["wavelength_m"] = r.wavelength;
    j["spacing_m"] = r.spacing;
    j["epsilon_m"] = r.epsilon;
    j["sampling"] = {{"ok", r.sampling.ok}, {"ratio", r.sampling.ratio}};
    j["bvh"] = {{"nodes", r.bvh_stats.node_count},
                {"leaves", r.bvh_stats.leaf_count},
                {"max_depth", r.bvh_stats.max_depth},
                {"build_ms", r.bvh_build_ms}};
    j["theta_samples"] = r.theta_deg.size();
    j["phi_samples"] = r.phi_deg.size();
    auto& cells = j["cells"] = nlohmann::json::array();
    for (std::size_t it = 0; it < r.theta_deg.size(); ++it) {
        for (std::size_t ip = 0; ip < r.phi_deg.size(); ++ip) {
            const SweepCell& c = r.at(it, ip);
            cells.push_back({{"theta_deg", r.theta_deg[it]},
                             {"phi_deg", r.phi_deg[ip]},
                             {"re_a", c.amplitude.real()},
                             {"im_a", c.amplitude.imag()},
                             {"rays", c.ray_count},
                             {"valid_rays", c.valid_rays},
                             {"max_bounces_seen", c.max_bounces_seen},
                             {"mean_bounces", c.mean_bounces},
                             {"time_ms", c.time_ms}});
        }
    }
    return j;
}

inline void write_metadata(const SweepResult& r, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    out << metadata_json(r).dump(2) << '\n';
    detail::close_out(out, path);
}

// ---------------------------------------------------------------------------------------------
// Validation and Mie tables.

inline void write_validation_csv(const ValidationReport& rep, std::ostream& out) {
    out << "kr,wavelength_m,spacing_m,subdivisions,triangles,sigma_sbr_m2,sigma_mie_m2,rel_error,dir_min_m2,"
           "dir_max_m2,sampling_ok,sampling_ratio\n";
    for (const auto& r : rep.rows) {
        out << format_g9(r.kr) << ',' << format_g9(r.wavelength) << ',' << format_g9(r.spacing) << ','
            << r.subdivisions << ',' << r.triangles << ',' << format_g9(r.sigma_sbr) << ',' << format_g9(r.sigma_mie)
            << ',' << format_g9(r.rel_error) << ',' << format_g9(r.dir_min) << ',' << format_g9(r.dir_max) << ','
            << (r.sampling.ok ? 1 : 0) << ',' << format_g9(r.sampling.ratio) << '\n';
    }
}

inline void write_validation_csv(const ValidationReport& rep, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    write_validation_csv(rep, out);
    detail::close_out(out, path);
}

/// kr sampled logarithmically from kr_min to kr_max inclusive.
inline std::vector<double> log_samples(double lo, double hi, int n) {
    if (!(lo > 0) || !(hi >= lo) || n < 1) throw ConfigError("need 0 < kr_min <= kr_max and samples >= 1");
    std::vector<double> v;
    for (int i = 0; i < n; ++i)
        v.push_back(n == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1)));
    return v;
}

inline void write_mie_csv(double radius, const std::vector<double>& kr, std::ostream& out) {
    out << "kr,sigma_m2,sigma_over_pir2\n";
    for (double x : kr) {
        const double s = mie_backscatter_pec(x, radius);
        out << format_g9(x) << ',' << format_g9(s) << ',' << format_g9(s / (std::numbers::pi * radius * radius))
            << '\n';
    }
}

inline void write_mie_csv(double radius, const std::vector<double>& kr, const std::filesystem::path& path) {
    auto out = detail::open_out(path);
    write_mie_csv(radius, kr, out);
    detail::close_out(out, path);
}

}  // namespace sbr
