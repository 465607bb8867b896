#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbr/bvh.hpp"
#include "sbr/error.hpp"
#include "sbr/geometry.hpp"
#include "sbr/mie.hpp"
#include "sbr/obj.hpp"
#include "sbr/parallel.hpp"
#include "sbr/po.hpp"
#include "sbr/shapes.hpp"
#include "sbr/transport.hpp"

namespace sbr {

enum class Precision { Single, Double };

/// Inclusive linear range of `samples` angles in degrees.
struct AngleRange {
    double start = 0;
    double stop = 0;
    int samples = 1;

    double at(int i) const {
        return samples == 1 ? start : start + (stop - start) * static_cast<double>(i) / (samples - 1);
    }
};

struct SweepConfig {
    std::string mesh_path;
    double frequency = 0;                // Hz
    AngleRange theta{0, 0, 1};           // degrees, within [0, 180]
    AngleRange phi{0, 0, 1};             // degrees, within [0, 360]
    std::optional<double> spacing;       // metres; unset = lambda / sampling_factor
    double sampling_factor = 5.0;
    double margin = 0.025;               // eta
    int max_bounces = 10;
    double epsilon_relative = 1e-6;      // epsilon = this * mesh AABB diagonal
    std::optional<double> epsilon;       // absolute override, metres
    BuildParams bvh;
    double gamma = -1.0;
    PhaseModel phase = PhaseModel::RoundTrip;
    bool tube_integration = true;
    Precision precision = Precision::Double;
    unsigned workers = 1;
    bool workers_from_config = false;    // set when the JSON names a worker count
    bool allow_aliasing = false;
    bool count_trapped = false;
    bool strict_orientation = false;
    bool strict_mesh = false;
    std::string out_csv;
    std::string heatmap;
    std::string dump_hits;               // directory for per-angle hit CSVs
    std::optional<double> db_floor, db_ceil;

    double wavelength() const { return kSpeedOfLight / frequency; }
    double resolved_spacing() const { return spacing ? *spacing : wavelength() / sampling_factor; }
};

inline void validate(const SweepConfig& c) {
    if (!(c.frequency > 0) || !std::isfinite(c.frequency)) throw ConfigError("frequency must be positive");
    if (c.theta.samples < 1 || c.phi.samples < 1) throw ConfigError("angle ranges need at least one sample");
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    if (!in(c.theta.start, 0, 180) || !in(c.theta.stop, 0, 180)) throw ConfigError("theta must lie in [0, 180] deg");
    if (!in(c.phi.start, 0, 360) || !in(c.phi.stop, 0, 360)) throw ConfigError("phi must lie in [0, 360] deg");
    if (c.spacing && !(*c.spacing > 0)) throw ConfigError("spacing must be positive");
    if (!(c.sampling_factor > 0)) throw ConfigError("sampling factor must be positive");
    if (!(c.margin >= 0)) throw ConfigError("margin must be non-negative");
    if (!(c.epsilon_relative > 0) || (c.epsilon && !(*c.epsilon > 0))) throw ConfigError("epsilon must be positive");
    if (std::abs(c.gamma) > 1.0) throw ConfigError("|gamma| must not exceed 1");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    if (c.db_floor && c.db_ceil && !(*c.db_floor < *c.db_ceil)) throw ConfigError("db_floor must be below db_ceil");
    validate(c.bvh);
    validate(TraceParams{c.max_bounces, 1.0, false});
}

// ---------------------------------------------------------------------------------------------
// JSON configuration. Keys mirror SweepConfig; angles are given in degrees.

namespace detail {

inline SplitRule parse_split(const std::string& s) {
    if (s == "median") return SplitRule::Median;
    if (s == "sah") return SplitRule::BinnedSah;
    throw ConfigError("unknown split rule '" + s + "' (median|sah)");
}

inline const char* split_name(SplitRule r) { return r == SplitRule::Median ? "median" : "sah"; }

inline AngleRange parse_range(const nlohmann::json& j, const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object {start, stop, samples}");
    for (const auto& [key, _] : j.items())
        if (key != "start" && key != "stop" && key != "samples")
            throw ConfigError("unknown key '" + key + "' in " + what);
    AngleRange r;
    r.start = j.value("start", 0.0);
    r.stop = j.value("stop", r.start);
    r.samples = j.value("samples", 1);
    return r;
}

}  // namespace detail

inline SweepConfig parse_config(const nlohmann::json& j) {
    static const std::vector<std::string> known = {
        "mesh", "frequency_hz", "theta_deg", "phi_deg", "spacing_m", "sampling_factor", "margin", "max_bounces",
        "epsilon_relative", "epsilon_m", "split", "leaf_size", "bins_per_axis", "traversal_cost",
        "intersection_cost", "max_depth", "gamma", "phase_model", "tube_integration", "precision", "workers",
        "allow_aliasing", "count_trapped", "strict_orientation", "strict_mesh", "out", "heatmap", "dump_hits",
        "db_floor", "db_ceil"};
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");

    SweepConfig c;
    try {
        c.mesh_path = j.value("mesh", std::string{});
        c.frequency = j.value("frequency_hz", 0.0);
        if (j.contains("theta_deg")) c.theta = detail::parse_range(j["theta_deg"], "theta_deg");
        if (j.contains("phi_deg")) c.phi = detail::parse_range(j["phi_deg"], "phi_deg");
        if (j.contains("spacing_m")) {
            const auto& s = j["spacing_m"];
            if (s.is_string()) {
                if (s.get<std::string>() != "auto") throw ConfigError("spacing_m must be a number or \"auto\"");
            } else {
                c.spacing = s.get<double>();
            }
        }
        c.sampling_factor = j.value("sampling_factor", c.sampling_factor);
        c.margin = j.value("margin", c.margin);
        c.max_bounces = j.value("max_bounces", c.max_bounces);
        c.epsilon_relative = j.value("epsilon_relative", c.epsilon_relative);
        if (j.contains("epsilon_m")) c.epsilon = j["epsilon_m"].get<double>();
        if (j.contains("split")) c.bvh.split_rule = detail::parse_split(j["split"].get<std::string>());
        c.bvh.leaf_size = j.value("leaf_size", c.bvh.leaf_size);
        c.bvh.bins_per_axis = j.value("bins_per_axis", c.bvh.bins_per_axis);
        c.bvh.traversal_cost = j.value("traversal_cost", c.bvh.traversal_cost);
        c.bvh.intersection_cost = j.value("intersection_cost", c.bvh.intersection_cost);
        c.bvh.max_depth = j.value("max_depth", c.bvh.max_depth);
        c.gamma = j.value("gamma", c.gamma);
        if (j.contains("phase_model")) {
            const auto m = j["phase_model"].get<std::string>();
            if (m == "round-trip") c.phase = PhaseModel::RoundTrip;
            else if (m == "double-path") c.phase = PhaseModel::DoublePath;
            else throw ConfigError("unknown phase_model '" + m + "' (round-trip|double-path)");
        }
        c.tube_integration = j.value("tube_integration", c.tube_integration);
        if (j.contains("precision")) {
            const auto p = j["precision"].get<std::string>();
            if (p == "double") c.precision = Precision::Double;
            else if (p == "single") c.precision = Precision::Single;
            else throw ConfigError("unknown precision '" + p + "' (single|double)");
        }
        c.workers_from_config = j.contains("workers");
        c.workers = j.value("workers", c.workers);
        c.allow_aliasing = j.value("allow_aliasing", false);
        c.count_trapped = j.value("count_trapped", false);
        c.strict_orientation = j.value("strict_orientation", false);
        c.strict_mesh = j.value("strict_mesh", false);
        c.out_csv = j.value("out", std::string{});
        c.heatmap = j.value("heatmap", std::string{});
        c.dump_hits = j.value("dump_hits", std::string{});
        if (j.contains("db_floor")) c.db_floor = j["db_floor"].get<double>();
        if (j.contains("db_ceil")) c.db_ceil = j["db_ceil"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad configuration value: ") + e.what());
    }
    return c;
}

inline nlohmann::json to_json(const SweepConfig& c) {
    nlohmann::json j;
    j["mesh"] = c.mesh_path;
    j["frequency_hz"] = c.frequency;
    j["theta_deg"] = {{"start", c.theta.start}, {"stop", c.theta.stop}, {"samples", c.theta.samples}};
    j["phi_deg"] = {{"start", c.phi.start}, {"stop", c.phi.stop}, {"samples", c.phi.samples}};
    if (c.spacing) j["spacing_m"] = *c.spacing;
    else j["spacing_m"] = "auto";
    j["sampling_factor"] = c.sampling_factor;
    j["margin"] = c.margin;
    j["max_bounces"] = c.max_bounces;
    j["epsilon_relative"] = c.epsilon_relative;
    if (c.epsilon) j["epsilon_m"] = *c.epsilon;
    j["split"] = detail::split_name(c.bvh.split_rule);
    j["leaf_size"] = c.bvh.leaf_size;
    j["bins_per_axis"] = c.bvh.bins_per_axis;
    j["traversal_cost"] = c.bvh.traversal_cost;
    j["intersection_cost"] = c.bvh.intersection_cost;
    j["max_depth"] = c.bvh.max_depth;
    j["gamma"] = c.gamma;
    j["phase_model"] = c.phase == PhaseModel::RoundTrip ? "round-trip" : "double-path";
    j["tube_integration"] = c.tube_integration;
    j["precision"] = c.precision == Precision::Double ? "double" : "single";
    j["allow_aliasing"] = c.allow_aliasing;
    j["count_trapped"] = c.count_trapped;
    j["strict_orientation"] = c.strict_orientation;
    j["strict_mesh"] = c.strict_mesh;
    return j;
}

inline SweepConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    SweepConfig c = parse_config(j);
    // relative mesh paths are taken relative to the config file
    if (!c.mesh_path.empty() && std::filesystem::path(c.mesh_path).is_relative())
        c.mesh_path = (path.parent_path() / c.mesh_path).lexically_normal().string();
    return c;
}

// ---------------------------------------------------------------------------------------------
// Single incident direction: aperture -> trace -> accumulate -> rcs.

struct EvalSettings {
    double wavelength = 0;
    double spacing = 0;
    double margin = 0.025;
    TraceParams trace;
    double gamma = -1.0;
    PhaseModel phase = PhaseModel::RoundTrip;
    bool tube_integration = true;
    bool count_trapped = false;
};

struct DirectionResult {
    ComplexAmp amplitude{};
    RcsValue rcs;
    std::size_t ray_count = 0;
    std::size_t valid_rays = 0;
    int max_bounces_seen = 0;
    std::vector<std::size_t> bounce_histogram;  // [n] = valid rays with n bounces
};

template <typename Real>
DirectionResult evaluate_direction(const Bvh<Real>& bvh, const Aabb<Real>& box, const IncidentDirection& dir,
                                   const EvalSettings& s, unsigned workers = 1,
                                   const std::filesystem::path& dump_path = {}) {
    const ApertureGrid grid = build_aperture(box, dir, s.spacing, s.margin);
    const auto records = trace_grid(bvh, grid, s.trace, workers);
    if (!dump_path.empty()) dump_hits<Real>(records, grid, dump_path);

    ScatterParams sp = ScatterParams::from_wavelength(s.wavelength, grid.cell_area);
    sp.gamma = s.gamma;
    sp.phase = s.phase;
    sp.tube_integration = s.tube_integration;
    sp.count_trapped = s.count_trapped;

    DirectionResult r;
    r.amplitude = accumulate<Real>(records, dir.k_inc, sp, workers);
    r.rcs = rcs(r.amplitude);
    r.ray_count = records.size();
    r.bounce_histogram.assign(static_cast<std::size_t>(s.trace.max_bounces) + 1, 0);
    for (const auto& rec : records) {
        if (!rec.valid) continue;
        ++r.valid_rays;
        ++r.bounce_histogram[rec.bounces];
        r.max_bounces_seen = std::max(r.max_bounces_seen, static_cast<int>(rec.bounces));
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Angular sweep.

struct SweepCell {
    ComplexAmp amplitude{};
    double sigma = 0;
    double dbsm = -std::numeric_limits<double>::infinity();
    std::size_t ray_count = 0;
    std::size_t valid_rays = 0;
    int max_bounces_seen = 0;
    double mean_bounces = 0;
    double time_ms = 0;
};

struct SweepResult {
    std::vector<double> theta_deg;
    std::vector<double> phi_deg;
    std::vector<SweepCell> cells;  // theta outer, phi inner
    SweepConfig config;
    std::uint64_t mesh_checksum = 0;
    std::size_t triangle_count = 0;
    std::size_t dropped_faces = 0;  // degenerate faces skipped while loading
    BvhStats bvh_stats;
    double wavelength = 0;
    double spacing = 0;
    double epsilon = 0;
    SamplingCheck sampling{true, 0};
    double bvh_build_ms = 0;

    const SweepCell& at(std::size_t it, std::size_t ip) const { return cells[it * phi_deg.size() + ip]; }
};

struct DryRunSummary {
    std::size_t angle_count = 0;
    double wavelength = 0;
    double spacing = 0;
    SamplingCheck sampling{true, 0};
    bool mesh_loaded = false;
    std::size_t triangle_count = 0;
    std::size_t max_rays_per_angle = 0;
    std::size_t max_nu = 0, max_nv = 0;
    double total_rays = 0;
};

namespace detail {

inline void check_sampling(const SweepConfig& c) {
    const auto check = sampling_check(c.resolved_spacing(), c.wavelength());
    if (!check.ok && !c.allow_aliasing)
        throw ConfigError("ray spacing " + std::to_string(c.resolved_spacing()) + " m exceeds lambda/5 (ratio " +
                          std::to_string(check.ratio) + "); pass --allow-aliasing to run anyway");
}

template <typename Real>
SweepResult run_sweep_on(const Mesh<Real>& mesh, const SweepConfig& c) {
    SweepResult res;
    res.config = c;
    res.wavelength = c.wavelength();
    res.spacing = c.resolved_spacing();
    res.sampling = sampling_check(res.spacing, res.wavelength);
    res.triangle_count = mesh.size();
    res.dropped_faces = mesh.dropped_faces.size();
    res.mesh_checksum = mesh_checksum(mesh);
    res.epsilon = c.epsilon ? *c.epsilon : c.epsilon_relative * static_cast<double>(mesh.aabb.diagonal());

    for (int i = 0; i < c.theta.samples; ++i) res.theta_deg.push_back(c.theta.at(i));
    for (int i = 0; i < c.phi.samples; ++i) res.phi_deg.push_back(c.phi.at(i));
    const std::size_t n_angles = res.theta_deg.size() * res.phi_deg.size();
    res.cells.resize(n_angles);

    const auto t0 = std::chrono::steady_clock::now();
    BuildParams bp = c.bvh;
    bp.workers = c.workers;
    const Bvh<Real> bvh = build_bvh(mesh, bp);
    res.bvh_stats = bvh.stats;
    res.bvh_build_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    EvalSettings s;
    s.wavelength = res.wavelength;
    s.spacing = res.spacing;
    s.margin = c.margin;
    s.trace = TraceParams{c.max_bounces, res.epsilon, c.strict_orientation};
    s.gamma = c.gamma;
    s.phase = c.phase;
    s.tube_integration = c.tube_integration;
    s.count_trapped = c.count_trapped;

    if (!c.dump_hits.empty()) std::filesystem::create_directories(c.dump_hits);

    // Parallel over angles when there are enough of them, otherwise over rays within each angle.
    const bool over_angles = n_angles >= c.workers;
    const unsigned outer = over_angles ? c.workers : 1;
    const unsigned inner = over_angles ? 1 : c.workers;
    const std::size_t n_phi = res.phi_deg.size();

    parallel_for(n_angles, outer, [&](std::size_t idx) {
        const std::size_t it = idx / n_phi, ip = idx % n_phi;
        const auto start = std::chrono::steady_clock::now();
        const auto dir = IncidentDirection::from_angles(res.theta_deg[it] * std::numbers::pi / 180.0,
                                                        res.phi_deg[ip] * std::numbers::pi / 180.0);
        std::filesystem::path dump;
        if (!c.dump_hits.empty())
            dump = std::filesystem::path(c.dump_hits) /
                   ("hits_t" + std::to_string(it) + "_p" + std::to_string(ip) + ".csv");
        DirectionResult dr;
        try {
            dr = evaluate_direction(bvh, mesh.aabb, dir, s, inner, dump);
        } catch (const NumericalError& e) {
            throw NumericalError("angle (theta index " + std::to_string(it) + ", phi index " + std::to_string(ip) +
                                 "): " + e.what());
        } catch (const ConfigError& e) {
            throw ConfigError("angle (theta index " + std::to_string(it) + ", phi index " + std::to_string(ip) +
                              "): " + e.what());
        }
        SweepCell& cell = res.cells[idx];
        cell.amplitude = dr.amplitude;
        cell.sigma = dr.rcs.sigma;
        cell.dbsm = dr.rcs.dbsm;
        cell.ray_count = dr.ray_count;
        cell.valid_rays = dr.valid_rays;
        cell.max_bounces_seen = dr.max_bounces_seen;
        std::size_t total = 0;
        for (std::size_t n = 0; n < dr.bounce_histogram.size(); ++n) total += n * dr.bounce_histogram[n];
        cell.mean_bounces = dr.valid_rays ? static_cast<double>(total) / static_cast<double>(dr.valid_rays) : 0.0;
        cell.time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    });
    return res;
}

}  // namespace detail

/// Runs a sweep over an already loaded mesh (double precision input; converted when the config
/// asks for single-precision kernels).
inline SweepResult run_sweep(const Mesh<double>& mesh, const SweepConfig& c) {
    validate(c);
    detail::check_sampling(c);
    if (c.precision == Precision::Single) return detail::run_sweep_on(mesh_cast<float>(mesh), c);
    return detail::run_sweep_on(mesh, c);
}

inline SweepResult run_sweep(const SweepConfig& c) {
    validate(c);
    detail::check_sampling(c);
    if (c.mesh_path.empty()) throw ConfigError("config has no mesh path");
    const Mesh<double> mesh = load_mesh<double>(c.mesh_path, LoadOptions{c.strict_mesh});
    return run_sweep(mesh, c);
}

/// Summarises a configuration without tracing. The mesh is read only to size apertures; a
/// missing mesh is reported rather than treated as an error.
inline DryRunSummary dry_run(const SweepConfig& c) {
    validate(c);
    DryRunSummary d;
    d.angle_count = static_cast<std::size_t>(c.theta.samples) * static_cast<std::size_t>(c.phi.samples);
    d.wavelength = c.wavelength();
    d.spacing = c.resolved_spacing();
    d.sampling = sampling_check(d.spacing, d.wavelength);
    if (c.mesh_path.empty() || !std::filesystem::exists(c.mesh_path)) return d;
    const Mesh<double> mesh = load_mesh<double>(c.mesh_path, LoadOptions{c.strict_mesh});
    d.mesh_loaded = true;
    d.triangle_count = mesh.size();
    for (int it = 0; it < c.theta.samples; ++it) {
        for (int ip = 0; ip < c.phi.samples; ++ip) {
            const auto dir = IncidentDirection::from_angles(c.theta.at(it) * std::numbers::pi / 180.0,
                                                            c.phi.at(ip) * std::numbers::pi / 180.0);
            const ApertureGrid g = build_aperture(mesh.aabb, dir, d.spacing, c.margin);
            d.total_rays += static_cast<double>(g.ray_count());
            if (g.ray_count() > d.max_rays_per_angle) {
                d.max_rays_per_angle = g.ray_count();
                d.max_nu = g.nu;
                d.max_nv = g.nv;
            }
        }
    }
    return d;
}

// ---------------------------------------------------------------------------------------------
// Sphere validation against the Mie series.

/// `count` quasi-uniform directions on the sphere (Fibonacci lattice), as (theta, phi) radians.
inline std::vector<IncidentDirection> fibonacci_directions(int count) {
    std::vector<IncidentDirection> dirs;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / count;
        const double phi = std::fmod(golden * i, 2.0 * std::numbers::pi);
        dirs.push_back(IncidentDirection::from_angles(std::acos(z), phi));
    }
    return dirs;
}

struct ValidationConfig {
    double radius = 1.0;
    std::vector<double> kr{30, 50, 100};
    std::optional<double> fixed_spacing;  // metres; unset = lambda / sampling_factor per kr
    double sampling_factor = 5.0;
    int min_subdivisions = 5;             // the faceting rule may raise this
    int directions = 16;
    double margin = 0.025;
    int max_bounces = 10;
    bool tube_integration = true;
    Precision precision = Precision::Double;
    BuildParams bvh;
    unsigned workers = 1;
};

struct ValidationRow {
    double kr = 0;
    double wavelength = 0;
    double spacing = 0;
    int subdivisions = 0;
    std::size_t triangles = 0;
    double sigma_sbr = 0;  // direction-averaged
    double sigma_mie = 0;
    double rel_error = 0;  // (sbr - mie) / mie
    double dir_min = 0, dir_max = 0;  // extreme single-direction sigma
    SamplingCheck sampling{true, 0};
};

struct ValidationReport {
    std::vector<ValidationRow> rows;

    double mean_abs_error() const {
        double s = 0;
        for (const auto& r : rows) s += std::abs(r.rel_error);
        return rows.empty() ? 0 : s / static_cast<double>(rows.size());
    }
    double max_abs_error() const {
        double m = 0;
        for (const auto& r : rows) m = std::max(m, std::abs(r.rel_error));
        return m;
    }
};

/// Largest facet sagitta of the unit icosphere at each subdivision level (scales with radius).
inline double unit_icosphere_sagitta(int level) {
    static std::mutex m;
    static std::array<double, kMaxIcosphereSubdivisions + 1> cache{};
    std::lock_guard lock(m);
    auto& v = cache[static_cast<std::size_t>(level)];
    if (v == 0) v = max_sagitta(generate_icosphere<double>(1.0, level), 1.0);
    return v;
}

/// Smallest icosphere level whose facet sagitta is at most lambda/16, never below `floor`,
/// capped at the generator limit.
inline int faceting_subdivisions(double radius, double wavelength, int floor) {
    int s = std::clamp(floor, 0, kMaxIcosphereSubdivisions);
    while (s < kMaxIcosphereSubdivisions && radius * unit_icosphere_sagitta(s) > wavelength / 16.0) ++s;
    return s;
}

namespace detail {

template <typename Real>
ValidationReport validate_sphere_impl(const ValidationConfig& vc) {
    ValidationReport report;
    const auto dirs = fibonacci_directions(vc.directions);
    int cached_level = -1;
    Mesh<Real> mesh;
    Bvh<Real> bvh;

    for (double kr : vc.kr) {
        if (!(kr > 0)) throw ConfigError("kr values must be positive");
        ValidationRow row;
        row.kr = kr;
        row.wavelength = 2.0 * std::numbers::pi * vc.radius / kr;
        row.spacing = vc.fixed_spacing ? *vc.fixed_spacing : row.wavelength / vc.sampling_factor;
        row.sampling = sampling_check(row.spacing, row.wavelength);
        row.subdivisions = faceting_subdivisions(vc.radius, row.wavelength, vc.min_subdivisions);
        if (row.subdivisions != cached_level) {
            mesh = mesh_cast<Real>(generate_icosphere<double>(vc.radius, row.subdivisions));
            BuildParams bp = vc.bvh;
            bp.workers = vc.workers;
            bvh = build_bvh(mesh, bp);
            cached_level = row.subdivisions;
        }
        row.triangles = mesh.size();

        EvalSettings s;
        s.wavelength = row.wavelength;
        s.spacing = row.spacing;
        s.margin = vc.margin;
        s.trace = TraceParams{vc.max_bounces, 1e-6 * static_cast<double>(mesh.aabb.diagonal()), false};
        s.tube_integration = vc.tube_integration;

        std::vector<double> sigma(dirs.size());
        const bool over_dirs = dirs.size() >= vc.workers;
        parallel_for(dirs.size(), over_dirs ? vc.workers : 1u, [&](std::size_t d) {
            sigma[d] = evaluate_direction(bvh, mesh.aabb, dirs[d], s, over_dirs ? 1u : vc.workers).rcs.sigma;
        });
        double sum = 0;
        for (double v : sigma) sum += v;  // fixed order
        row.sigma_sbr = sum / static_cast<double>(sigma.size());
        row.dir_min = *std::min_element(sigma.begin(), sigma.end());
        row.dir_max = *std::max_element(sigma.begin(), sigma.end());
        row.sigma_mie = mie_backscatter_pec(kr, vc.radius);
        row.rel_error = (row.sigma_sbr - row.sigma_mie) / row.sigma_mie;
        report.rows.push_back(row);
    }
    return report;
}

}  // namespace detail

/// Direction-averaged SBR cross section of a faceted PEC sphere compared with the Mie series.
/// Rows where the sampling rule is violated are reported, not rejected.
inline ValidationReport validate_sphere(const ValidationConfig& vc) {
    if (!(vc.radius > 0)) throw ConfigError("sphere radius must be positive");
    if (vc.directions < 1) throw ConfigError("need at least one direction");
    if (vc.fixed_spacing && !(*vc.fixed_spacing > 0)) throw ConfigError("fixed spacing must be positive");
    if (vc.precision == Precision::Single) return detail::validate_sphere_impl<float>(vc);
    return detail::validate_sphere_impl<double>(vc);
}

}  // namespace sbr
