// sbr: command-line front end for the SBR radar cross section solver.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbr/sbr.hpp"

namespace {

struct SweepArgs {
    std::string config;
    std::string out, heatmap, metadata, dump_hits, precision, split;
    bool dry_run = false, allow_aliasing = false, count_trapped = false, strict_orientation = false;
    bool strict = false, timing = false, point_sampling = false;
    std::optional<unsigned> workers;
    std::optional<int> max_bounces;
    std::optional<double> spacing, db_floor, db_ceil;
};

void apply_overrides(sbr::SweepConfig& c, const SweepArgs& a) {
    if (!a.out.empty()) c.out_csv = a.out;
    if (!a.heatmap.empty()) c.heatmap = a.heatmap;
    if (!a.dump_hits.empty()) c.dump_hits = a.dump_hits;
    if (a.allow_aliasing) c.allow_aliasing = true;
    if (a.count_trapped) c.count_trapped = true;
    if (a.strict_orientation) c.strict_orientation = true;
    if (a.strict) c.strict_mesh = true;
    if (a.point_sampling) c.tube_integration = false;
    if (a.max_bounces) c.max_bounces = *a.max_bounces;
    if (a.spacing) c.spacing = *a.spacing;
    if (a.db_floor) c.db_floor = *a.db_floor;
    if (a.db_ceil) c.db_ceil = *a.db_ceil;
    if (!a.precision.empty()) {
        if (a.precision == "single") c.precision = sbr::Precision::Single;
        else if (a.precision == "double") c.precision = sbr::Precision::Double;
        else throw sbr::ConfigError("precision must be single or double");
    }
    if (!a.split.empty()) c.bvh.split_rule = sbr::detail::parse_split(a.split);
    if (a.workers) c.workers = *a.workers;
    else if (!c.workers_from_config) c.workers = sbr::default_workers();
}

int run_sweep_command(const SweepArgs& a) {
    sbr::SweepConfig c = sbr::load_config(a.config);
    apply_overrides(c, a);

    if (a.dry_run) {
        const auto d = sbr::dry_run(c);
        std::printf("angles            %zu (%d theta x %d phi)\n", d.angle_count, c.theta.samples, c.phi.samples);
        std::printf("frequency         %.9g Hz (lambda %.9g m)\n", c.frequency, d.wavelength);
        std::printf("ray spacing       %.9g m (%s, ratio %.4g)\n", d.spacing,
                    d.sampling.ok ? "within lambda/5" : "exceeds lambda/5", d.sampling.ratio);
        if (d.mesh_loaded) {
            std::printf("mesh              %s (%zu triangles)\n", c.mesh_path.c_str(), d.triangle_count);
            std::printf("max rays / angle  %zu (%zu x %zu)\n", d.max_rays_per_angle, d.max_nu, d.max_nv);
            std::printf("total rays        %.6g\n", d.total_rays);
        } else {
            std::printf("mesh              %s (not found; ray counts unavailable)\n", c.mesh_path.c_str());
        }
        std::printf("workers           %u\n", c.workers);
        if (!d.sampling.ok && !c.allow_aliasing) std::printf("note: a real run would abort without --allow-aliasing\n");
        return 0;
    }

    const sbr::SweepResult r = sbr::run_sweep(c);
    if (r.dropped_faces > 0)
        std::fprintf(stderr, "warning: %zu degenerate faces dropped from %s\n", r.dropped_faces, c.mesh_path.c_str());
    if (c.out_csv.empty()) {
        sbr::write_csv(r, std::cout, a.timing);
    } else {
        sbr::write_csv(r, c.out_csv, a.timing);
        const std::string meta = a.metadata.empty() ? c.out_csv + ".meta.json" : a.metadata;
        sbr::write_metadata(r, meta);
    }
    if (!c.heatmap.empty()) {
        auto [lo, hi] = sbr::default_db_range(r);
        sbr::write_heatmap(r, c.heatmap, c.db_floor.value_or(lo), c.db_ceil.value_or(hi));
    }
    double total_ms = 0;
    for (const auto& cell : r.cells) total_ms += cell.time_ms;
    std::fprintf(stderr, "%zu angles, %zu triangles, bvh %.1f ms, mean %.1f ms/angle\n", r.cells.size(),
                 r.triangle_count, r.bvh_build_ms, total_ms / static_cast<double>(r.cells.size()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shooting-and-bouncing-rays monostatic radar cross section solver"};
    app.require_subcommand(1);

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Monostatic (theta, phi) sweep from a JSON config");
    sweep->add_option("--config", sw.config, "JSON run configuration")->required();
    sweep->add_option("--out", sw.out, "result CSV (default: config value, else stdout)");
    sweep->add_option("--heatmap", sw.heatmap, "dBsm heatmap (binary PPM)");
    sweep->add_option("--metadata", sw.metadata, "run metadata JSON (default: <out>.meta.json)");
    sweep->add_flag("--dry-run", sw.dry_run, "summarise the run without tracing");
    sweep->add_option("--workers", sw.workers, "worker threads (default: config, else SBR_WORKERS, else hardware)");
    sweep->add_flag("--allow-aliasing", sw.allow_aliasing, "run even if the ray spacing exceeds lambda/5");
    sweep->add_flag("--count-trapped", sw.count_trapped, "keep rays still inside the target after B_max");
    sweep->add_option("--dump-hits", sw.dump_hits, "directory for per-angle hit record CSVs");
    sweep->add_flag("--strict-orientation", sw.strict_orientation, "drop rays whose first hit is a back face");
    sweep->add_flag("--strict", sw.strict, "reject meshes with degenerate faces");
    sweep->add_flag("--timing", sw.timing, "write measured per-angle times into the CSV");
    sweep->add_flag("--point-sampling", sw.point_sampling, "disable tube phase integration");
    sweep->add_option("--max-bounces", sw.max_bounces, "B_max");
    sweep->add_option("--spacing", sw.spacing, "ray spacing in metres");
    sweep->add_option("--precision", sw.precision, "single|double");
    sweep->add_option("--split", sw.split, "median|sah");
    sweep->add_option("--db-floor", sw.db_floor, "heatmap lower clamp (default: max - 60)");
    sweep->add_option("--db-ceil", sw.db_ceil, "heatmap upper clamp (default: max)");

    sbr::ValidationConfig vc;
    std::string v_out, v_precision;
    std::optional<unsigned> v_workers;
    bool v_point = false;
    auto* validate = app.add_subcommand("validate-sphere", "Compare faceted-sphere SBR with the Mie series");
    validate->add_option("--radius", vc.radius, "sphere radius in metres")->capture_default_str();
    validate->add_option("--kr", vc.kr, "electrical sizes, comma separated")->delimiter(',')->capture_default_str();
    validate->add_option("--fixed-spacing", vc.fixed_spacing, "hold the ray spacing (m) fixed across kr");
    validate->add_option("--subdiv", vc.min_subdivisions, "minimum icosphere level")->capture_default_str();
    validate->add_option("--directions", vc.directions, "averaged incident directions")->capture_default_str();
    validate->add_option("--max-bounces", vc.max_bounces, "B_max")->capture_default_str();
    validate->add_option("--workers", v_workers, "worker threads");
    validate->add_option("--precision", v_precision, "single|double");
    validate->add_flag("--point-sampling", v_point, "disable tube phase integration");
    validate->add_option("--out", v_out, "report CSV (default stdout)");

    double g_radius = 1.0;
    int g_subdiv = 5;
    std::string g_out;
    auto* gen = app.add_subcommand("gen-sphere", "Write an icosphere OBJ");
    gen->add_option("--radius", g_radius, "radius in metres")->capture_default_str();
    gen->add_option("--subdiv", g_subdiv, "subdivision level (0-8)")->capture_default_str();
    gen->add_option("--out", g_out, "output OBJ")->required();

    int a_detail = 1;
    std::string a_out;
    auto* gen_air = app.add_subcommand("gen-aircraft", "Write the procedural airliner test mesh as OBJ");
    gen_air->add_option("--detail", a_detail, "tessellation multiplier (1-8)")->capture_default_str();
    gen_air->add_option("--out", a_out, "output OBJ")->required();

    std::string b_mesh, b_split = "sah";
    std::size_t b_rays = 10000;
    std::uint64_t b_seed = 1;
    int b_leaf = 4;
    auto* bstats = app.add_subcommand("bvh-stats", "BVH structure and a random-ray traversal probe");
    bstats->add_option("--mesh", b_mesh, "OBJ mesh")->required();
    bstats->add_option("--split", b_split, "median|sah")->capture_default_str();
    bstats->add_option("--leaf-size", b_leaf, "N_leaf")->capture_default_str();
    bstats->add_option("--rays", b_rays, "probe ray count")->capture_default_str();
    bstats->add_option("--seed", b_seed, "probe seed")->capture_default_str();

    double m_radius = 1.0, m_lo = 0.1, m_hi = 1000.0;
    int m_samples = 500;
    std::string m_out;
    auto* mie = app.add_subcommand("mie", "Tabulate PEC sphere backscatter (log-spaced kr)");
    mie->add_option("--radius", m_radius, "radius in metres")->capture_default_str();
    mie->add_option("--kr-min", m_lo, "smallest kr")->capture_default_str();
    mie->add_option("--kr-max", m_hi, "largest kr")->capture_default_str();
    mie->add_option("--samples", m_samples, "number of kr values")->capture_default_str();
    mie->add_option("--out", m_out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(sbr::ExitCode::Config);
    }

    try {
        if (*sweep) return run_sweep_command(sw);

        if (*validate) {
            vc.workers = v_workers ? *v_workers : sbr::default_workers();
            vc.tube_integration = !v_point;
            if (v_precision == "single") vc.precision = sbr::Precision::Single;
            else if (!v_precision.empty() && v_precision != "double")
                throw sbr::ConfigError("precision must be single or double");
            const auto rep = sbr::validate_sphere(vc);
            if (v_out.empty()) sbr::write_validation_csv(rep, std::cout);
            else sbr::write_validation_csv(rep, v_out);
            for (const auto& r : rep.rows)
                std::fprintf(stderr, "kr %-8g s=%d  sbr %.6g  mie %.6g  error %+.2f%%%s\n", r.kr, r.subdivisions,
                             r.sigma_sbr, r.sigma_mie, 100 * r.rel_error,
                             r.sampling.ok ? "" : "  (spacing exceeds lambda/5)");
            std::fprintf(stderr, "mean |error| %.2f%%, max |error| %.2f%%\n", 100 * rep.mean_abs_error(),
                         100 * rep.max_abs_error());
            return 0;
        }

        if (*gen) {
            const auto m = sbr::generate_icosphere<double>(g_radius, g_subdiv);
            sbr::write_obj(m, std::filesystem::path(g_out));
            std::fprintf(stderr, "%zu triangles, max sagitta %.6g m\n", m.size(), sbr::max_sagitta(m, g_radius));
            return 0;
        }

        if (*gen_air) {
            const auto m = sbr::make_aircraft<double>(a_detail);
            sbr::write_obj(m, std::filesystem::path(a_out));
            std::fprintf(stderr, "%zu triangles\n", m.size());
            return 0;
        }

        if (*bstats) {
            const auto mesh = sbr::load_mesh<double>(b_mesh);
            sbr::BuildParams bp;
            bp.split_rule = sbr::detail::parse_split(b_split);
            bp.leaf_size = b_leaf;
            const auto bvh = sbr::build_bvh(mesh, bp);
            std::printf("triangles   %zu\n", mesh.size());
            std::printf("nodes       %zu\n", bvh.stats.node_count);
            std::printf("leaves      %zu\n", bvh.stats.leaf_count);
            std::printf("max depth   %d\n", bvh.stats.max_depth);
            std::printf("leaf sizes ");
            for (std::size_t k = 0; k < bvh.stats.leaf_histogram.size(); ++k)
                if (bvh.stats.leaf_histogram[k]) std::printf(" %zu:%zu", k, bvh.stats.leaf_histogram[k]);
            std::printf("\n");
            sbr::TraversalStats ts;
            std::size_t hits = 0;
            for (const auto& r : sbr::random_probe_rays(mesh.aabb, b_rays, b_seed))
                hits += sbr::closest_hit(bvh, r.origin, r.dir, 0.0, std::numeric_limits<double>::infinity(), &ts)
                            .has_value();
            const double n = static_cast<double>(std::max<std::size_t>(b_rays, 1));
            std::printf("probe       %zu rays, %zu hits\n", b_rays, hits);
            std::printf("mean visits %.3f\n", static_cast<double>(ts.node_visits) / n);
            std::printf("mean tests  %.3f\n", static_cast<double>(ts.triangle_tests) / n);
            return 0;
        }

        if (*mie) {
            const auto kr = sbr::log_samples(m_lo, m_hi, m_samples);
            if (m_out.empty()) sbr::write_mie_csv(m_radius, kr, std::cout);
            else sbr::write_mie_csv(m_radius, kr, std::filesystem::path(m_out));
            return 0;
        }
    } catch (const sbr::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(sbr::ExitCode::Io);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(sbr::ExitCode::Numerical);
    }
    return 0;
}
