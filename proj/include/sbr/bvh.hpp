#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "sbr/error.hpp"
#include "sbr/geometry.hpp"

namespace sbr {

enum class SplitRule { Median, BinnedSah };

struct BuildParams {
    SplitRule split_rule = SplitRule::BinnedSah;
    int leaf_size = 4;           // N_leaf: nodes with at most this many triangles become leaves
    int bins_per_axis = 16;      // binned SAH only
    double traversal_cost = 1.0;    // C_T
    double intersection_cost = 1.0;  // C_I
    int max_depth = 64;
    unsigned workers = 1;        // subtree tasks; the output does not depend on this
};

inline constexpr int kMaxBvhDepth = 100;

inline void validate(const BuildParams& p) {
    if (p.leaf_size < 1) throw ConfigError("leaf size must be >= 1");
    if (p.split_rule == SplitRule::BinnedSah && p.bins_per_axis < 2) throw ConfigError("SAH needs >= 2 bins per axis");
    if (!(p.traversal_cost > 0) || !(p.intersection_cost > 0)) throw ConfigError("SAH costs must be positive");
    if (p.max_depth < 0 || p.max_depth > kMaxBvhDepth)
        throw ConfigError("max depth must be in [0, " + std::to_string(kMaxBvhDepth) + "]");
}

/// Internal nodes keep their left child at index + 1 (preorder) and store the right child
/// index; leaves store a contiguous range of the permuted triangle array.
template <typename Real>
struct BvhNode {
    Aabb<Real> box;
    std::uint32_t index = 0;  // right child (internal) or first triangle (leaf)
    std::uint32_t count = 0;  // triangle count, 0 for internal nodes

    bool is_leaf() const { return count > 0; }
    std::uint32_t right() const { return index; }
    std::uint32_t first() const { return index; }

    friend bool operator==(const BvhNode&, const BvhNode&) = default;
};

struct BvhStats {
    std::size_t node_count = 0;
    std::size_t leaf_count = 0;
    int max_depth = 0;
    std::vector<std::size_t> leaf_histogram;  // [k] = number of leaves holding k triangles
};

template <typename Real>
struct Bvh {
    std::vector<BvhNode<Real>> nodes;
    std::vector<std::uint32_t> tri_order;        // permuted slot -> original triangle index
    std::vector<Triangle<Real>> triangles;       // mesh triangles in tri_order
    BvhStats stats;
};

/// C_T + SA(L)/SA(P) * N_L * C_I + SA(R)/SA(P) * N_R * C_I
inline double sah_cost(double sa_parent, double sa_left, double sa_right, std::size_t n_left,
                       std::size_t n_right, double c_traversal, double c_intersection) {
    return c_traversal + (sa_left / sa_parent) * static_cast<double>(n_left) * c_intersection +
           (sa_right / sa_parent) * static_cast<double>(n_right) * c_intersection;
}

struct MedianSplit {
    int axis;
    std::size_t left_count;
};

/// Partitions `indices` in place about the median centroid along the longest axis of `node_box`.
/// Ties on the coordinate are ordered by triangle index. Returns nothing if all centroids coincide.
template <typename Real>
std::optional<MedianSplit> median_split(std::span<std::uint32_t> indices, std::span<const Vec3<Real>> centroids,
                                        const Aabb<Real>& node_box) {
    if (indices.size() < 2) return std::nullopt;
    const Vec3<Real>& c0 = centroids[indices[0]];
    const bool identical = std::all_of(indices.begin(), indices.end(),
                                       [&](std::uint32_t i) { return centroids[i] == c0; });
    if (identical) return std::nullopt;

    const int axis = node_box.longest_axis();
    const std::size_t mid = indices.size() / 2;
    std::nth_element(indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(mid), indices.end(),
                     [&](std::uint32_t a, std::uint32_t b) {
                         const Real ca = centroids[a][axis], cb = centroids[b][axis];
                         return ca < cb || (ca == cb && a < b);
                     });
    return MedianSplit{axis, mid};
}

struct SahSplit {
    int axis;
    int boundary;  // triangles in bins [0, boundary) go left
    std::size_t left_count;
    double cost;
};

struct SahOptions {
    int bins_per_axis = 16;
    double traversal_cost = 1.0;
    double intersection_cost = 1.0;
    int leaf_size = 4;
};

namespace detail {

template <typename Real>
int bin_of(Real c, Real lo, Real extent, int bins) {
    const int b = static_cast<int>(static_cast<double>(c - lo) / static_cast<double>(extent) * bins);
    return std::clamp(b, 0, bins - 1);
}

}  // namespace detail

/// Evaluates the SAH at every interior bin boundary of the centroid bounds on all three axes and
/// partitions `indices` by the cheapest one (ties: lowest axis, then lowest boundary). Returns
/// nothing when every axis bins all centroids together, or when the best split is no cheaper
/// than a leaf (cost >= N * C_I) for a node of at most 4 * N_leaf triangles.
template <typename Real>
std::optional<SahSplit> binned_sah_split(std::span<std::uint32_t> indices, std::span<const Vec3<Real>> centroids,
                                         std::span<const Aabb<Real>> tri_boxes, const Aabb<Real>& node_box,
                                         const SahOptions& opt) {
    const std::size_t n = indices.size();
    if (n < 2) return std::nullopt;
    const int bins = opt.bins_per_axis;

    Aabb<Real> cbounds;
    for (auto i : indices) cbounds.grow(centroids[i]);
    double sa_parent = static_cast<double>(node_box.surface_area());
    if (!(sa_parent > 0)) sa_parent = 1.0;

    std::optional<SahSplit> best;
    std::vector<Aabb<Real>> bin_box(static_cast<std::size_t>(bins));
    std::vector<std::size_t> bin_count(static_cast<std::size_t>(bins));
    std::vector<double> right_area(static_cast<std::size_t>(bins));
    std::vector<std::size_t> right_count(static_cast<std::size_t>(bins));

    for (int axis = 0; axis < 3; ++axis) {
        const Real lo = cbounds.min[axis];
        const Real extent = cbounds.max[axis] - lo;
        if (!(extent > Real(0))) continue;

        std::fill(bin_box.begin(), bin_box.end(), Aabb<Real>{});
        std::fill(bin_count.begin(), bin_count.end(), 0);
        for (auto i : indices) {
            const auto b = static_cast<std::size_t>(detail::bin_of(centroids[i][axis], lo, extent, bins));
            bin_box[b].grow(tri_boxes[i]);
            ++bin_count[b];
        }

        // suffix sweep: right side of boundary k covers bins [k, bins)
        Aabb<Real> acc;
        std::size_t cnt = 0;
        for (int k = bins - 1; k >= 1; --k) {
            acc.grow(bin_box[static_cast<std::size_t>(k)]);
            cnt += bin_count[static_cast<std::size_t>(k)];
            right_area[static_cast<std::size_t>(k)] = static_cast<double>(acc.surface_area());
            right_count[static_cast<std::size_t>(k)] = cnt;
        }
        acc = Aabb<Real>{};
        cnt = 0;
        for (int k = 1; k < bins; ++k) {
            acc.grow(bin_box[static_cast<std::size_t>(k - 1)]);
            cnt += bin_count[static_cast<std::size_t>(k - 1)];
            const std::size_t nr = right_count[static_cast<std::size_t>(k)];
            if (cnt == 0 || nr == 0) continue;
            const double cost = sah_cost(sa_parent, static_cast<double>(acc.surface_area()),
                                         right_area[static_cast<std::size_t>(k)], cnt, nr, opt.traversal_cost,
                                         opt.intersection_cost);
            if (!best || cost < best->cost) best = SahSplit{axis, k, cnt, cost};
        }
    }

    if (!best) return std::nullopt;
    const double leaf_cost = static_cast<double>(n) * opt.intersection_cost;
    if (best->cost >= leaf_cost && n <= static_cast<std::size_t>(4 * opt.leaf_size)) return std::nullopt;

    const int axis = best->axis;
    const Real lo = cbounds.min[axis];
    const Real extent = cbounds.max[axis] - lo;
    std::stable_partition(indices.begin(), indices.end(), [&](std::uint32_t i) {
        return detail::bin_of(centroids[i][axis], lo, extent, bins) < best->boundary;
    });
    return best;
}

namespace detail {

template <typename Real>
struct BuildNode {
    Aabb<Real> box;
    std::uint32_t first = 0;
    std::uint32_t count = 0;
    int depth = 0;
    std::unique_ptr<BuildNode> left, right;
};

template <typename Real>
struct BuildContext {
    std::span<const Vec3<Real>> centroids;
    std::span<const Aabb<Real>> boxes;
    std::span<std::uint32_t> order;
    BuildParams params;
    int spawn_depth;
};

template <typename Real>
std::unique_ptr<BuildNode<Real>> build_range(const BuildContext<Real>& ctx, std::size_t begin, std::size_t end,
                                             int depth) {
    auto node = std::make_unique<BuildNode<Real>>();
    node->depth = depth;
    for (std::size_t k = begin; k < end; ++k) node->box.grow(ctx.boxes[ctx.order[k]]);
    node->first = static_cast<std::uint32_t>(begin);
    node->count = static_cast<std::uint32_t>(end - begin);

    const std::size_t n = end - begin;
    if (n <= static_cast<std::size_t>(ctx.params.leaf_size) || depth >= ctx.params.max_depth) return node;

    std::span<std::uint32_t> range = ctx.order.subspan(begin, n);
    std::size_t left_count = 0;
    if (ctx.params.split_rule == SplitRule::Median) {
        auto s = median_split<Real>(range, ctx.centroids, node->box);
        if (!s) return node;
        left_count = s->left_count;
    } else {
        SahOptions opt{ctx.params.bins_per_axis, ctx.params.traversal_cost, ctx.params.intersection_cost,
                       ctx.params.leaf_size};
        auto s = binned_sah_split<Real>(range, ctx.centroids, ctx.boxes, node->box, opt);
        if (!s) return node;
        left_count = s->left_count;
    }

    const std::size_t mid = begin + left_count;
    if (depth < ctx.spawn_depth && n > 4096) {
        auto left = std::async(std::launch::async, [&ctx, begin, mid, depth] {
            return build_range(ctx, begin, mid, depth + 1);
        });
        node->right = build_range(ctx, mid, end, depth + 1);
        node->left = left.get();
    } else {
        node->left = build_range(ctx, begin, mid, depth + 1);
        node->right = build_range(ctx, mid, end, depth + 1);
    }
    node->count = 0;
    return node;
}

template <typename Real>
void linearize(const BuildNode<Real>& n, Bvh<Real>& out) {
    const std::size_t self = out.nodes.size();
    out.nodes.push_back({n.box, n.first, n.count});
    out.stats.max_depth = std::max(out.stats.max_depth, n.depth);
    if (n.count > 0) {
        ++out.stats.leaf_count;
        if (out.stats.leaf_histogram.size() <= n.count) out.stats.leaf_histogram.resize(n.count + 1);
        ++out.stats.leaf_histogram[n.count];
        return;
    }
    linearize(*n.left, out);
    out.nodes[self].index = static_cast<std::uint32_t>(out.nodes.size());
    linearize(*n.right, out);
}

}  // namespace detail

/// Builds the hierarchy. Subtrees may be built concurrently, but node numbering happens in a
/// single preorder pass afterwards, so the layout is identical for any worker count.
template <typename Real>
Bvh<Real> build_bvh(const Mesh<Real>& mesh, const BuildParams& params = {}) {
    validate(params);
    if (mesh.triangles.empty()) throw ConfigError("cannot build a BVH over an empty mesh");
    if (mesh.triangles.size() > std::numeric_limits<std::uint32_t>::max())
        throw ConfigError("mesh too large for 32-bit triangle indices");

    const std::size_t n = mesh.triangles.size();
    std::vector<Vec3<Real>> centroids(n);
    std::vector<Aabb<Real>> boxes(n);
    for (std::size_t i = 0; i < n; ++i) {
        centroids[i] = mesh.triangles[i].centroid();
        boxes[i] = mesh.triangles[i].bounds();
    }

    Bvh<Real> bvh;
    bvh.tri_order.resize(n);
    std::iota(bvh.tri_order.begin(), bvh.tri_order.end(), 0u);

    int spawn_depth = 0;
    while ((1u << spawn_depth) < params.workers && spawn_depth < 16) ++spawn_depth;
    if (params.workers > 1) spawn_depth += 1;

    detail::BuildContext<Real> ctx{centroids, boxes, bvh.tri_order, params, spawn_depth};
    auto root = detail::build_range(ctx, 0, n, 0);

    bvh.nodes.reserve(2 * n / static_cast<std::size_t>(params.leaf_size) + 1);
    detail::linearize(*root, bvh);
    bvh.stats.node_count = bvh.nodes.size();

    bvh.triangles.reserve(n);
    for (auto i : bvh.tri_order) bvh.triangles.push_back(mesh.triangles[i]);
    return bvh;
}

template <typename Real>
struct Hit {
    Real t;
    std::uint32_t triangle_index;  // index into the original mesh
    Vec3<Real> normal;
};

struct TraversalStats {
    std::uint64_t node_visits = 0;     // AABB tests performed
    std::uint64_t triangle_tests = 0;
};

inline constexpr std::size_t kTraversalStackSize = kMaxBvhDepth + 2;

/// Nearest intersection in (t_min, t_max] using an explicit stack. Children are pushed far first
/// so the nearer one (by slab entry distance, left on ties) is popped next. Equal-t hits resolve
/// to the lower original triangle index.
template <typename Real>
std::optional<Hit<Real>> closest_hit(const Bvh<Real>& bvh, const Vec3<Real>& origin, const Vec3<Real>& dir,
                                     Real t_min, Real t_max, TraversalStats* stats = nullptr) {
    struct Entry {
        std::uint32_t node;
        Real t_entry;
    };
    std::array<Entry, kTraversalStackSize> stack;
    std::size_t top = 0;

    const Vec3<Real> inv = reciprocal(dir);
    std::uint64_t visits = 1;
    std::uint64_t tests = 0;
    std::optional<Hit<Real>> best;
    Real best_t = t_max;

    if (auto e = ray_aabb_intersect(origin, inv, bvh.nodes[0].box, best_t)) stack[top++] = {0, *e};

    while (top > 0) {
        const Entry cur = stack[--top];
        if (best && cur.t_entry > best_t) continue;
        const BvhNode<Real>& node = bvh.nodes[cur.node];
        if (node.is_leaf()) {
            for (std::uint32_t k = node.first(); k < node.first() + node.count; ++k) {
                ++tests;
                auto h = ray_triangle_intersect(origin, dir, bvh.triangles[k], t_min, best_t);
                if (!h) continue;
                const std::uint32_t id = bvh.tri_order[k];
                if (!best || h->t < best_t || id < best->triangle_index) {
                    best = Hit<Real>{h->t, id, h->normal};
                    best_t = h->t;
                }
            }
            continue;
        }
        const std::uint32_t l = cur.node + 1;
        const std::uint32_t r = node.right();
        visits += 2;
        const auto el = ray_aabb_intersect(origin, inv, bvh.nodes[l].box, best_t);
        const auto er = ray_aabb_intersect(origin, inv, bvh.nodes[r].box, best_t);
        if (el && er) {
            if (*er < *el) {
                stack[top++] = {l, *el};
                stack[top++] = {r, *er};
            } else {
                stack[top++] = {r, *er};
                stack[top++] = {l, *el};
            }
        } else if (el) {
            stack[top++] = {l, *el};
        } else if (er) {
            stack[top++] = {r, *er};
        }
    }

    if (stats) {
        stats->node_visits += visits;
        stats->triangle_tests += tests;
    }
    return best;
}

struct ProbeRay {
    Vec3d origin;
    Vec3d dir;
};

/// Random rays for traversal probes: origins uniform on a sphere of twice the box diagonal
/// around the box centre, each aimed at a uniform random point inside the box.
template <typename Real>
std::vector<ProbeRay> random_probe_rays(const Aabb<Real>& box, std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const Vec3d lo(box.min), hi(box.max);
    const Vec3d c = (lo + hi) * 0.5;
    const double radius = 2.0 * std::max(static_cast<double>(box.diagonal()), 1e-12);
    std::vector<ProbeRay> rays;
    rays.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double z = 2.0 * uni(rng) - 1.0;
        const double a = 2.0 * std::numbers::pi * uni(rng);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3d o = c + Vec3d{s * std::cos(a), s * std::sin(a), z} * radius;
        const Vec3d target{lo.x + (hi.x - lo.x) * uni(rng), lo.y + (hi.y - lo.y) * uni(rng),
                           lo.z + (hi.z - lo.z) * uni(rng)};
        rays.push_back({o, normalize(target - o)});
    }
    return rays;
}

}  // namespace sbr
