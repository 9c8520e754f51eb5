#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "mesh.hpp"

namespace polystokes {

namespace detail {

/// Keeps the part of `poly` with (x - mid) . dir <= 0 (Sutherland-Hodgman, one plane).
inline std::vector<Point2> clip_half_plane(const std::vector<Point2>& poly, const Point2& mid,
                                           const Point2& dir)
{
    std::vector<Point2> out;
    out.reserve(poly.size() + 1);
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& p = poly[i];
        const Point2& q = poly[(i + 1) % n];
        const double fp = (p - mid).dot(dir);
        const double fq = (q - mid).dot(dir);
        if (fp <= 0.0)
            out.push_back(p);
        if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0))
            out.push_back(p + (q - p) * (fp / (fp - fq)));
    }
    return out;
}

/// Voronoi cells of `seeds` clipped to [0,1]^2, using a bucket grid to limit
/// the candidate bisectors.
inline std::vector<std::vector<Point2>> clipped_voronoi_cells(const std::vector<Point2>& seeds)
{
    const int n = static_cast<int>(seeds.size());
    const int g = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n))));
    const double w = 1.0 / g;
    auto bucket_of = [g](double t) { return std::clamp(static_cast<int>(t * g), 0, g - 1); };
    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(g * g));
    for (int i = 0; i < n; ++i)
        buckets[bucket_of(seeds[i].y()) * g + bucket_of(seeds[i].x())].push_back(i);

    const std::vector<Point2> square{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}};
    std::vector<std::vector<Point2>> cells(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const Point2& s = seeds[i];
        std::vector<Point2> poly = square;
        const int bi = bucket_of(s.x());
        const int bj = bucket_of(s.y());
        for (int r = 0; r <= g; ++r) {
            double radius = 0.0;
            for (const auto& p : poly)
                radius = std::max(radius, (p - s).norm());
            if ((r - 1) * w >= 2.0 * radius)
                break;
            for (int j = bj - r; j <= bj + r; ++j) {
                for (int ii = bi - r; ii <= bi + r; ++ii) {
                    if (std::max(std::abs(j - bj), std::abs(ii - bi)) != r)
                        continue;
                    if (ii < 0 || ii >= g || j < 0 || j >= g)
                        continue;
                    for (int other : buckets[j * g + ii]) {
                        if (other == i)
                            continue;
                        const Point2 d = seeds[other] - s;
                        if (d.norm() < 1e-14)
                            throw MeshError("degenerate seed configuration: coincident seeds");
                        poly = clip_half_plane(poly, 0.5 * (s + seeds[other]), d);
                    }
                }
            }
        }
        cells[i] = std::move(poly);
    }
    return cells;
}

/// Merges coincident points (within `tol`) across cells and builds the topology.
inline Mesh weld_cells(const std::vector<std::vector<Point2>>& polys, double tol)
{
    std::vector<Point2> pts;
    std::unordered_map<std::int64_t, std::vector<int>> grid;
    auto key = [](std::int64_t a, std::int64_t b) { return a * 2000003LL + b; };
    auto find_or_add = [&](const Point2& p) {
        const auto gx = static_cast<std::int64_t>(std::floor(p.x() / tol));
        const auto gy = static_cast<std::int64_t>(std::floor(p.y() / tol));
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto it = grid.find(key(gx + dx, gy + dy));
                if (it == grid.end())
                    continue;
                for (int id : it->second)
                    if ((pts[id] - p).norm() <= tol)
                        return id;
            }
        const int id = static_cast<int>(pts.size());
        pts.push_back(p);
        grid[key(gx, gy)].push_back(id);
        return id;
    };

    std::vector<Cell> cells;
    cells.reserve(polys.size());
    for (const auto& poly : polys) {
        Cell c;
        for (const auto& p : poly) {
            const int id = find_or_add(p);
            if (c.vertex_ids.empty() || c.vertex_ids.back() != id)
                c.vertex_ids.push_back(id);
        }
        while (c.vertex_ids.size() > 1 && c.vertex_ids.front() == c.vertex_ids.back())
            c.vertex_ids.pop_back();
        cells.push_back(std::move(c));
    }
    return build_topology(std::move(pts), std::move(cells));
}

inline double unit_uniform(std::mt19937_64& rng)
{
    // 53 random bits; bitwise reproducible across standard libraries.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace detail

/// Clipped Voronoi mesh of [0,1]^2 after `lloyd_iters` centroid relaxations.
/// Deterministic for fixed arguments. Degenerate configurations are retried
/// with a small seeded perturbation before giving up.
inline Mesh generate_voronoi_mesh(int n_seeds, int lloyd_iters, std::uint64_t rng_seed)
{
    if (n_seeds < 1)
        throw InputError("voronoi mesh requires n_seeds >= 1");
    if (lloyd_iters < 0)
        throw InputError("voronoi mesh requires lloyd_iters >= 0");
    std::mt19937_64 rng(rng_seed);
    std::vector<Point2> initial(static_cast<std::size_t>(n_seeds));
    for (auto& s : initial) {
        s.x() = detail::unit_uniform(rng);
        s.y() = detail::unit_uniform(rng);
    }

    constexpr int max_attempts = 8;
    const double spacing = 1.0 / std::sqrt(static_cast<double>(n_seeds));
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<Point2> seeds = initial;
        if (attempt > 0)
            for (auto& s : seeds) {
                s.x() = std::clamp(s.x() + 1e-3 * spacing * (detail::unit_uniform(rng) - 0.5), 0.0, 1.0);
                s.y() = std::clamp(s.y() + 1e-3 * spacing * (detail::unit_uniform(rng) - 0.5), 0.0, 1.0);
            }
        try {
            for (int it = 0; it < lloyd_iters; ++it) {
                const auto cells = detail::clipped_voronoi_cells(seeds);
                for (int i = 0; i < n_seeds; ++i)
                    seeds[i] = polygon_measures(cells[i]).centroid;
            }
            return detail::weld_cells(detail::clipped_voronoi_cells(seeds), 1e-10);
        } catch (const MeshError&) {
            if (attempt + 1 == max_attempts)
                break;
        }
    }
    throw MeshError("degenerate seed configuration: perturbation retry budget exhausted");
}

} // namespace polystokes
