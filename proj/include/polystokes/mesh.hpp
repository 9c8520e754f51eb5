#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace polystokes {

using Point2 = Eigen::Vector2d;

/// Rotation by -90 degrees; maps a counterclockwise tangent to the outward normal.
inline Point2 rotate_cw(const Point2& v) { return {v.y(), -v.x()}; }

/// Rotation by +90 degrees.
inline Point2 rotate_ccw(const Point2& v) { return {-v.y(), v.x()}; }

inline double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Polygon measures computed from the shoelace formulas.
struct PolygonMeasures {
    double signed_area = 0.0;
    Point2 centroid = Point2::Zero();
    double diameter = 0.0;
};

inline PolygonMeasures polygon_measures(std::span<const Point2> v)
{
    PolygonMeasures m;
    const std::size_t n = v.size();
    // Shift to the first vertex to limit cancellation in the products.
    const Point2 o = v[0];
    double a2 = 0.0;
    Point2 c = Point2::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 p = v[i] - o;
        const Point2 q = v[(i + 1) % n] - o;
        const double w = cross(p, q);
        a2 += w;
        c += w * (p + q);
    }
    m.signed_area = 0.5 * a2;
    m.centroid = o + c / (3.0 * a2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            m.diameter = std::max(m.diameter, (v[i] - v[j]).norm());
    return m;
}

/// Cross products of consecutive edge vectors must be >= -tol * diameter^2.
inline bool polygon_is_convex(std::span<const Point2> v, double diameter, double rel_tol = 1e-12)
{
    const std::size_t n = v.size();
    const double tol = rel_tol * diameter * diameter;
    for (std::size_t i = 0; i < n; ++i) {
        const Point2 e0 = v[(i + 1) % n] - v[i];
        const Point2 e1 = v[(i + 2) % n] - v[(i + 1) % n];
        if (cross(e0, e1) < -tol)
            return false;
    }
    return true;
}

struct Cell {
    std::vector<int> vertex_ids;
};

/// Mesh edge. Interior edges are stored with v0 < v1 and the tangent pointing
/// from v0 to v1; boundary edges run counterclockwise with respect to the domain.
/// In both cases normal = tangent rotated by -90 degrees.
struct Edge {
    int v0 = -1;
    int v1 = -1;
    std::array<int, 2> cells{-1, -1};
    Point2 normal = Point2::Zero();
    Point2 tangent = Point2::Zero();
    Point2 midpoint = Point2::Zero();
    double length = 0.0;
    bool is_boundary = false;

    int other_vertex(int v) const { return v == v0 ? v1 : v0; }
};

struct MeshCounts {
    int n_polygons = 0;
    int n_edges = 0;
    int n_edges_interior = 0;
    int n_edges_boundary = 0;
    int n_vertices = 0;
    int n_vertices_interior = 0;
    int n_vertices_boundary = 0;
};

class Mesh;
Mesh build_topology(std::vector<Point2> points, std::vector<Cell> cells);

/// Immutable conforming polygonal mesh of a simply connected domain.
class Mesh {
public:
    const std::vector<Point2>& points() const { return points_; }
    const std::vector<Cell>& cells() const { return cells_; }
    const std::vector<Edge>& edges() const { return edges_; }

    int n_cells() const { return static_cast<int>(cells_.size()); }
    int n_edges() const { return static_cast<int>(edges_.size()); }
    int n_vertices() const { return static_cast<int>(points_.size()); }

    /// Global edge ids of cell c; local edge i joins local vertices i and i+1.
    const std::vector<int>& cell_edges(int c) const { return cell_edges_[c]; }
    /// sigma = n_K . n_e for the local edges of cell c.
    const std::vector<int>& cell_edge_signs(int c) const { return cell_edge_signs_[c]; }
    const std::vector<int>& vertex_edges(int v) const { return vertex_edges_[v]; }
    const std::vector<int>& vertex_cells(int v) const { return vertex_cells_[v]; }
    bool vertex_is_boundary(int v) const { return vertex_is_boundary_[v] != 0; }

    double cell_area(int c) const { return measures_[c].signed_area; }
    const Point2& cell_centroid(int c) const { return measures_[c].centroid; }
    double cell_diameter(int c) const { return measures_[c].diameter; }
    std::vector<Point2> cell_points(int c) const
    {
        std::vector<Point2> p;
        p.reserve(cells_[c].vertex_ids.size());
        for (int v : cells_[c].vertex_ids)
            p.push_back(points_[v]);
        return p;
    }

    /// Maximum cell diameter.
    double h() const { return h_; }
    const MeshCounts& counts() const { return counts_; }

    /// Local index of global edge e within cell c, or -1.
    int local_edge_index(int c, int e) const
    {
        const auto& ce = cell_edges_[c];
        const auto it = std::find(ce.begin(), ce.end(), e);
        return it == ce.end() ? -1 : static_cast<int>(it - ce.begin());
    }

private:
    friend Mesh build_topology(std::vector<Point2> points, std::vector<Cell> cells);

    std::vector<Point2> points_;
    std::vector<Cell> cells_;
    std::vector<Edge> edges_;
    std::vector<std::vector<int>> cell_edges_;
    std::vector<std::vector<int>> cell_edge_signs_;
    std::vector<std::vector<int>> vertex_edges_;
    std::vector<std::vector<int>> vertex_cells_;
    std::vector<char> vertex_is_boundary_;
    std::vector<PolygonMeasures> measures_;
    MeshCounts counts_;
    double h_ = 0.0;
};

/// Derives edges, orientations, incidences and counts from a cell list.
/// Throws MeshError on invalid indices, clockwise or non-convex cells,
/// non-manifold edges, dangling vertices or a non simply connected tiling.
inline Mesh build_topology(std::vector<Point2> points, std::vector<Cell> cells)
{
    Mesh m;
    const int nv = static_cast<int>(points.size());
    const int nc = static_cast<int>(cells.size());
    if (nc == 0)
        throw MeshError("mesh has no cells");
    for (const auto& p : points)
        if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
            throw MeshError("non-finite vertex coordinate");

    m.measures_.resize(nc);
    std::vector<char> used(nv, 0);
    for (int c = 0; c < nc; ++c) {
        const auto& ids = cells[c].vertex_ids;
        if (ids.size() < 3)
            throw MeshError("cell " + std::to_string(c) + " has fewer than 3 vertices");
        for (int v : ids) {
            if (v < 0 || v >= nv)
                throw MeshError("cell " + std::to_string(c) + ": vertex index out of range");
            used[v] = 1;
        }
        std::vector<int> sorted(ids);
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw MeshError("cell " + std::to_string(c) + " has repeated vertices");

        std::vector<Point2> poly;
        for (int v : ids)
            poly.push_back(points[v]);
        const auto meas = polygon_measures(poly);
        if (!(meas.signed_area > 0.0))
            throw MeshError("orientation: cell " + std::to_string(c) + " is not counterclockwise");
        if (!polygon_is_convex(poly, meas.diameter))
            throw MeshError("cell " + std::to_string(c) + " is not convex");
        m.measures_[c] = meas;
        m.h_ = std::max(m.h_, meas.diameter);
    }
    for (int v = 0; v < nv; ++v)
        if (!used[v])
            throw MeshError("dangling vertex " + std::to_string(v));

    // Edge discovery in cell order; key is the sorted vertex pair.
    std::map<std::pair<int, int>, int> edge_id;
    m.cell_edges_.resize(nc);
    m.cell_edge_signs_.resize(nc);
    std::vector<std::vector<std::pair<int, int>>> incident; // (cell, traversal a)
    for (int c = 0; c < nc; ++c) {
        const auto& ids = cells[c].vertex_ids;
        const int n = static_cast<int>(ids.size());
        for (int i = 0; i < n; ++i) {
            const int a = ids[i];
            const int b = ids[(i + 1) % n];
            const auto key = std::minmax(a, b);
            auto [it, inserted] = edge_id.try_emplace({key.first, key.second},
                                                      static_cast<int>(incident.size()));
            if (inserted)
                incident.emplace_back();
            auto& inc = incident[it->second];
            if (inc.size() == 2)
                throw MeshError("non-manifold edge (" + std::to_string(key.first) + ", " +
                                std::to_string(key.second) + ") shared by more than two cells");
            if (inc.size() == 1 && inc[0].second == a)
                throw MeshError("orientation: cells " + std::to_string(inc[0].first) + " and " +
                                std::to_string(c) + " traverse a shared edge in the same direction");
            inc.emplace_back(c, a);
            m.cell_edges_[c].push_back(it->second);
        }
    }

    const int ne = static_cast<int>(incident.size());
    m.edges_.resize(ne);
    m.vertex_edges_.assign(nv, {});
    m.vertex_is_boundary_.assign(nv, 0);
    for (const auto& [key, e] : edge_id) {
        Edge& edge = m.edges_[e];
        const auto& inc = incident[e];
        if (inc.size() == 1) {
            edge.is_boundary = true;
            edge.v0 = inc[0].second;
            edge.v1 = edge.v0 == key.first ? key.second : key.first;
            edge.cells = {inc[0].first, -1};
        } else {
            edge.v0 = key.first;
            edge.v1 = key.second;
            edge.cells = {inc[0].first, inc[1].first};
        }
        const Point2 d = points[edge.v1] - points[edge.v0];
        edge.length = d.norm();
        edge.tangent = d / edge.length;
        edge.normal = rotate_cw(edge.tangent);
        edge.midpoint = 0.5 * (points[edge.v0] + points[edge.v1]);
    }
    for (int e = 0; e < ne; ++e) {
        m.vertex_edges_[m.edges_[e].v0].push_back(e);
        m.vertex_edges_[m.edges_[e].v1].push_back(e);
        if (m.edges_[e].is_boundary) {
            m.vertex_is_boundary_[m.edges_[e].v0] = 1;
            m.vertex_is_boundary_[m.edges_[e].v1] = 1;
        }
    }
    for (int c = 0; c < nc; ++c) {
        const auto& ids = cells[c].vertex_ids;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const Edge& edge = m.edges_[m.cell_edges_[c][i]];
            m.cell_edge_signs_[c].push_back(edge.v0 == ids[i] ? 1 : -1);
        }
    }
    m.vertex_cells_.assign(nv, {});
    for (int c = 0; c < nc; ++c)
        for (int v : cells[c].vertex_ids)
            m.vertex_cells_[v].push_back(c);

    MeshCounts& k = m.counts_;
    k.n_polygons = nc;
    k.n_edges = ne;
    k.n_vertices = nv;
    for (const auto& e : m.edges_)
        (e.is_boundary ? k.n_edges_boundary : k.n_edges_interior)++;
    for (int v = 0; v < nv; ++v)
        (m.vertex_is_boundary_[v] ? k.n_vertices_boundary : k.n_vertices_interior)++;

    for (int v = 0; v < nv; ++v) {
        if (!m.vertex_is_boundary_[v])
            continue;
        int nb = 0;
        for (int e : m.vertex_edges_[v])
            nb += m.edges_[e].is_boundary ? 1 : 0;
        if (nb != 2)
            throw MeshError("boundary vertex " + std::to_string(v) +
                            " does not have exactly two boundary edges");
    }
    if (k.n_vertices_boundary != k.n_edges_boundary ||
        k.n_polygons - k.n_edges_interior + k.n_vertices_interior != 1)
        throw MeshError("mesh does not tile a simply connected domain");

    m.points_ = std::move(points);
    m.cells_ = std::move(cells);
    return m;
}

/// n x n axis-aligned squares of side 1/n tiling [0,1]^2.
inline Mesh generate_uniform_square_mesh(int n)
{
    if (n < 1)
        throw InputError("uniform mesh requires n >= 1");
    std::vector<Point2> pts;
    pts.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            pts.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
    auto id = [n](int i, int j) { return j * (n + 1) + i; };
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(n * n));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            cells.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)}});
    return build_topology(std::move(pts), std::move(cells));
}

struct RegularityReport {
    bool pass = true;
    bool all_convex = true;
    double min_edge_ratio = 1.0; ///< min over cells of (shortest edge / h_K)
    int worst_cell = -1;
    std::vector<int> failing_cells;
};

/// Checks convexity and h_e >= rho * h_K on every cell.
inline RegularityReport validate_regularity(const Mesh& mesh, double rho)
{
    RegularityReport r;
    r.min_edge_ratio = std::numeric_limits<double>::infinity();
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const auto pts = mesh.cell_points(c);
        const double hk = mesh.cell_diameter(c);
        const bool convex = polygon_is_convex(pts, hk);
        double min_edge = std::numeric_limits<double>::infinity();
        for (int e : mesh.cell_edges(c))
            min_edge = std::min(min_edge, mesh.edges()[e].length);
        const double ratio = min_edge / hk;
        if (ratio < r.min_edge_ratio) {
            r.min_edge_ratio = ratio;
            r.worst_cell = c;
        }
        if (!convex)
            r.all_convex = false;
        if (!convex || ratio < rho)
            r.failing_cells.push_back(c);
    }
    r.pass = r.failing_cells.empty();
    return r;
}

/// Text format: "NV NC", NV lines "x y", NC lines "m i1 ... im"; '#' starts a comment.
inline void write_mesh(const Mesh& mesh, std::ostream& os)
{
    os << mesh.n_vertices() << ' ' << mesh.n_cells() << '\n';
    os << std::setprecision(17);
    for (const auto& p : mesh.points())
        os << p.x() << ' ' << p.y() << '\n';
    for (const auto& c : mesh.cells()) {
        os << c.vertex_ids.size();
        for (int v : c.vertex_ids)
            os << ' ' << v;
        os << '\n';
    }
}

inline void write_mesh(const Mesh& mesh, const std::string& path)
{
    std::ofstream os(path);
    if (!os)
        throw InputError("cannot open " + path + " for writing");
    write_mesh(mesh, os);
}

inline Mesh read_mesh(std::istream& is)
{
    std::stringstream clean;
    std::string line;
    while (std::getline(is, line)) {
        if (const auto pos = line.find('#'); pos != std::string::npos)
            line.erase(pos);
        clean << line << '\n';
    }
    auto fail = [](const std::string& what) { throw MeshError("malformed mesh file: " + what); };
    long nv = 0, nc = 0;
    if (!(clean >> nv >> nc) || nv < 0 || nc < 0)
        fail("bad header");
    std::vector<Point2> pts(static_cast<std::size_t>(nv));
    for (auto& p : pts)
        if (!(clean >> p.x() >> p.y()))
            fail("truncated vertex list");
    std::vector<Cell> cells(static_cast<std::size_t>(nc));
    for (auto& c : cells) {
        long m = 0;
        if (!(clean >> m) || m < 3)
            fail("bad cell vertex count");
        c.vertex_ids.resize(static_cast<std::size_t>(m));
        for (auto& v : c.vertex_ids) {
            long id = 0;
            if (!(clean >> id))
                fail("truncated cell list");
            if (id < 0 || id >= nv)
                throw MeshError("malformed mesh file: vertex index out of range");
            v = static_cast<int>(id);
        }
    }
    std::string extra;
    if (clean >> extra)
        fail("trailing data");
    return build_topology(std::move(pts), std::move(cells));
}

inline Mesh read_mesh(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw InputError("cannot open " + path);
    return read_mesh(is);
}

} // namespace polystokes
