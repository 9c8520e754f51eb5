#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "error.hpp"
#include "mesh.hpp"
#include "polybasis.hpp"
#include "quadrature.hpp"

namespace polystokes {

/// Sparse vector over global DOFs as (dof, value) pairs.
using SparseColumn = std::vector<std::pair<int, double>>;

enum class PsiKind { vertex, edge_tangential, edge_normal, cell };

struct ColumnTag {
    PsiKind kind;
    int entity; ///< vertex, edge or cell id
    int mode;   ///< edge or cell moment index (0 for vertices)
};

inline int dim_Z(const Mesh& mesh, int k)
{
    check_order(k);
    const auto& n = mesh.counts();
    return n.n_vertices_interior + (2 * k - 1) * n.n_edges_interior + (k - 1) * (k - 2) / 2 * n.n_polygons;
}

inline int dim_V0(const Mesh& mesh, int k)
{
    check_order(k);
    const auto& n = mesh.counts();
    return k * (k - 1) * n.n_polygons + 2 * k * n.n_edges_interior;
}

inline int dim_Q(const Mesh& mesh, int k)
{
    check_order(k);
    return poly_dim(k - 1) * mesh.counts().n_polygons - 1;
}

namespace detail {

/// Adds to `col` the cell-gradient values that cancel b^K(., m_beta), beta >= 1, for a
/// field whose only normal moments on cell c are `normal[le](j)`.
inline void add_gradient_correction(const Discretization& disc, int c,
                                    const std::map<int, Eigen::VectorXd>& normal, SparseColumn& col)
{
    const int k = disc.k();
    if (k < 2)
        return;
    const auto& g = disc.geometry(c);
    const auto& R = disc.restrictions(c);
    const int nq = poly_dim(k - 1);
    for (int beta = 1; beta < nq; ++beta) {
        double s = 0.0;
        for (const auto& [le, vals] : normal) {
            const auto& e = g.edges[le];
            s += e.sigma * e.length * R[le].row(beta).head(k).dot(vals);
        }
        if (s != 0.0)
            col.emplace_back(disc.dofs().cell(c, beta - 1), s * g.diameter / g.area);
    }
}

inline void check_edge(const Mesh& mesh, int e, int q, int k)
{
    if (e < 0 || e >= mesh.n_edges())
        throw InputError("edge id out of range");
    if (q < 0 || q >= k)
        throw InputError("edge moment index out of range");
}

} // namespace detail

/// Vertex function: lowest normal moment h <n_e, n_{e,v}> / |e| on every incident edge,
/// with n_{e,v} the direction from v along e rotated by +90 degrees, plus the cell
/// corrections. `scale` defaults to the global mesh size.
inline SparseColumn psi_vertex(const Discretization& disc, int v, double scale)
{
    const Mesh& mesh = disc.mesh();
    if (v < 0 || v >= mesh.n_vertices())
        throw InputError("vertex id out of range");
    const int k = disc.k();
    const auto& pts = mesh.points();
    SparseColumn col;
    std::map<int, double> weight;
    for (int e : mesh.vertex_edges(v)) {
        const Edge& ed = mesh.edges()[e];
        const Point2 dir = (pts[ed.other_vertex(v)] - pts[v]) / ed.length;
        const double w = scale * ed.normal.dot(rotate_ccw(dir)) / ed.length;
        weight[e] = w;
        col.emplace_back(disc.dofs().normal(e, 0), w);
    }
    if (k >= 2)
        for (int c : mesh.vertex_cells(v)) {
            std::map<int, Eigen::VectorXd> normal;
            const auto& ce = mesh.cell_edges(c);
            for (int le = 0; le < static_cast<int>(ce.size()); ++le) {
                const auto it = weight.find(ce[le]);
                if (it == weight.end())
                    continue;
                Eigen::VectorXd vals = Eigen::VectorXd::Zero(k);
                vals[0] = it->second;
                normal[le] = vals;
            }
            detail::add_gradient_correction(disc, c, normal, col);
        }
    return col;
}

inline SparseColumn psi_vertex(const Discretization& disc, int v)
{
    return psi_vertex(disc, v, disc.mesh().h());
}

inline SparseColumn psi_edge_tangential(const Discretization& disc, int e, int q)
{
    detail::check_edge(disc.mesh(), e, q, disc.k());
    return {{disc.dofs().tangential(e, q), 1.0}};
}

inline SparseColumn psi_edge_normal(const Discretization& disc, int e, int q)
{
    const Mesh& mesh = disc.mesh();
    const int k = disc.k();
    detail::check_edge(mesh, e, q, k);
    if (q == 0)
        throw InputError("psi_edge_normal: the lowest normal mode carries flux; use vertex functions");
    SparseColumn col{{disc.dofs().normal(e, q), 1.0}};
    for (int c : mesh.edges()[e].cells) {
        if (c < 0)
            continue;
        Eigen::VectorXd vals = Eigen::VectorXd::Zero(k);
        vals[q] = 1.0;
        detail::add_gradient_correction(disc, c, {{mesh.local_edge_index(c, e), vals}}, col);
    }
    return col;
}

inline SparseColumn psi_cell(const Discretization& disc, int c, int q)
{
    const int k = disc.k();
    if (k < 3)
        throw InputError("psi_cell requires k >= 3");
    if (c < 0 || c >= disc.mesh().n_cells())
        throw InputError("cell id out of range");
    const int n_grad = poly_dim(k - 1) - 1;
    if (q < 0 || q >= poly_dim(k - 3))
        throw InputError("cell moment index out of range");
    return {{disc.dofs().cell(c, n_grad + q), 1.0}};
}

struct DivFreeBasis {
    SparseMatrix N;
    std::vector<ColumnTag> tags;
    double max_divergence = 0.0; ///< max over columns of |B^T psi|_inf / max(1, |psi|_inf)

    int dim() const { return static_cast<int>(N.cols()); }
};

/// Columns: interior vertices, interior edges (tangential modes then normal modes q >= 1),
/// then cell complement modes; each group by entity id. Verified against sys.B.
inline DivFreeBasis build_basis(const Discretization& disc, const SparseSystem& sys,
                                double verify_tol = 1e-10)
{
    const Mesh& mesh = disc.mesh();
    const int k = disc.k();
    DivFreeBasis out;
    std::vector<Triplet> trips;
    auto push = [&](const SparseColumn& col, ColumnTag tag) {
        const int j = static_cast<int>(out.tags.size());
        for (const auto& [row, val] : col)
            trips.emplace_back(row, j, val);
        out.tags.push_back(tag);
    };
    for (int v = 0; v < mesh.n_vertices(); ++v)
        if (!mesh.vertex_is_boundary(v))
            push(psi_vertex(disc, v), {PsiKind::vertex, v, 0});
    for (int e = 0; e < mesh.n_edges(); ++e) {
        if (mesh.edges()[e].is_boundary)
            continue;
        for (int q = 0; q < k; ++q)
            push(psi_edge_tangential(disc, e, q), {PsiKind::edge_tangential, e, q});
        for (int q = 1; q < k; ++q)
            push(psi_edge_normal(disc, e, q), {PsiKind::edge_normal, e, q});
    }
    if (k >= 3)
        for (int c = 0; c < mesh.n_cells(); ++c)
            for (int q = 0; q < poly_dim(k - 3); ++q)
                push(psi_cell(disc, c, q), {PsiKind::cell, c, q});

    out.N.resize(disc.dofs().size(), static_cast<Eigen::Index>(out.tags.size()));
    out.N.setFromTriplets(trips.begin(), trips.end());
    if (out.dim() != dim_Z(mesh, k))
        throw SolverError("divergence-free basis: column count differs from dim Z");

    const SparseMatrix BtN = SparseMatrix(sys.B.transpose()) * out.N;
    for (int j = 0; j < out.N.outerSize(); ++j) {
        double psi_max = 0.0;
        for (SparseMatrix::InnerIterator it(out.N, j); it; ++it)
            psi_max = std::max(psi_max, std::abs(it.value()));
        double div_max = 0.0;
        for (SparseMatrix::InnerIterator it(BtN, j); it; ++it)
            div_max = std::max(div_max, std::abs(it.value()));
        out.max_divergence = std::max(out.max_divergence, div_max / std::max(1.0, psi_max));
    }
    if (out.max_divergence > verify_tol)
        throw SolverError("divergence-free basis verification failed: |B^T psi| = " +
                          std::to_string(out.max_divergence));
    return out;
}

struct Lifting {
    Eigen::VectorXd u_tilde;
    std::vector<int> boundary_vertices; ///< counterclockwise, starting at the smallest id
    std::vector<int> boundary_edges;    ///< boundary_edges[i] joins vertices i and i+1
    std::vector<double> flux;           ///< integral of g.n over each boundary edge
    std::vector<double> C1;             ///< per boundary vertex (loop order)
    std::map<std::pair<int, int>, double> C2; ///< (edge, q) tangential moments
    std::map<std::pair<int, int>, double> C3; ///< (edge, q >= 1) normal moments
};

/// Discrete divergence-free field with the boundary moments of g.
inline Lifting build_lifting(const Discretization& disc, const VectorField& g, double compat_tol = 1e-10)
{
    const Mesh& mesh = disc.mesh();
    const int k = disc.k();
    Lifting L;
    L.u_tilde = Eigen::VectorXd::Zero(disc.dofs().size());

    std::vector<int> next_edge(mesh.n_vertices(), -1);
    int start = -1;
    for (int e = 0; e < mesh.n_edges(); ++e) {
        const Edge& ed = mesh.edges()[e];
        if (!ed.is_boundary)
            continue;
        next_edge[ed.v0] = e;
        if (start < 0 || ed.v0 < start)
            start = ed.v0;
    }
    if (start < 0)
        throw MeshError("mesh has no boundary");
    int v = start;
    do {
        const int e = next_edge[v];
        L.boundary_vertices.push_back(v);
        L.boundary_edges.push_back(e);
        v = mesh.edges()[e].v1;
    } while (v != start);

    double total = 0.0;
    double total_abs = 0.0;
    for (int e : L.boundary_edges) {
        const Edge& ed = mesh.edges()[e];
        const EdgeMonomialBasis eb(ed.midpoint, ed.tangent, ed.length, k - 1);
        const auto rule = gauss_edge(ed, mesh, k + 2);
        Eigen::VectorXd mn = Eigen::VectorXd::Zero(k);
        Eigen::VectorXd mt = Eigen::VectorXd::Zero(k);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Eigen::Vector2d val = g(rule.points[q]);
            const Eigen::VectorXd qv = eb.eval_all(rule.points[q]);
            mn += rule.weights[q] * val.dot(ed.normal) * qv;
            mt += rule.weights[q] * val.dot(ed.tangent) * qv;
        }
        L.flux.push_back(mn[0]);
        total += mn[0];
        total_abs += std::abs(mn[0]);
        for (int q = 0; q < k; ++q)
            L.C2[{e, q}] = mt[q] / ed.length;
        for (int q = 1; q < k; ++q)
            L.C3[{e, q}] = mn[q] / ed.length;
    }
    if (std::abs(total) > compat_tol * std::max(1.0, total_abs))
        throw InputError("boundary data violates compatibility: net flux " + std::to_string(total));

    const int nb = static_cast<int>(L.boundary_vertices.size());
    L.C1.assign(nb, 0.0);
    double tail = 0.0;
    for (int i = nb - 1; i >= 0; --i) {
        tail += L.flux[i];
        L.C1[i] = -tail;
    }
    auto add = [&](const SparseColumn& col, double coef) {
        if (coef == 0.0)
            return;
        for (const auto& [row, val] : col)
            L.u_tilde[row] += coef * val;
    };
    // Unit-scaled vertex functions carry flux -1 through the outgoing and +1 through the
    // incoming boundary edge, so the C1 coefficients telescope to the edge fluxes.
    for (int i = 0; i < nb; ++i)
        add(psi_vertex(disc, L.boundary_vertices[i], 1.0), L.C1[i]);
    for (const auto& [key, c] : L.C2)
        add(psi_edge_tangential(disc, key.first, key.second), c);
    for (const auto& [key, c] : L.C3)
        add(psi_edge_normal(disc, key.first, key.second), c);
    return L;
}

} // namespace polystokes
