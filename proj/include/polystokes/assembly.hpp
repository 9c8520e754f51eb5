#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mesh.hpp"
#include "polybasis.hpp"
#include "quadrature.hpp"
#include "vem_local.hpp"

namespace polystokes {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Global numbering: edge blocks first (k normal then k tangential moments per edge,
/// by edge id), then cell blocks of k(k-1) moments by cell id.
class DofMap {
public:
    DofMap(const Mesh& mesh, int k) : k_(k), n_edges_(mesh.n_edges()), n_cells_(mesh.n_cells())
    {
        check_order(k);
        interior_.assign(size(), 1);
        for (int e = 0; e < n_edges_; ++e)
            if (mesh.edges()[e].is_boundary)
                for (int j = 0; j < 2 * k_; ++j)
                    interior_[e * 2 * k_ + j] = 0;
        for (int i = 0; i < size(); ++i)
            (interior_[i] ? interior_ids_ : boundary_ids_).push_back(i);
    }

    int k() const { return k_; }
    int size() const { return 2 * k_ * n_edges_ + k_ * (k_ - 1) * n_cells_; }
    int normal(int e, int j) const { return e * 2 * k_ + j; }
    int tangential(int e, int j) const { return e * 2 * k_ + k_ + j; }
    int cell(int c, int j) const { return 2 * k_ * n_edges_ + c * k_ * (k_ - 1) + j; }

    bool is_interior(int dof) const { return interior_[dof] != 0; }
    const std::vector<char>& interior_mask() const { return interior_; }
    const std::vector<int>& interior_dofs() const { return interior_ids_; }
    const std::vector<int>& boundary_dofs() const { return boundary_ids_; }
    int n_interior() const { return static_cast<int>(interior_ids_.size()); }

    /// Local-to-global map following LocalDofLayout.
    std::vector<int> cell_dofs(const Mesh& mesh, int c) const
    {
        std::vector<int> out;
        for (int e : mesh.cell_edges(c)) {
            for (int j = 0; j < k_; ++j)
                out.push_back(normal(e, j));
            for (int j = 0; j < k_; ++j)
                out.push_back(tangential(e, j));
        }
        for (int j = 0; j < k_ * (k_ - 1); ++j)
            out.push_back(cell(c, j));
        return out;
    }

private:
    int k_;
    int n_edges_;
    int n_cells_;
    std::vector<char> interior_;
    std::vector<int> interior_ids_;
    std::vector<int> boundary_ids_;
};

/// Piecewise P_{k-1} pressures stored without the mean constraint.
struct PressureSpace {
    int k = 1;
    int per_cell = 1;
    int n_cells = 0;
    double domain_area = 0.0;
    std::vector<Eigen::MatrixXd> mass;    ///< per-cell Gram of M_{k-1}(K)
    std::vector<Eigen::VectorXd> moments; ///< per-cell integrals of M_{k-1}(K)

    int n_raw() const { return per_cell * n_cells; }
    int dim() const { return n_raw() - 1; }
    int index(int c, int beta) const { return c * per_cell + beta; }
};

/// Mesh, order, DOF numbering and per-cell geometric data shared by every stage.
/// The mesh must outlive the discretization.
class Discretization {
public:
    Discretization(const Mesh& mesh, int k) : mesh_(&mesh), k_(k), dofs_(mesh, k)
    {
        const int nc = mesh.n_cells();
        geometry_.reserve(nc);
        restrictions_.reserve(nc);
        pressure_.k = k;
        pressure_.per_cell = poly_dim(k - 1);
        pressure_.n_cells = nc;
        for (int c = 0; c < nc; ++c) {
            geometry_.push_back(cell_geometry(mesh, c));
            const auto& g = geometry_.back();
            restrictions_.push_back(edge_restrictions(g, k));
            const Eigen::VectorXd I =
                cell_monomial_integrals(g.vertices, g.centroid, g.diameter, 2 * (k - 1));
            const int n = pressure_.per_cell;
            Eigen::MatrixXd M(n, n);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const auto ma = multi_index(a);
                    const auto mb = multi_index(b);
                    M(a, b) = I[flat_index({ma.ax + mb.ax, ma.ay + mb.ay})];
                }
            pressure_.mass.push_back(M);
            pressure_.moments.push_back(I.head(n));
            pressure_.domain_area += g.area;
        }
    }

    const Mesh& mesh() const { return *mesh_; }
    int k() const { return k_; }
    const DofMap& dofs() const { return dofs_; }
    const PressureSpace& pressure() const { return pressure_; }
    const CellGeometry& geometry(int c) const { return geometry_[c]; }
    /// restrictions(c)[le](beta, j): coefficient of q_j in m_beta restricted to local edge le.
    const std::vector<Eigen::MatrixXd>& restrictions(int c) const { return restrictions_[c]; }

private:
    const Mesh* mesh_;
    int k_;
    DofMap dofs_;
    PressureSpace pressure_;
    std::vector<CellGeometry> geometry_;
    std::vector<std::vector<Eigen::MatrixXd>> restrictions_;
};

struct SparseSystem {
    SparseMatrix A; ///< n_dof x n_dof stiffness a_h
    SparseMatrix B; ///< n_dof x n_q_raw, entries b_h(phi_i, m_beta)
    Eigen::VectorXd F;
};

/// Scatters the local stiffness, divergence and load of every cell, in cell order.
inline SparseSystem assemble(const Discretization& disc, const VectorField& f,
                             Stabilization stab = Stabilization::diagonal)
{
    const Mesh& mesh = disc.mesh();
    const int k = disc.k();
    const auto& dofs = disc.dofs();
    const auto& ps = disc.pressure();
    std::vector<Triplet> ta;
    std::vector<Triplet> tb;
    SparseSystem sys;
    sys.F = Eigen::VectorXd::Zero(dofs.size());
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const auto& g = disc.geometry(c);
        const auto map = dofs.cell_dofs(mesh, c);
        const auto P = build_projector(g, k);
        const Eigen::MatrixXd Ak = local_stiffness(P, stab);
        const Eigen::MatrixXd Bk = local_divergence(g, k);
        const Eigen::VectorXd Fk = local_load(g, k, f);
        const int n = static_cast<int>(map.size());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                if (Ak(i, j) != 0.0)
                    ta.emplace_back(map[i], map[j], Ak(i, j));
            for (int b = 0; b < ps.per_cell; ++b)
                if (Bk(i, b) != 0.0)
                    tb.emplace_back(map[i], ps.index(c, b), Bk(i, b));
            sys.F[map[i]] += Fk[i];
        }
    }
    sys.A.resize(dofs.size(), dofs.size());
    sys.A.setFromTriplets(ta.begin(), ta.end());
    sys.B.resize(dofs.size(), ps.n_raw());
    sys.B.setFromTriplets(tb.begin(), tb.end());
    return sys;
}

/// Sum over cells of the integral of the pressure, divided by |Omega|.
inline double pressure_mean(const PressureSpace& ps, const Eigen::VectorXd& coeffs)
{
    double s = 0.0;
    for (int c = 0; c < ps.n_cells; ++c)
        s += coeffs.segment(ps.index(c, 0), ps.per_cell).dot(ps.moments[c]);
    return s / ps.domain_area;
}

/// Subtracts the mean from the constant coefficient of every cell.
inline Eigen::VectorXd project_zero_mean(const PressureSpace& ps, Eigen::VectorXd coeffs)
{
    const double m = pressure_mean(ps, coeffs);
    for (int c = 0; c < ps.n_cells; ++c)
        coeffs[ps.index(c, 0)] -= m;
    return coeffs;
}

/// Global interpolation I_h v; edge moments are computed once per mesh edge.
inline Eigen::VectorXd interpolate(const Discretization& disc, const VectorField& v)
{
    const Mesh& mesh = disc.mesh();
    const int k = disc.k();
    const auto& dofs = disc.dofs();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dofs.size());
    for (int e = 0; e < mesh.n_edges(); ++e) {
        const Edge& ed = mesh.edges()[e];
        const EdgeMonomialBasis eb(ed.midpoint, ed.tangent, ed.length, k - 1);
        const auto rule = gauss_edge(ed, mesh, k + 2);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Eigen::Vector2d val = v(rule.points[q]);
            const Eigen::VectorXd qv = eb.eval_all(rule.points[q]);
            const double w = rule.weights[q] / ed.length;
            for (int j = 0; j < k; ++j) {
                out[dofs.normal(e, j)] += w * val.dot(ed.normal) * qv[j];
                out[dofs.tangential(e, j)] += w * val.dot(ed.tangent) * qv[j];
            }
        }
    }
    if (k > 1)
        for (int c = 0; c < mesh.n_cells(); ++c) {
            const auto& g = disc.geometry(c);
            const Eigen::VectorXd loc = interpolate_local(g, k, v);
            const auto L = dof_layout(g, k);
            for (int j = 0; j < L.n_cell(); ++j)
                out[dofs.cell(c, j)] = loc[L.cell(j)];
        }
    return out;
}

/// Coefficients of the elementwise L2 projection of p onto P_{k-1}.
inline Eigen::VectorXd project_pressure(const Discretization& disc, const ScalarField& p)
{
    const auto& ps = disc.pressure();
    const int k = disc.k();
    Eigen::VectorXd out(ps.n_raw());
    for (int c = 0; c < ps.n_cells; ++c) {
        const auto& g = disc.geometry(c);
        const auto basis = g.basis(k - 1);
        const auto rule = gauss_polygon(g.vertices, g.centroid, 2 * k + 2);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ps.per_cell);
        for (std::size_t q = 0; q < rule.size(); ++q)
            rhs += rule.weights[q] * p(rule.points[q]) * basis.eval_all(rule.points[q]);
        out.segment(ps.index(c, 0), ps.per_cell) = ps.mass[c].ldlt().solve(rhs);
    }
    return out;
}

/// Coordinate text dump "row col value", one nonzero per line.
inline void write_coo(const SparseMatrix& M, std::ostream& os)
{
    os.precision(17);
    for (int col = 0; col < M.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(M, col); it; ++it)
            os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

} // namespace polystokes
