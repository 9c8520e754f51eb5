#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "mesh.hpp"
#include "polybasis.hpp"
#include "quadrature.hpp"

namespace polystokes {

/// Edge of a cell in counterclockwise cell order, carrying the global edge frame.
struct LocalEdge {
    Point2 a = Point2::Zero(); ///< start vertex in cell order
    Point2 b = Point2::Zero(); ///< end vertex in cell order
    Point2 midpoint = Point2::Zero();
    double length = 0.0;
    Point2 normal = Point2::Zero();  ///< global n_e
    Point2 tangent = Point2::Zero(); ///< global t_e
    Point2 outward = Point2::Zero(); ///< n_K on this edge
    int sigma = 1;                   ///< n_K . n_e
    int global_id = -1;
};

struct CellGeometry {
    std::vector<Point2> vertices;
    std::vector<LocalEdge> edges;
    double area = 0.0;
    double diameter = 0.0;
    double perimeter = 0.0;
    Point2 centroid = Point2::Zero();

    int n_edges() const { return static_cast<int>(edges.size()); }
    CellMonomialBasis basis(int degree) const { return {centroid, diameter, degree}; }
    EdgeMonomialBasis edge_basis(int le, int degree) const
    {
        const auto& e = edges[le];
        return {e.midpoint, e.tangent, e.length, degree};
    }
};

/// Geometry of a counterclockwise convex polygon. `signs[i]` = +1 when the global
/// frame of local edge i follows the cell orientation (default for standalone cells).
inline CellGeometry make_cell_geometry(std::span<const Point2> vertices, std::span<const int> signs = {},
                                       std::span<const int> global_ids = {})
{
    CellGeometry g;
    g.vertices.assign(vertices.begin(), vertices.end());
    const auto meas = polygon_measures(vertices);
    if (!(meas.signed_area > 0.0))
        throw MeshError("orientation: cell is not counterclockwise");
    g.area = meas.signed_area;
    g.centroid = meas.centroid;
    g.diameter = meas.diameter;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
        LocalEdge e;
        e.a = vertices[i];
        e.b = vertices[(i + 1) % n];
        e.midpoint = 0.5 * (e.a + e.b);
        e.length = (e.b - e.a).norm();
        const Point2 t = (e.b - e.a) / e.length;
        e.outward = rotate_cw(t);
        e.sigma = signs.empty() ? 1 : signs[i];
        e.tangent = e.sigma * t;
        e.normal = e.sigma * e.outward;
        e.global_id = global_ids.empty() ? -1 : global_ids[i];
        g.perimeter += e.length;
        g.edges.push_back(e);
    }
    return g;
}

inline CellGeometry cell_geometry(const Mesh& mesh, int c)
{
    const auto pts = mesh.cell_points(c);
    return make_cell_geometry(pts, mesh.cell_edge_signs(c), mesh.cell_edges(c));
}

/// Local DOF ordering: per edge (cell order) k normal then k tangential moments,
/// then the split cell moments (gradient members first, then complement members).
struct LocalDofLayout {
    int k = 1;
    int n_edges = 0;

    int n_grad() const { return poly_dim(k - 1) - 1; }
    int n_perp() const { return poly_dim(k - 3); }
    int n_cell() const { return k * (k - 1); }
    int normal(int le, int j) const { return le * 2 * k + j; }
    int tangential(int le, int j) const { return le * 2 * k + k + j; }
    int cell(int j) const { return 2 * k * n_edges + j; }
    int cell_grad(int j) const { return cell(j); }
    int cell_perp(int j) const { return cell(n_grad() + j); }
    int size() const { return 2 * k * n_edges + n_cell(); }
};

inline void check_order(int k)
{
    if (k < 1 || k > 3)
        throw InputError("polynomial order k must be 1, 2 or 3");
}

inline LocalDofLayout dof_layout(const CellGeometry& g, int k)
{
    check_order(k);
    return {k, g.n_edges()};
}

/// Restriction of the cell monomials of degree <= k-1 to each edge basis M_{k-1}(e).
inline std::vector<Eigen::MatrixXd> edge_restrictions(const CellGeometry& g, int k)
{
    const auto basis = g.basis(k - 1);
    std::vector<Eigen::MatrixXd> out;
    out.reserve(g.edges.size());
    for (int le = 0; le < g.n_edges(); ++le)
        out.push_back(restriction_matrix(basis, g.edge_basis(le, k - 1)));
    return out;
}

/// Matrices of the H1 projector onto P_k(K)^2. Vector monomial i = 2a + c is m_a e_c.
struct Projector {
    LocalDofLayout layout;
    Eigen::MatrixXd D;      ///< DOFs of the vector monomials (N_K x n_p)
    Eigen::MatrixXd B;      ///< right-hand side (n_p x N_K)
    Eigen::MatrixXd G;      ///< gradient Gram with the two constraint rows (n_p x n_p)
    Eigen::MatrixXd G_grad; ///< pure gradient Gram, constraint rows zero
    Eigen::MatrixXd pi_star;
};

inline Projector build_projector(const CellGeometry& g, int k)
{
    Projector P;
    P.layout = dof_layout(g, k);
    const auto& L = P.layout;
    const int nk = poly_dim(k);
    const int np = 2 * nk;
    const int nd = poly_dim(k - 2);
    const int ndof = L.size();
    const double h = g.diameter;
    const auto basis = g.basis(k);
    const VectorPolySplit split(k);
    const Eigen::VectorXd I = cell_monomial_integrals(g.vertices, g.centroid, h, 2 * k);
    auto I_at = [&I](MultiIndex a, MultiIndex b) { return I[flat_index({a.ax + b.ax, a.ay + b.ay})]; };

    P.D = Eigen::MatrixXd::Zero(ndof, np);
    Eigen::VectorXd boundary_moments = Eigen::VectorXd::Zero(nk);
    for (int le = 0; le < g.n_edges(); ++le) {
        const auto& e = g.edges[le];
        const auto eb = g.edge_basis(le, k - 1);
        const auto rule = gauss_segment(e.a, e.b, k + 2);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Eigen::VectorXd m = basis.eval_all(rule.points[q]);
            const Eigen::VectorXd qv = eb.eval_all(rule.points[q]);
            const double w = rule.weights[q] / e.length;
            boundary_moments += rule.weights[q] * m;
            for (int a = 0; a < nk; ++a)
                for (int c = 0; c < 2; ++c)
                    for (int j = 0; j < k; ++j) {
                        P.D(L.normal(le, j), 2 * a + c) += w * m[a] * e.normal[c] * qv[j];
                        P.D(L.tangential(le, j), 2 * a + c) += w * m[a] * e.tangent[c] * qv[j];
                    }
        }
    }
    const Eigen::MatrixXd& S = split.basis();
    for (int j = 0; j < split.size(); ++j)
        for (int a = 0; a < nk; ++a)
            for (int c = 0; c < 2; ++c) {
                double v = 0.0;
                for (int b = 0; b < nd; ++b)
                    v += S(c * nd + b, j) * I_at(multi_index(a), multi_index(b));
                P.D(L.cell(j), 2 * a + c) = v / g.area;
            }

    P.G_grad = Eigen::MatrixXd::Zero(np, np);
    for (int a = 0; a < nk; ++a)
        for (int b = 0; b < nk; ++b) {
            const auto ma = multi_index(a);
            const auto mb = multi_index(b);
            double v = 0.0;
            if (ma.ax > 0 && mb.ax > 0)
                v += ma.ax * mb.ax * I_at({ma.ax - 1, ma.ay}, {mb.ax - 1, mb.ay});
            if (ma.ay > 0 && mb.ay > 0)
                v += ma.ay * mb.ay * I_at({ma.ax, ma.ay - 1}, {mb.ax, mb.ay - 1});
            v /= h * h;
            P.G_grad(2 * a, 2 * b) = v;
            P.G_grad(2 * a + 1, 2 * b + 1) = v;
        }
    P.G = P.G_grad;
    for (int c = 0; c < 2; ++c)
        for (int b = 0; b < nk; ++b)
            P.G(c, 2 * b + c) = boundary_moments[b];

    P.B = Eigen::MatrixXd::Zero(np, ndof);
    const auto restr = edge_restrictions(g, k);
    for (int a = 1; a < nk; ++a) {
        const auto ma = multi_index(a);
        for (int c = 0; c < 2; ++c) {
            const int row = 2 * a + c;
            // -int_K v . Laplacian(m_a e_c), via the split expansion of the Laplacian.
            if (nd > 0) {
                Eigen::VectorXd lap = Eigen::VectorXd::Zero(2 * nd);
                for (const auto& [idx, coef] : basis.laplacian(a))
                    lap[c * nd + idx] += coef;
                const Eigen::VectorXd d = split.expand(lap);
                for (int j = 0; j < split.size(); ++j)
                    P.B(row, L.cell(j)) -= g.area * d[j];
            }
            // int_{dK} v . (grad(m_a e_c) n_K) through the global edge frame.
            for (int le = 0; le < g.n_edges(); ++le) {
                const auto& e = g.edges[le];
                Eigen::VectorXd s = Eigen::VectorXd::Zero(poly_dim(k - 1));
                if (ma.ax > 0)
                    s[flat_index({ma.ax - 1, ma.ay})] += ma.ax * e.outward.x() / h;
                if (ma.ay > 0)
                    s[flat_index({ma.ax, ma.ay - 1})] += ma.ay * e.outward.y() / h;
                const Eigen::VectorXd r = restr[le].transpose() * s;
                for (int j = 0; j < k; ++j) {
                    P.B(row, L.normal(le, j)) += r[j] * e.length * e.normal[c];
                    P.B(row, L.tangential(le, j)) += r[j] * e.length * e.tangent[c];
                }
            }
        }
    }
    for (int c = 0; c < 2; ++c)
        for (int le = 0; le < g.n_edges(); ++le) {
            const auto& e = g.edges[le];
            P.B(c, L.normal(le, 0)) += e.length * e.normal[c];
            P.B(c, L.tangential(le, 0)) += e.length * e.tangent[c];
        }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(P.G);
    if (!lu.isInvertible())
        throw SolverError("singular projector matrix: degenerate cell geometry");
    P.pi_star = lu.solve(P.B);
    return P;
}

enum class Stabilization {
    identity, ///< sum_i chi_i(v) chi_i(w)
    diagonal  ///< chi_i weighted by max(1, a^K(Pi phi_i, Pi phi_i))
};

/// a_h^K = a^K(Pi v, Pi w) + S^K((I - Pi) v, (I - Pi) w).
inline Eigen::MatrixXd local_stiffness(const Projector& P, Stabilization stab = Stabilization::diagonal)
{
    const Eigen::Index n = P.D.rows();
    const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n) - P.D * P.pi_star;
    const Eigen::MatrixXd C = P.pi_star.transpose() * P.G_grad * P.pi_star;
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    if (stab == Stabilization::diagonal)
        for (Eigen::Index i = 0; i < n; ++i)
            w[i] = std::max(1.0, C(i, i));
    const Eigen::MatrixXd A = C + R.transpose() * w.asDiagonal() * R;
    return 0.5 * (A + A.transpose());
}

/// Entries b^K(phi_i, m_beta) = -int_K m_beta div(phi_i), m_beta in M_{k-1}(K), computed
/// from the DOFs alone: -int_{dK} m_beta phi.n_K + int_K phi . grad m_beta.
inline Eigen::MatrixXd local_divergence(const CellGeometry& g, int k)
{
    const auto L = dof_layout(g, k);
    const int nq = poly_dim(k - 1);
    const auto restr = edge_restrictions(g, k);
    Eigen::MatrixXd Bd = Eigen::MatrixXd::Zero(L.size(), nq);
    for (int le = 0; le < g.n_edges(); ++le) {
        const auto& e = g.edges[le];
        for (int beta = 0; beta < nq; ++beta)
            for (int j = 0; j < k; ++j)
                Bd(L.normal(le, j), beta) -= e.sigma * e.length * restr[le](beta, j);
    }
    for (int beta = 1; beta < nq; ++beta)
        Bd(L.cell_grad(beta - 1), beta) += g.area / g.diameter;
    return Bd;
}

/// Componentwise L2 projection of f onto P_{k-2}(K)^2 in scaled monomials
/// ([x coefficients; y coefficients]).
inline Eigen::VectorXd l2_projection_vector(const CellGeometry& g, int degree, const VectorField& f,
                                            int quad_order)
{
    const int nd = poly_dim(degree);
    const auto basis = g.basis(degree);
    const Eigen::VectorXd I = cell_monomial_integrals(g.vertices, g.centroid, g.diameter, 2 * degree);
    Eigen::MatrixXd M(nd, nd);
    for (int a = 0; a < nd; ++a)
        for (int b = 0; b < nd; ++b) {
            const auto ma = multi_index(a);
            const auto mb = multi_index(b);
            M(a, b) = I[flat_index({ma.ax + mb.ax, ma.ay + mb.ay})];
        }
    const auto rule = gauss_polygon(g.vertices, g.centroid, quad_order);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nd, 2);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const Eigen::VectorXd m = basis.eval_all(rule.points[q]);
        const Eigen::Vector2d fv = f(rule.points[q]);
        rhs.col(0) += rule.weights[q] * fv.x() * m;
        rhs.col(1) += rule.weights[q] * fv.y() * m;
    }
    const Eigen::MatrixXd coef = M.ldlt().solve(rhs);
    Eigen::VectorXd out(2 * nd);
    out << coef.col(0), coef.col(1);
    return out;
}

/// Local load vector: k = 1 pairs Pi_0 f with the boundary average of v;
/// k > 1 pairs Pi_{k-2} f with v through the cell moments.
inline Eigen::VectorXd local_load(const CellGeometry& g, int k, const VectorField& f)
{
    const auto L = dof_layout(g, k);
    Eigen::VectorXd F = Eigen::VectorXd::Zero(L.size());
    const int order = 2 * k + 2;
    if (k == 1) {
        const auto rule = gauss_polygon(g.vertices, g.centroid, order);
        const Eigen::Vector2d mean = rule.integrate([&](const Point2& x) { return f(x); }) / g.area;
        for (int le = 0; le < g.n_edges(); ++le) {
            const auto& e = g.edges[le];
            const double s = g.area * e.length / g.perimeter;
            F[L.normal(le, 0)] = s * mean.dot(e.normal);
            F[L.tangential(le, 0)] = s * mean.dot(e.tangent);
        }
        return F;
    }
    const VectorPolySplit split(k);
    const Eigen::VectorXd d = split.expand(l2_projection_vector(g, k - 2, f, order));
    for (int j = 0; j < split.size(); ++j)
        F[L.cell(j)] = g.area * d[j];
    return F;
}

/// DOFs of an analytic field by quadrature (edges: k+2 Gauss points, cell: exactness 2k+2).
inline Eigen::VectorXd interpolate_local(const CellGeometry& g, int k, const VectorField& v)
{
    const auto L = dof_layout(g, k);
    Eigen::VectorXd dofs = Eigen::VectorXd::Zero(L.size());
    for (int le = 0; le < g.n_edges(); ++le) {
        const auto& e = g.edges[le];
        const auto eb = g.edge_basis(le, k - 1);
        const auto rule = gauss_segment(e.a, e.b, k + 2);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Eigen::Vector2d val = v(rule.points[q]);
            const Eigen::VectorXd qv = eb.eval_all(rule.points[q]);
            const double w = rule.weights[q] / e.length;
            for (int j = 0; j < k; ++j) {
                dofs[L.normal(le, j)] += w * val.dot(e.normal) * qv[j];
                dofs[L.tangential(le, j)] += w * val.dot(e.tangent) * qv[j];
            }
        }
    }
    if (L.n_cell() > 0) {
        const VectorPolySplit split(k);
        const auto basis = g.basis(k);
        const auto rule = gauss_polygon(g.vertices, g.centroid, 2 * k + 2);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            const Eigen::Vector2d val = v(rule.points[q]);
            const Point2 xi = basis.scaled(rule.points[q]);
            for (int j = 0; j < split.size(); ++j)
                dofs[L.cell(j)] += rule.weights[q] * val.dot(split.eval(j, xi)) / g.area;
        }
    }
    return dofs;
}

} // namespace polystokes
