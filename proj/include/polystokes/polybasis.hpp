#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mesh.hpp"
#include "quadrature.hpp"

namespace polystokes {

using VectorField = std::function<Eigen::Vector2d(const Point2&)>;
using ScalarField = std::function<double(const Point2&)>;

/// Number of bivariate monomials of degree <= d (0 for d < 0).
constexpr int poly_dim(int d) { return d < 0 ? 0 : (d + 1) * (d + 2) / 2; }

/// Exponent pair of a bivariate monomial; graded lexicographic enumeration
/// 1, x, y, x^2, xy, y^2, ...
struct MultiIndex {
    int ax = 0;
    int ay = 0;
    constexpr int degree() const { return ax + ay; }
    constexpr bool operator==(const MultiIndex&) const = default;
};

constexpr int flat_index(MultiIndex a)
{
    const int n = a.degree();
    return n * (n + 1) / 2 + a.ay;
}

constexpr MultiIndex multi_index(int idx)
{
    int n = 0;
    while (poly_dim(n) <= idx)
        ++n;
    const int ay = idx - n * (n + 1) / 2;
    return {n - ay, ay};
}

inline double ipow(double x, int n)
{
    double r = 1.0;
    for (int i = 0; i < n; ++i)
        r *= x;
    return r;
}

/// Scaled monomials m_a(x) = ((x - x_K) / h_K)^a on a cell.
class CellMonomialBasis {
public:
    CellMonomialBasis(Point2 centroid, double diameter, int degree)
        : centroid_(std::move(centroid)), diameter_(diameter), degree_(degree)
    {
    }

    const Point2& centroid() const { return centroid_; }
    double diameter() const { return diameter_; }
    int degree() const { return degree_; }
    int size() const { return poly_dim(degree_); }

    Point2 scaled(const Point2& x) const { return (x - centroid_) / diameter_; }

    double eval(int idx, const Point2& x) const
    {
        check(idx);
        const auto a = multi_index(idx);
        const Point2 s = scaled(x);
        return ipow(s.x(), a.ax) * ipow(s.y(), a.ay);
    }

    Eigen::VectorXd eval_all(const Point2& x) const
    {
        const Point2 s = scaled(x);
        Eigen::VectorXd v(size());
        for (int i = 0; i < size(); ++i) {
            const auto a = multi_index(i);
            v[i] = ipow(s.x(), a.ax) * ipow(s.y(), a.ay);
        }
        return v;
    }

    Eigen::Vector2d grad(int idx, const Point2& x) const
    {
        check(idx);
        const auto a = multi_index(idx);
        const Point2 s = scaled(x);
        const double gx = a.ax == 0 ? 0.0 : a.ax * ipow(s.x(), a.ax - 1) * ipow(s.y(), a.ay);
        const double gy = a.ay == 0 ? 0.0 : a.ay * ipow(s.x(), a.ax) * ipow(s.y(), a.ay - 1);
        return Eigen::Vector2d(gx, gy) / diameter_;
    }

    /// Laplacian of m_idx as (index, coefficient) pairs over lower-degree members.
    std::vector<std::pair<int, double>> laplacian(int idx) const
    {
        check(idx);
        const auto a = multi_index(idx);
        const double s = 1.0 / (diameter_ * diameter_);
        std::vector<std::pair<int, double>> out;
        if (a.ax >= 2)
            out.emplace_back(flat_index({a.ax - 2, a.ay}), s * a.ax * (a.ax - 1));
        if (a.ay >= 2)
            out.emplace_back(flat_index({a.ax, a.ay - 2}), s * a.ay * (a.ay - 1));
        return out;
    }

private:
    void check(int idx) const
    {
        if (idx < 0 || idx >= size())
            throw InputError("monomial index out of range");
    }

    Point2 centroid_;
    double diameter_;
    int degree_;
};

/// Scaled monomials q_j = ((s - s_mid) / h_e)^j along an edge with a fixed tangent.
class EdgeMonomialBasis {
public:
    EdgeMonomialBasis(Point2 midpoint, Point2 tangent, double length, int degree)
        : midpoint_(std::move(midpoint)), tangent_(std::move(tangent)), length_(length), degree_(degree)
    {
    }

    int size() const { return degree_ + 1; }
    int degree() const { return degree_; }
    double length() const { return length_; }
    const Point2& midpoint() const { return midpoint_; }
    const Point2& tangent() const { return tangent_; }

    /// Local coordinate in [-1/2, 1/2].
    double tau(const Point2& x) const { return (x - midpoint_).dot(tangent_) / length_; }
    Point2 point(double tau) const { return midpoint_ + tau * length_ * tangent_; }

    double eval(int j, const Point2& x) const { return ipow(tau(x), j); }
    Eigen::VectorXd eval_all(const Point2& x) const
    {
        Eigen::VectorXd v(size());
        const double t = tau(x);
        double p = 1.0;
        for (int j = 0; j < size(); ++j, p *= t)
            v[j] = p;
        return v;
    }

private:
    Point2 midpoint_;
    Point2 tangent_;
    double length_;
    int degree_;
};

/// Integrals of every scaled monomial of degree <= `degree` over a convex polygon.
inline Eigen::VectorXd cell_monomial_integrals(std::span<const Point2> vertices,
                                               const Point2& centroid, double diameter, int degree)
{
    const CellMonomialBasis basis(centroid, diameter, degree);
    const auto rule = gauss_polygon(vertices, centroid, degree);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(basis.size());
    for (std::size_t q = 0; q < rule.size(); ++q)
        out += rule.weights[q] * basis.eval_all(rule.points[q]);
    return out;
}

inline double integrate_monomial_cell(const Mesh& mesh, int c, MultiIndex a)
{
    const auto pts = mesh.cell_points(c);
    return cell_monomial_integrals(pts, mesh.cell_centroid(c), mesh.cell_diameter(c), a.degree())
        [flat_index(a)];
}

/// Entry of the monomial mass matrix: integral of m_a m_b over the cell.
inline double integrate_poly_product_cell(const Mesh& mesh, int c, MultiIndex a, MultiIndex b)
{
    return integrate_monomial_cell(mesh, c, {a.ax + b.ax, a.ay + b.ay});
}

/// Integral of q_j over the edge; odd powers vanish by symmetry about the midpoint.
inline double integrate_monomial_edge(double length, int j)
{
    return j % 2 == 1 ? 0.0 : length / ((j + 1) * std::pow(2.0, j));
}

/// Coefficient matrix R with m_a|_e = sum_j R(a, j) q_j for every cell monomial of
/// degree <= cell.degree(); computed by sampling at Chebyshev points.
inline Eigen::MatrixXd restriction_matrix(const CellMonomialBasis& cell, const EdgeMonomialBasis& edge)
{
    if (edge.degree() < cell.degree())
        throw InputError("edge basis degree too low for exact restriction");
    const int n = edge.size();
    Eigen::MatrixXd vander(n, n);
    Eigen::MatrixXd values(n, cell.size());
    for (int i = 0; i < n; ++i) {
        const double t = 0.5 * std::cos((2.0 * i + 1.0) * std::numbers::pi / (2.0 * n));
        const Point2 x = edge.point(t);
        for (int j = 0; j < n; ++j)
            vander(i, j) = ipow(t, j);
        values.row(i) = cell.eval_all(x).transpose();
    }
    return vander.partialPivLu().solve(values).transpose();
}

/// The splitting P_{k-2}(K)^2 = grad P_{k-1}(K) + x_perp P_{k-3}(K) in scaled coordinates.
/// Members: grad_j = h_K grad m_{j+1} for m in M_{k-1} \ {1}, then perp_j = m_j (xi_y, -xi_x)
/// for m in M_{k-3}. Vector polynomials are stored as [x coefficients; y coefficients] over
/// the scaled monomials of degree <= k-2.
class VectorPolySplit {
public:
    explicit VectorPolySplit(int k) : k_(k)
    {
        const int nd = poly_dim(k - 2);
        n_grad_ = poly_dim(k - 1) - 1;
        n_perp_ = poly_dim(k - 3);
        basis_ = Eigen::MatrixXd::Zero(2 * nd, n_grad_ + n_perp_);
        for (int j = 0; j < n_grad_; ++j) {
            const auto a = multi_index(j + 1);
            if (a.ax > 0)
                basis_(flat_index({a.ax - 1, a.ay}), j) = a.ax;
            if (a.ay > 0)
                basis_(nd + flat_index({a.ax, a.ay - 1}), j) = a.ay;
        }
        for (int j = 0; j < n_perp_; ++j) {
            const auto a = multi_index(j);
            basis_(flat_index({a.ax, a.ay + 1}), n_grad_ + j) = 1.0;
            basis_(nd + flat_index({a.ax + 1, a.ay}), n_grad_ + j) = -1.0;
        }
        if (size() > 0)
            lu_.compute(basis_);
    }

    int k() const { return k_; }
    int n_grad() const { return n_grad_; }
    int n_perp() const { return n_perp_; }
    int size() const { return n_grad_ + n_perp_; }
    int poly_size() const { return poly_dim(k_ - 2); }
    const Eigen::MatrixXd& basis() const { return basis_; }

    /// Coefficients of a vector polynomial of degree <= k-2 in the split basis.
    Eigen::VectorXd expand(const Eigen::VectorXd& vec_poly) const
    {
        if (size() == 0)
            return {};
        return lu_.solve(vec_poly);
    }

    Eigen::Vector2d eval(int j, const Point2& xi) const
    {
        const int nd = poly_size();
        Eigen::Vector2d v = Eigen::Vector2d::Zero();
        for (int i = 0; i < nd; ++i) {
            const auto a = multi_index(i);
            const double m = ipow(xi.x(), a.ax) * ipow(xi.y(), a.ay);
            v.x() += basis_(i, j) * m;
            v.y() += basis_(nd + i, j) * m;
        }
        return v;
    }

private:
    int k_;
    int n_grad_ = 0;
    int n_perp_ = 0;
    Eigen::MatrixXd basis_;
    Eigen::FullPivLU<Eigen::MatrixXd> lu_;
};

} // namespace polystokes
