#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "mesh.hpp"

namespace polystokes {

/// Gauss-Legendre rule on [-1, 1] with n nodes (exact to degree 2n-1).
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;
};

namespace detail {

/// Returns (P_n(x), P_n'(x)) by the three-term recurrence.
inline std::pair<double, double> legendre(int n, double x)
{
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

} // namespace detail

inline GaussLegendre gauss_legendre(int n)
{
    if (n < 1)
        throw InputError("Gauss-Legendre rule needs at least one node");
    GaussLegendre r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = detail::legendre(n, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16)
                break;
        }
        const double dp = detail::legendre(n, x).second;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1)
        r.nodes[n / 2] = 0.0;
    return r;
}

struct QuadratureRule {
    std::vector<Point2> points;
    std::vector<double> weights;

    std::size_t size() const { return points.size(); }
    template <class F>
    auto integrate(F&& f) const
    {
        using T = std::decay_t<decltype(f(points[0]))>;
        T acc = weights[0] * f(points[0]);
        for (std::size_t i = 1; i < points.size(); ++i)
            acc += weights[i] * f(points[i]);
        return acc;
    }
};

/// n-point Gauss-Legendre rule on the segment [a, b].
inline QuadratureRule gauss_segment(const Point2& a, const Point2& b, int n_points)
{
    const auto gl = gauss_legendre(n_points);
    const double len = (b - a).norm();
    QuadratureRule q;
    for (int i = 0; i < n_points; ++i) {
        const double t = 0.5 * (gl.nodes[i] + 1.0);
        q.points.push_back(a + t * (b - a));
        q.weights.push_back(0.5 * len * gl.weights[i]);
    }
    return q;
}

inline QuadratureRule gauss_edge(const Edge& e, const Mesh& mesh, int n_points)
{
    return gauss_segment(mesh.points()[e.v0], mesh.points()[e.v1], n_points);
}

/// Collapsed (Duffy) tensor rule on the triangle (a, b, c) built from `gl`.
inline void append_triangle_rule(QuadratureRule& q, const Point2& a, const Point2& b, const Point2& c,
                                 const GaussLegendre& gl)
{
    const double jac = std::abs(cross(b - a, c - a));
    const std::size_t n = gl.nodes.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double u = 0.5 * (gl.nodes[i] + 1.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double t = 0.5 * (gl.nodes[j] + 1.0);
            const double v = (1.0 - u) * t;
            q.points.push_back(a + u * (b - a) + v * (c - a));
            q.weights.push_back(jac * (1.0 - u) * 0.25 * gl.weights[i] * gl.weights[j]);
        }
    }
}

/// Rule on a convex polygon by fan triangulation from `center`; exact to total degree `order`.
inline QuadratureRule gauss_polygon(std::span<const Point2> vertices, const Point2& center, int order)
{
    if (order < 0)
        throw InputError("unsupported quadrature order");
    // Collapsed direction raises the degree by one: need order + 1 <= 2n - 1.
    const int n = (order + 3) / 2;
    const auto gl = gauss_legendre(n);
    QuadratureRule q;
    const std::size_t nv = vertices.size();
    for (std::size_t i = 0; i < nv; ++i)
        append_triangle_rule(q, center, vertices[i], vertices[(i + 1) % nv], gl);
    return q;
}

inline QuadratureRule gauss_cell(const Mesh& mesh, int c, int order)
{
    const auto pts = mesh.cell_points(c);
    return gauss_polygon(pts, mesh.cell_centroid(c), order);
}

} // namespace polystokes
