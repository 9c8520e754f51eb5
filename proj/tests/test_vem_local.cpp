#include <polystokes/vem_local.hpp>

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace polystokes;

namespace {

struct RandomCell {
    std::vector<Point2> verts;
    std::vector<int> signs;
    CellGeometry geom;
};

RandomCell random_cell(int n, std::mt19937_64& rng)
{
    RandomCell c;
    c.verts = oracle::random_convex_polygon(n, rng);
    std::bernoulli_distribution flip(0.5);
    for (int i = 0; i < n; ++i)
        c.signs.push_back(flip(rng) ? -1 : 1);
    c.geom = make_cell_geometry(c.verts, c.signs);
    return c;
}

/// Vector polynomial sum coef[2a + c] m_a e_c over the scaled monomials of the cell.
oracle::VecPoly vector_monomial_combo(const Eigen::VectorXd& coef, const CellGeometry& g, int k)
{
    oracle::VecPoly v;
    for (int a = 0; a < poly_dim(k); ++a) {
        const auto ma = multi_index(a);
        const auto m = oracle::scaled_monomial(ma.ax, ma.ay, g.centroid, g.diameter);
        v.x = v.x + coef[2 * a] * m;
        v.y = v.y + coef[2 * a + 1] * m;
    }
    return v;
}

Eigen::VectorXd random_vector(int n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i)
        v[i] = U(rng);
    return v;
}

/// DOF vector of the constant field c on the cell.
Eigen::VectorXd constant_dofs(const CellGeometry& g, int k, const Eigen::Vector2d& c)
{
    const auto L = dof_layout(g, k);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(L.size());
    // Mean of s^j over [-1/2, 1/2].
    auto mean = [](int j) { return j % 2 ? 0.0 : 1.0 / ((j + 1) * std::pow(2.0, j)); };
    for (int le = 0; le < g.n_edges(); ++le)
        for (int j = 0; j < k; ++j) {
            d[L.normal(le, j)] = c.dot(g.edges[le].normal) * mean(j);
            d[L.tangential(le, j)] = c.dot(g.edges[le].tangent) * mean(j);
        }
    // Cell moments of a constant against h grad m and m x_perp, by the exact oracle.
    const auto fields = oracle::cell_moment_fields(k, g.centroid, g.diameter);
    for (std::size_t j = 0; j < fields.size(); ++j)
        d[L.cell(static_cast<int>(j))] =
            oracle::polygon_integral(oracle::dot(fields[j], c), g.vertices) / g.area;
    return d;
}

const std::vector<Point2> unit_square{{0, 0}, {1, 0}, {1, 1}, {0, 1}};

} // namespace

TEST(VemLocal, DofCounts)
{
    std::mt19937_64 rng(1);
    EXPECT_EQ(dof_layout(make_cell_geometry(unit_square), 1).size(), 8);
    EXPECT_EQ(dof_layout(random_cell(5, rng).geom, 2).size(), 22);
    EXPECT_EQ(dof_layout(random_cell(6, rng).geom, 3).size(), 42);
    EXPECT_THROW(dof_layout(make_cell_geometry(unit_square), 0), InputError);
    EXPECT_THROW(dof_layout(make_cell_geometry(unit_square), 4), InputError);
}

TEST(VemLocal, ClockwiseCellRejected)
{
    const std::vector<Point2> cw{{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    EXPECT_THROW(make_cell_geometry(cw), MeshError);
}

TEST(VemLocal, PolynomialReproductionUnitSquare)
{
    const auto g = make_cell_geometry(unit_square);
    for (int k = 1; k <= 3; ++k) {
        const auto P = build_projector(g, k);
        const Eigen::Index n = P.pi_star.rows();
        EXPECT_LT((P.pi_star * P.D - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12) << "k=" << k;
    }
}

TEST(VemLocal, DofMatrixMatchesOracle)
{
    std::mt19937_64 rng(2);
    for (int k = 1; k <= 3; ++k) {
        const auto c = random_cell(3 + 2 * k, rng);
        const auto P = build_projector(c.geom, k);
        for (int i = 0; i < P.D.cols(); ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(P.D.cols());
            e[i] = 1.0;
            const auto exact = oracle::polynomial_dofs(vector_monomial_combo(e, c.geom, k), c.verts, c.signs, k);
            EXPECT_LT((P.D.col(i) - exact).cwiseAbs().maxCoeff(), 1e-13) << "k=" << k << " column " << i;
        }
    }
}

TEST(VemLocal, ProjectorReproducesRandomPolynomials)
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 12; ++trial) {
        const int k = 1 + trial % 3;
        const auto c = random_cell(3 + trial % 6, rng);
        const auto P = build_projector(c.geom, k);
        const Eigen::VectorXd coef = random_vector(2 * poly_dim(k), rng);
        const auto dofs = oracle::polynomial_dofs(vector_monomial_combo(coef, c.geom, k), c.verts, c.signs, k);
        EXPECT_LT((P.pi_star * dofs - coef).cwiseAbs().maxCoeff(), 1e-11) << "trial " << trial;
    }
}

TEST(VemLocal, ProjectorPreservesConstants)
{
    std::mt19937_64 rng(4);
    const auto c = random_cell(5, rng);
    for (int k = 1; k <= 3; ++k) {
        const auto P = build_projector(c.geom, k);
        const Eigen::Vector2d v(0.7, -1.3);
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(2 * poly_dim(k));
        expected.head<2>() = v;
        EXPECT_LT((P.pi_star * constant_dofs(c.geom, k, v) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(VemLocal, ReproducesQuadraticOnPentagon)
{
    std::mt19937_64 rng(5);
    const auto c = random_cell(5, rng);
    const oracle::VecPoly v{oracle::Poly::x() * oracle::Poly::x(), oracle::Poly::x() * oracle::Poly::y()};
    const auto P = build_projector(c.geom, 2);
    const Eigen::VectorXd coef = P.pi_star * oracle::polynomial_dofs(v, c.verts, c.signs, 2);
    const auto rec = vector_monomial_combo(coef, c.geom, 2);
    for (const Point2& x : c.verts) {
        EXPECT_NEAR(rec.x(x), v.x(x), 1e-12);
        EXPECT_NEAR(rec.y(x), v.y(x), 1e-12);
    }
}

TEST(VemLocal, StiffnessSymmetricWithTwoDimensionalKernel)
{
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 9; ++trial) {
        const int k = 1 + trial % 3;
        const auto c = random_cell(3 + trial % 6, rng);
        const Eigen::MatrixXd A = local_stiffness(build_projector(c.geom, k));
        EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-13 * A.cwiseAbs().maxCoeff());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        const auto& ev = es.eigenvalues();
        const double tol = 1e-10 * ev.maxCoeff();
        int zeros = 0;
        for (int i = 0; i < ev.size(); ++i) {
            EXPECT_GT(ev[i], -tol);
            zeros += std::abs(ev[i]) <= tol;
        }
        EXPECT_EQ(zeros, 2) << "trial " << trial;
        EXPECT_LT((A * constant_dofs(c.geom, k, {1.0, 0.0})).norm(), 1e-11);
        EXPECT_LT((A * constant_dofs(c.geom, k, {0.0, 1.0})).norm(), 1e-11);
    }
}

TEST(VemLocal, StiffnessUnitSquareEigenvalues)
{
    const auto g = make_cell_geometry(unit_square);
    const Eigen::MatrixXd A = local_stiffness(build_projector(g, 1));
    ASSERT_EQ(A.rows(), 8);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    EXPECT_NEAR(es.eigenvalues()[0], 0.0, 1e-13);
    EXPECT_NEAR(es.eigenvalues()[1], 0.0, 1e-13);
    EXPECT_GT(es.eigenvalues()[2], 1e-3);
}

TEST(VemLocal, IdentityAndDiagonalStabilizationAgreeForLinearsOnSquare)
{
    const auto P = build_projector(make_cell_geometry(unit_square), 1);
    EXPECT_LT((local_stiffness(P, Stabilization::identity) - local_stiffness(P, Stabilization::diagonal))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-15);
}

TEST(VemLocal, StiffnessConsistency)
{
    std::mt19937_64 rng(7);
    for (auto stab : {Stabilization::identity, Stabilization::diagonal})
        for (int k = 1; k <= 3; ++k) {
            const auto c = random_cell(4 + k, rng);
            const Eigen::MatrixXd A = local_stiffness(build_projector(c.geom, k), stab);
            const auto p = vector_monomial_combo(random_vector(2 * poly_dim(k), rng), c.geom, k);
            const auto w = vector_monomial_combo(random_vector(2 * poly_dim(k), rng), c.geom, k);
            const auto dp = oracle::polynomial_dofs(p, c.verts, c.signs, k);
            const auto dw = oracle::polynomial_dofs(w, c.verts, c.signs, k);
            const double exact = oracle::polygon_integral(oracle::grad_inner(p, w), c.verts);
            EXPECT_NEAR(dp.dot(A * dw), exact, 1e-11 * std::max(1.0, std::abs(exact))) << "k=" << k;
        }
}

TEST(VemLocal, StabilitySandwich)
{
    std::mt19937_64 rng(8);
    for (int k = 1; k <= 3; ++k) {
        const auto c = random_cell(6, rng);
        const auto P = build_projector(c.geom, k);
        const Eigen::MatrixXd A = local_stiffness(P);
        const Eigen::MatrixXd C = P.pi_star.transpose() * P.G_grad * P.pi_star;
        Eigen::MatrixXd K(A.rows(), 2);
        K.col(0) = constant_dofs(c.geom, k, {1, 0});
        K.col(1) = constant_dofs(c.geom, k, {0, 1});
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(K);
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), 2);
        double lo = 1e300, hi = 0.0;
        for (int t = 0; t < 100; ++t) {
            Eigen::VectorXd v = random_vector(static_cast<int>(A.rows()), rng);
            v -= Q * (Q.transpose() * v);
            const double den = v.dot(C * v);
            if (den <= 1e-12 * v.squaredNorm())
                continue;
            const double ratio = v.dot(A * v) / den;
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
        }
        EXPECT_GE(lo, 0.9) << "k=" << k;
        EXPECT_TRUE(std::isfinite(hi));
    }
}

TEST(VemLocal, DivergenceConstantColumn)
{
    std::mt19937_64 rng(9);
    const auto c = random_cell(6, rng);
    for (int k = 1; k <= 3; ++k) {
        const auto L = dof_layout(c.geom, k);
        const Eigen::MatrixXd Bd = local_divergence(c.geom, k);
        ASSERT_EQ(Bd.rows(), L.size());
        ASSERT_EQ(Bd.cols(), poly_dim(k - 1));
        for (int le = 0; le < c.geom.n_edges(); ++le) {
            const auto& e = c.geom.edges[le];
            EXPECT_NEAR(Bd(L.normal(le, 0), 0), -e.sigma * e.length, 1e-14);
            for (int j = 0; j < k; ++j) {
                EXPECT_EQ(Bd(L.tangential(le, j), 0), 0.0);
                EXPECT_EQ(Bd(L.tangential(le, j), Bd.cols() - 1), 0.0);
            }
            for (int j = 1; j < k; ++j)
                EXPECT_NEAR(Bd(L.normal(le, j), 0), 0.0, 1e-14);
        }
        for (int j = 0; j < L.n_cell(); ++j)
            EXPECT_EQ(Bd(L.cell(j), 0), 0.0);
        for (int j = 0; j < L.n_perp(); ++j)
            EXPECT_EQ(Bd.row(L.cell_perp(j)).cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(VemLocal, DivergenceMatchesQuadratureOracle)
{
    std::mt19937_64 rng(10);
    const auto check = [&](const std::vector<Point2>& verts, const std::vector<int>& signs, int k,
                           const oracle::VecPoly& v) {
        const auto g = make_cell_geometry(verts, signs);
        const Eigen::MatrixXd Bd = local_divergence(g, k);
        const auto dofs = oracle::polynomial_dofs(v, verts, signs, k);
        for (int beta = 0; beta < poly_dim(k - 1); ++beta) {
            const auto mb = multi_index(beta);
            const auto m = oracle::scaled_monomial(mb.ax, mb.ay, g.centroid, g.diameter);
            const double exact = -oracle::polygon_integral(m * oracle::div(v), verts);
            EXPECT_NEAR(dofs.dot(Bd.col(beta)), exact, 1e-11) << "k=" << k << " beta=" << beta;
        }
    };
    check(unit_square, {1, 1, 1, 1}, 2, {oracle::Poly::x(), (-1.0) * oracle::Poly::y()});
    check(unit_square, {1, 1, 1, 1}, 2, {oracle::Poly::x() * oracle::Poly::x(), oracle::Poly::y()});
    for (int k = 1; k <= 3; ++k) {
        const auto c = random_cell(4 + k, rng);
        check(c.verts, c.signs, k, vector_monomial_combo(random_vector(2 * poly_dim(k), rng), c.geom, k));
    }
}

TEST(VemLocal, LoadZeroAndConstant)
{
    const auto g = make_cell_geometry(unit_square);
    for (int k = 1; k <= 3; ++k)
        EXPECT_EQ(local_load(g, k, [](const Point2&) { return Eigen::Vector2d::Zero(); }).norm(), 0.0);

    std::mt19937_64 rng(12);
    const auto c = random_cell(5, rng);
    const Eigen::Vector2d f(0.4, -2.0);
    const auto F = local_load(c.geom, 2, [&](const Point2&) { return f; });
    const auto L = dof_layout(c.geom, 2);
    for (int i = 0; i < 2 * 2 * c.geom.n_edges(); ++i)
        EXPECT_EQ(F[i], 0.0);
    EXPECT_NEAR(F[L.cell(0)], c.geom.area * f.x(), 1e-14);
    EXPECT_NEAR(F[L.cell(1)], c.geom.area * f.y(), 1e-14);
}

TEST(VemLocal, LoadLinearOnUnitSquare)
{
    const auto g = make_cell_geometry(unit_square);
    const auto F = local_load(g, 1, [](const Point2&) { return Eigen::Vector2d(1.0, 0.0); });
    const auto L = dof_layout(g, 1);
    for (int le = 0; le < 4; ++le) {
        EXPECT_NEAR(F[L.normal(le, 0)], 0.25 * g.edges[le].normal.x(), 1e-15);
        EXPECT_NEAR(F[L.tangential(le, 0)], 0.25 * g.edges[le].tangent.x(), 1e-15);
    }
}

TEST(VemLocal, LoadConsistency)
{
    std::mt19937_64 rng(13);
    for (int k = 2; k <= 3; ++k) {
        const auto c = random_cell(6, rng);
        const auto fc = random_vector(2 * poly_dim(k - 2), rng);
        const auto f = vector_monomial_combo(
            [&] {
                Eigen::VectorXd full = Eigen::VectorXd::Zero(2 * poly_dim(k));
                full.head(fc.size()) = fc;
                return full;
            }(),
            c.geom, k);
        const auto v = vector_monomial_combo(random_vector(2 * poly_dim(k), rng), c.geom, k);
        const auto F = local_load(c.geom, k, [&](const Point2& x) { return Eigen::Vector2d(f.x(x), f.y(x)); });
        const double exact = oracle::polygon_integral(oracle::dot(f, v), c.verts);
        EXPECT_NEAR(F.dot(oracle::polynomial_dofs(v, c.verts, c.signs, k)), exact, 1e-11) << "k=" << k;
    }
}

TEST(VemLocal, InterpolationOfPolynomials)
{
    std::mt19937_64 rng(14);
    for (int k = 1; k <= 3; ++k) {
        const auto c = random_cell(5, rng);
        const auto coef = random_vector(2 * poly_dim(k), rng);
        const auto v = vector_monomial_combo(coef, c.geom, k);
        const auto dofs = interpolate_local(c.geom, k, [&](const Point2& x) { return Eigen::Vector2d(v.x(x), v.y(x)); });
        EXPECT_LT((dofs - oracle::polynomial_dofs(v, c.verts, c.signs, k)).cwiseAbs().maxCoeff(), 1e-13);
        EXPECT_LT((build_projector(c.geom, k).pi_star * dofs - coef).cwiseAbs().maxCoeff(), 1e-11);
    }
}

TEST(VemLocal, InterpolationExamples)
{
    const auto g = make_cell_geometry(unit_square);
    const Eigen::Vector2d c(2.0, -0.5);
    for (int k = 1; k <= 3; ++k) {
        const auto d = interpolate_local(g, k, [&](const Point2&) { return c; });
        EXPECT_LT((d - constant_dofs(g, k, c)).cwiseAbs().maxCoeff(), 1e-14);
    }
    const auto d = interpolate_local(g, 1, [](const Point2& x) { return Eigen::Vector2d(std::sin(x.y()), 0.0); });
    EXPECT_NEAR(d[dof_layout(g, 1).tangential(0, 0)], 0.0, 1e-16);
    EXPECT_NEAR(d[dof_layout(g, 1).tangential(2, 0)], -std::sin(1.0), 1e-15);
}
