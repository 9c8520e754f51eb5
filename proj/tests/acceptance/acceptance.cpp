// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <polystokes/polystokes.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace polystokes;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Eigen::Vector2d zero_field(const Point2&) { return Eigen::Vector2d::Zero(); }

/// Collects failure messages for one criterion.
struct Check {
    std::vector<std::string> failures;
    std::ostringstream info;

    void require(bool ok, const std::string& what)
    {
        if (!ok)
            failures.push_back(what);
    }
};

std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(3) << v;
    return os.str();
}

Mesh uniform(int n) { return generate_uniform_square_mesh(n); }

// ---------------------------------------------------------------------------

void dimension_tables(Check& c)
{
    struct Row {
        int n, k, v0, q, z;
    };
    const Row table[] = {
        {4, 1, 48, 15, 33},   {8, 1, 224, 63, 161},   {16, 1, 960, 255, 705},   {32, 1, 3968, 1023, 2945},
        {4, 2, 128, 47, 81},  {8, 2, 576, 191, 385},  {16, 2, 2432, 767, 1665}, {32, 2, 9984, 3071, 6913},
        {4, 3, 240, 95, 145}, {8, 3, 1056, 383, 673}, {16, 3, 4416, 1535, 2881}, {32, 3, 18048, 6143, 11905},
    };
    double worst = 0.0;
    for (const auto& r : table) {
        const auto t0 = Clock::now();
        const Mesh m = uniform(r.n);
        const Discretization disc(m, r.k);
        const auto sys = assemble(disc, zero_field);
        const auto basis = build_basis(disc, sys);
        const double t = seconds_since(t0);
        worst = std::max(worst, t);
        const std::string tag = "h=1/" + std::to_string(r.n) + " k=" + std::to_string(r.k);
        c.require(disc.dofs().n_interior() == r.v0, tag + " dimV0 " + std::to_string(disc.dofs().n_interior()));
        c.require(disc.pressure().dim() == r.q, tag + " dimQ " + std::to_string(disc.pressure().dim()));
        c.require(basis.dim() == r.z, tag + " dimZ " + std::to_string(basis.dim()));
        c.require(t < 1.0, tag + " took " + fmt(t) + " s");
    }
    c.info << "12 rows, slowest " << fmt(worst) << " s";
}

void mesh_counts(Check& c)
{
    const int table[][4] = {{4, 16, 24, 9}, {8, 64, 112, 49}, {16, 256, 480, 225}, {32, 1024, 1984, 961}};
    for (const auto& r : table) {
        const auto& n = uniform(r[0]).counts();
        c.require(n.n_polygons == r[1] && n.n_edges_interior == r[2] && n.n_vertices_interior == r[3],
                  "uniform 1/" + std::to_string(r[0]) + " counts");
    }
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto& n = generate_voronoi_mesh(256, 100, seed).counts();
        c.require(n.n_polygons - n.n_edges_interior + n.n_vertices_interior == 1,
                  "voronoi seed " + std::to_string(seed) + " Euler identity");
    }
    c.info << "4 uniform levels, 20 Voronoi seeds (256 cells)";
}

void divfree_basis(Check& c)
{
    std::vector<std::pair<std::string, Mesh>> meshes;
    for (int n : {4, 8, 16, 32})
        meshes.emplace_back("uniform:" + std::to_string(n), uniform(n));
    for (int n : {16, 64, 256, 1024})
        meshes.emplace_back("voronoi:" + std::to_string(n), generate_voronoi_mesh(n, 100, 42));
    double worst = 0.0;
    int cholesky = 0;
    for (const auto& [name, m] : meshes)
        for (int k = 1; k <= 3; ++k) {
            const Discretization disc(m, k);
            const auto sys = assemble(disc, zero_field);
            const auto basis = build_basis(disc, sys, 1.0);
            const SparseMatrix BtN = SparseMatrix(sys.B.transpose()) * basis.N;
            for (int j = 0; j < basis.N.outerSize(); ++j) {
                double psi = 0.0, div = 0.0;
                for (SparseMatrix::InnerIterator it(basis.N, j); it; ++it)
                    psi = std::max(psi, std::abs(it.value()));
                for (SparseMatrix::InnerIterator it(BtN, j); it; ++it)
                    div = std::max(div, std::abs(it.value()));
                worst = std::max(worst, div / std::max(1.0, psi));
            }
            const SparseMatrix K = SparseMatrix(basis.N.transpose()) * sys.A * basis.N;
            const std::string tag = name + " k=" + std::to_string(k);
            if (K.rows() <= 200) {
                Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(K)};
                c.require(llt.info() == Eigen::Success, tag + " dense Cholesky failed");
                ++cholesky;
            }
            const Eigen::VectorXd x = Eigen::VectorXd::Ones(K.rows());
            try {
                const auto r = cg([&K](const Eigen::VectorXd& v) -> Eigen::VectorXd { return K * v; }, K * x, 1e-8,
                                  20 * static_cast<int>(K.rows()));
                c.require(r.residual <= 1e-8, tag + " CG residual " + fmt(r.residual));
            } catch (const SolverError& e) {
                c.require(false, tag + " CG: " + e.what());
            }
        }
    c.require(worst <= 1e-10, "max |B^T psi| / max(1, |psi|) = " + fmt(worst));
    c.info << "24 mesh/order pairs, max relative divergence " << fmt(worst) << ", " << cholesky
           << " dense Cholesky checks";
}

void nullspace_oracle(Check& c)
{
    std::vector<Mesh> meshes;
    for (int n : {1, 2, 3, 4})
        meshes.push_back(uniform(n));
    for (int n : {4, 9, 16})
        meshes.push_back(generate_voronoi_mesh(n, 100, 42));
    int checked = 0;
    for (const auto& m : meshes)
        for (int k = 1; k <= 3; ++k) {
            const Discretization disc(m, k);
            if (disc.dofs().n_interior() > 200)
                continue;
            const auto sys = assemble(disc, zero_field);
            const Eigen::MatrixXd B = sys.B;
            const auto& ids = disc.dofs().interior_dofs();
            Eigen::MatrixXd Bt(B.cols(), ids.size());
            for (int i = 0; i < static_cast<int>(ids.size()); ++i)
                Bt.col(i) = B.row(ids[i]).transpose();
            int rank = 0;
            if (Bt.size() > 0) {
                Eigen::JacobiSVD<Eigen::MatrixXd> svd(Bt);
                const auto& s = svd.singularValues();
                for (int i = 0; i < s.size(); ++i)
                    rank += s[i] >= 1e-9 * s[0];
            }
            const int nullity = static_cast<int>(ids.size()) - rank;
            c.require(nullity == dim_Z(m, k), std::to_string(m.n_cells()) + " cells k=" + std::to_string(k) +
                                                   ": nullity " + std::to_string(nullity) + " vs " +
                                                   std::to_string(dim_Z(m, k)));
            ++checked;
        }
    c.info << checked << " meshes with <= 200 interior DOFs";
}

void patch_test(Check& c)
{
    double ev = 0.0, ep = 0.0;
    for (int k = 1; k <= 3; ++k) {
        const auto mc = patch_case(k);
        for (const Mesh& m : {uniform(4), generate_voronoi_mesh(16, 100, 42)}) {
            const Discretization disc(m, k);
            const auto sys = assemble(disc, mc.f);
            const auto basis = build_basis(disc, sys);
            const auto lift = build_lifting(disc, mc.g());
            SolveOptions opt;
            opt.tol = 1e-12;
            opt.pressure_tol = 1e-12;
            const auto e = compute_errors(disc, sys, solve_reduced(disc, sys, basis, lift, opt), mc);
            ev = std::max(ev, e.E_v);
            ep = std::max(ep, e.E_p);
        }
    }
    c.require(ev <= 1e-8, "E_v " + fmt(ev));
    c.require(ep <= 1e-7, "E_p " + fmt(ep));
    c.info << "max E_v " << fmt(ev) << ", max E_p " << fmt(ep);
}

void convergence_rates(Check& c)
{
    const auto mc = paper_case();
    for (auto fam : {MeshFamily::uniform, MeshFamily::voronoi})
        for (int k = 1; k <= 3; ++k) {
            const int levels = k == 1 ? 5 : 4;
            const double need = k - (fam == MeshFamily::uniform ? 0.2 : 0.3);
            const auto t0 = Clock::now();
            const auto rep = run_convergence(mc, fam, k, levels);
            const auto& last = rep.rows.back();
            const std::string tag = rep.family + " k=" + std::to_string(k);
            c.require(last.rate_v >= need, tag + " rate_v " + fmt(last.rate_v));
            c.require(last.rate_p >= need, tag + " rate_p " + fmt(last.rate_p));
            c.info << tag << " " << fmt(last.rate_v) << "/" << fmt(last.rate_p) << " (" << fmt(seconds_since(t0))
                   << " s); ";
        }
}

void lifting(Check& c)
{
    const std::vector<std::pair<std::string, VectorField>> data{
        {"manufactured", paper_case().g()},
        {"translation", [](const Point2&) { return Eigen::Vector2d(1.0, 0.0); }},
    };
    double moment = 0.0, tele = 0.0, div = 0.0;
    for (const Mesh& m : {uniform(8), generate_voronoi_mesh(64, 100, 42)})
        for (int k = 1; k <= 3; ++k) {
            const Discretization disc(m, k);
            const auto sys = assemble(disc, zero_field);
            for (const auto& [name, g] : data) {
                const auto L = build_lifting(disc, g);
                for (int e : L.boundary_edges) {
                    const Edge& ed = m.edges()[e];
                    const auto rule = gauss_edge(ed, m, 8);
                    for (int q = 0; q < k; ++q) {
                        double n = 0.0, t = 0.0;
                        for (std::size_t i = 0; i < rule.size(); ++i) {
                            const double tau = (rule.points[i] - ed.midpoint).dot(ed.tangent) / ed.length;
                            const Eigen::Vector2d v = g(rule.points[i]);
                            n += rule.weights[i] * v.dot(ed.normal) * std::pow(tau, q) / ed.length;
                            t += rule.weights[i] * v.dot(ed.tangent) * std::pow(tau, q) / ed.length;
                        }
                        moment = std::max(moment, std::abs(L.u_tilde[disc.dofs().normal(e, q)] - n) /
                                                      std::max(1.0, std::abs(n)));
                        moment = std::max(moment, std::abs(L.u_tilde[disc.dofs().tangential(e, q)] - t) /
                                                      std::max(1.0, std::abs(t)));
                    }
                }
                const int nb = static_cast<int>(L.C1.size());
                for (int i = 0; i < nb; ++i)
                    tele = std::max(tele, std::abs(-L.C1[i] + L.C1[(i + 1) % nb] - L.flux[i]));
                tele = std::max(tele, std::abs(L.C1[0]));
                div = std::max(div, (sys.B.transpose() * L.u_tilde).cwiseAbs().maxCoeff());
            }
        }
    c.require(moment <= 1e-10, "boundary moments " + fmt(moment));
    c.require(tele <= 1e-12, "telescoping " + fmt(tele));
    c.require(div <= 1e-9, "|B^T u~| " + fmt(div));
    c.info << "moments " << fmt(moment) << ", telescoping " << fmt(tele) << ", divergence " << fmt(div);
}

void solver_cross_validation(Check& c)
{
    const auto mc = paper_case();
    auto setup = [&](int n, int k) {
        struct P {
            Mesh m;
            std::unique_ptr<Discretization> disc;
            SparseSystem sys;
            DivFreeBasis basis;
            Lifting lift;
        };
        auto p = std::make_unique<P>();
        p->m = uniform(n);
        p->disc = std::make_unique<Discretization>(p->m, k);
        p->sys = assemble(*p->disc, mc.f);
        p->basis = build_basis(*p->disc, p->sys);
        p->lift = build_lifting(*p->disc, mc.g());
        return p;
    };
    for (int n : {16, 32}) {
        const auto p = setup(n, 1);
        const auto a = solve_reduced(*p->disc, p->sys, p->basis, p->lift);
        const auto b = uzawa(*p->disc, p->sys, p->lift.u_tilde);
        const Eigen::VectorXd d = a.u - b.u;
        const double gap = std::sqrt(d.dot(p->sys.A * d));
        c.require(b.converged && gap <= 1e-6, "k=1 h=1/" + std::to_string(n) + " gap " + fmt(gap));
        c.info << "k=1 h=1/" << n << " gap " << fmt(gap) << "; ";
    }
    for (auto [n, k] : {std::pair{16, 1}, std::pair{8, 2}}) {
        const auto p = setup(n, k);
        double t_cg = 1e300, t_uz = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            t_cg = std::min(t_cg, solve_reduced(*p->disc, p->sys, p->basis, p->lift).wall_time);
            t_uz = std::min(t_uz, uzawa(*p->disc, p->sys, p->lift.u_tilde).wall_time);
        }
        const std::string tag = "k=" + std::to_string(k) + " h=1/" + std::to_string(n);
        c.require(t_cg < t_uz, tag + " t_cg " + fmt(t_cg) + " >= t_uzawa " + fmt(t_uz));
        c.info << tag << " t_cg " << fmt(t_cg) << " s < t_uzawa " << fmt(t_uz) << " s; ";
    }
}

void projector_properties(Check& c)
{
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::bernoulli_distribution flip(0.5);
    double repro = 0.0, sym = 0.0, div = 0.0;
    int cells = 0;
    for (int i = 0; i < 50; ++i) {
        const int n = 3 + i % 6;
        const auto verts = oracle::random_convex_polygon(n, rng);
        std::vector<int> signs;
        for (int j = 0; j < n; ++j)
            signs.push_back(flip(rng) ? -1 : 1);
        const auto g = make_cell_geometry(verts, signs);
        ++cells;
        for (int k = 1; k <= 3; ++k) {
            const auto P = build_projector(g, k);
            const Eigen::Index np = P.pi_star.rows();
            repro = std::max(repro, (P.pi_star * P.D - Eigen::MatrixXd::Identity(np, np)).cwiseAbs().maxCoeff());

            oracle::VecPoly v;
            Eigen::VectorXd coef(np);
            for (int a = 0; a < poly_dim(k); ++a) {
                const auto ma = multi_index(a);
                const auto m = oracle::scaled_monomial(ma.ax, ma.ay, g.centroid, g.diameter);
                coef[2 * a] = U(rng);
                coef[2 * a + 1] = U(rng);
                v.x = v.x + coef[2 * a] * m;
                v.y = v.y + coef[2 * a + 1] * m;
            }
            const auto dofs = oracle::polynomial_dofs(v, verts, signs, k);
            repro = std::max(repro, (P.pi_star * dofs - coef).cwiseAbs().maxCoeff());

            const Eigen::MatrixXd A = local_stiffness(P);
            sym = std::max(sym, (A - A.transpose()).cwiseAbs().maxCoeff() / A.cwiseAbs().maxCoeff());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
            const auto& ev = es.eigenvalues();
            int zeros = 0;
            for (int j = 0; j < ev.size(); ++j)
                zeros += std::abs(ev[j]) <= 1e-10 * ev.maxCoeff();
            c.require(zeros == 2 && ev.minCoeff() > -1e-10 * ev.maxCoeff(),
                      "cell " + std::to_string(i) + " k=" + std::to_string(k) + " kernel dimension " +
                          std::to_string(zeros));

            const Eigen::MatrixXd Bd = local_divergence(g, k);
            for (int beta = 0; beta < poly_dim(k - 1); ++beta) {
                const auto mb = multi_index(beta);
                const auto m = oracle::scaled_monomial(mb.ax, mb.ay, g.centroid, g.diameter);
                const double exact = -oracle::polygon_integral(m * oracle::div(v), verts);
                div = std::max(div, std::abs(dofs.dot(Bd.col(beta)) - exact));
            }
        }
    }
    c.require(repro <= 1e-11, "reproduction " + fmt(repro));
    c.require(sym <= 1e-13, "symmetry " + fmt(sym));
    c.require(div <= 1e-11, "divergence " + fmt(div));
    c.info << cells << " cells x k=1..3: reproduction " << fmt(repro) << ", divergence " << fmt(div);
}

} // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        std::function<void(Check&)> run;
        double budget; ///< seconds, 0 for none
    };
    const std::vector<Criterion> criteria{
        {1, "dimension tables", dimension_tables, 0.0},
        {2, "mesh counts", mesh_counts, 0.0},
        {3, "divergence-free basis", divfree_basis, 30.0},
        {4, "nullspace oracle", nullspace_oracle, 0.0},
        {5, "patch test", patch_test, 0.0},
        {6, "convergence rates", convergence_rates, 600.0},
        {7, "lifting", lifting, 0.0},
        {8, "solver cross-validation and timing", solver_cross_validation, 0.0},
        {9, "projector and kernel properties", projector_properties, 0.0},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check c;
        const auto t0 = Clock::now();
        try {
            cr.run(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double t = seconds_since(t0);
        if (cr.budget > 0.0)
            c.require(t < cr.budget, "runtime " + fmt(t) + " s over budget " + fmt(cr.budget) + " s");
        const bool ok = c.failures.empty();
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << cr.id << ": " << cr.name << " [" << fmt(t)
                  << " s] " << c.info.str();
        for (const auto& f : c.failures)
            std::cout << " | " << f;
        std::cout << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
