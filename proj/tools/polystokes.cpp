// Command-line driver: single solves, convergence studies, timing runs and mesh generation.

#include <polystokes/polystokes.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace fs = std::filesystem;
using namespace polystokes;

namespace {

constexpr int exit_solver = 2;
constexpr int exit_input = 3;

void dump_coo(const SparseMatrix& M, const fs::path& path)
{
    std::ofstream os(path);
    write_coo(M, os);
}

int cmd_solve(const std::string& mesh_spec, int k, const std::string& case_name, double tol, int max_iter,
              const std::string& out, bool with_uzawa, bool dump)
{
    check_order(k);
    if (!(tol > 0.0))
        throw InputError("--tol must be positive");
    if (max_iter < 0)
        throw InputError("--max-iter must be non-negative");
    const Mesh mesh = make_mesh(mesh_spec);
    const ManufacturedCase mc = make_case(case_name, k);
    RunOptions opt;
    opt.solve.tol = tol;
    opt.solve.max_iter = max_iter;

    const Discretization disc(mesh, k);
    const SparseSystem sys = assemble(disc, mc.f, opt.stab);
    const DivFreeBasis basis = build_basis(disc, sys);
    const Lifting lift = build_lifting(disc, mc.g());
    const SolveResult res = solve_reduced(disc, sys, basis, lift, opt.solve);
    const Errors err = compute_errors(disc, sys, res, mc);

    ConvergenceReport rep;
    rep.case_name = mc.name;
    rep.family = mesh_spec;
    rep.k = k;
    ConvergenceRow row;
    row.h = mesh.h();
    row.n_polygons = mesh.n_cells();
    row.dim_v0 = dim_V0(mesh, k);
    row.dim_q = dim_Q(mesh, k);
    row.dim_z = basis.dim();
    row.E_v = err.E_v;
    row.E_p = err.E_p;
    row.cg_iters = res.iterations;
    row.t_cg = res.wall_time;

    std::cout << "mesh " << mesh_spec << ": " << mesh.n_cells() << " cells, h = " << mesh.h() << "\n"
              << "k = " << k << "  dim V0 = " << row.dim_v0 << "  dim Q = " << row.dim_q
              << "  dim Z = " << row.dim_z << "\n"
              << "cg: " << res.iterations << " iterations, residual " << res.residual << ", " << res.wall_time
              << " s\n"
              << "pressure: " << res.pressure_iterations << " iterations\n"
              << "E_v = " << err.E_v << "  E_p = " << err.E_p << "\n";
    if (with_uzawa) {
        UzawaOptions uo;
        uo.tol = tol;
        const SolveResult uz = uzawa(disc, sys, lift.u_tilde, uo);
        row.t_uzawa = uz.converged ? uz.wall_time : -1.0;
        const Eigen::VectorXd d = res.u - uz.u;
        std::cout << "uzawa: " << (uz.converged ? "converged" : "budget exhausted") << ", " << uz.wall_time
                  << " s, |u_cg - u_uzawa|_A = " << std::sqrt(d.dot(sys.A * d)) << "\n";
    }
    rep.rows.push_back(row);

    const fs::path dir(out);
    write_report(rep, dir);
    write_mesh(mesh, (dir / "mesh.txt").string());
    if (dump) {
        dump_coo(sys.A, dir / "A.coo");
        dump_coo(sys.B, dir / "B.coo");
        dump_coo(basis.N, dir / "N.coo");
    }
    return 0;
}

int cmd_converge(const std::string& case_name, const std::string& family, int k, int levels,
                 std::uint64_t seed, bool with_uzawa, const std::string& out)
{
    check_order(k);
    if (levels < 1)
        throw InputError("--levels must be at least 1");
    const ManufacturedCase mc = make_case(case_name, k);
    RunOptions opt;
    opt.seed = seed;
    opt.with_uzawa = with_uzawa;
    std::string error;
    const ConvergenceReport rep = run_convergence(mc, parse_family(family), k, levels, opt, &error);
    write_csv(rep, std::cout);
    write_report(rep, out);
    if (!error.empty()) {
        std::cerr << "error: " << error << "\n";
        return exit_solver;
    }
    return 0;
}

int cmd_timing(const std::string& case_name, int k, int levels, double budget, const std::string& out)
{
    check_order(k);
    const ManufacturedCase mc = make_case(case_name, k);
    RunOptions opt;
    opt.uzawa.time_budget = budget;
    std::vector<int> ns;
    for (int l = 0; l < levels; ++l)
        ns.push_back(4 << l);
    const auto rows = run_timing(mc, k, ns, opt);
    write_timing_csv(rows, std::cout);
    fs::create_directories(out);
    std::ofstream os(fs::path(out) / "timing.csv");
    write_timing_csv(rows, os);
    return 0;
}

int cmd_meshgen(const std::string& mesh_spec, int lloyd, const std::string& out)
{
    const Mesh mesh = make_mesh(mesh_spec, lloyd);
    write_mesh(mesh, out);
    const auto& c = mesh.counts();
    std::cout << "N_P = " << c.n_polygons << "  N_E = " << c.n_edges << " (interior " << c.n_edges_interior
              << ")  N_V = " << c.n_vertices << " (interior " << c.n_vertices_interior << ")  h = " << mesh.h()
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Divergence-free nonconforming virtual elements for 2D Stokes"};
    app.require_subcommand(1);

    std::string mesh_spec, case_name = "paper", out = "out", family = "uniform";
    int k = 1, levels = 4, lloyd = 100, max_iter = 0;
    double tol = 1e-10, budget = 600.0;
    bool with_uzawa = false, dump = false;
    std::uint64_t seed = 42;

    auto* solve = app.add_subcommand("solve", "Solve a manufactured case on one mesh");
    solve->add_option("--mesh", mesh_spec, "uniform:N | voronoi:N,seed | mesh file")->required();
    solve->add_option("--k", k, "Polynomial order (1, 2 or 3)");
    solve->add_option("--case", case_name, "paper | patch");
    solve->add_option("--tol", tol, "CG relative tolerance");
    solve->add_option("--max-iter", max_iter, "CG iteration cap (0: 10 x system size)");
    solve->add_option("--out", out, "Output directory");
    solve->add_flag("--uzawa", with_uzawa, "Also run the Uzawa baseline");
    solve->add_flag("--dump-matrices", dump, "Write A.coo, B.coo and N.coo");

    auto* converge = app.add_subcommand("converge", "Convergence study on a mesh family");
    converge->add_option("--family", family, "uniform | voronoi");
    converge->add_option("--k", k, "Polynomial order (1, 2 or 3)");
    converge->add_option("--levels", levels, "Number of levels, h = 1/4, 1/8, ...");
    converge->add_option("--case", case_name, "paper | patch");
    converge->add_option("--seed", seed, "Voronoi seed");
    converge->add_flag("--uzawa", with_uzawa, "Also time the Uzawa baseline");
    converge->add_option("--out", out, "Output directory");

    auto* timing = app.add_subcommand("timing", "Reduced CG against Uzawa on uniform meshes");
    timing->add_option("--k", k, "Polynomial order (1, 2 or 3)");
    timing->add_option("--levels", levels, "Number of levels, h = 1/4, 1/8, ...");
    timing->add_option("--case", case_name, "paper | patch");
    timing->add_option("--budget", budget, "Uzawa time budget per solve in seconds");
    timing->add_option("--out", out, "Output directory");

    auto* meshgen = app.add_subcommand("meshgen", "Generate a mesh file");
    meshgen->add_option("--mesh", mesh_spec, "uniform:N | voronoi:N,seed")->required();
    meshgen->add_option("--lloyd", lloyd, "Lloyd iterations for Voronoi meshes");
    meshgen->add_option("--out", out, "Output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_input;
    }

    try {
        if (*solve)
            return cmd_solve(mesh_spec, k, case_name, tol, max_iter, out, with_uzawa, dump);
        if (*converge)
            return cmd_converge(case_name, family, k, levels, seed, with_uzawa, out);
        if (*timing)
            return cmd_timing(case_name, k, levels, budget, out);
        return cmd_meshgen(mesh_spec, lloyd, out);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return exit_solver;
    } catch (const Error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_input;
    }
}
