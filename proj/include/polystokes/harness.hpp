#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "assembly.hpp"
#include "divfree.hpp"
#include "error.hpp"
#include "mesh.hpp"
#include "solver.hpp"
#include "voronoi.hpp"

namespace polystokes {

/// Analytic Stokes solution with f = -Laplacian(u) + grad(p) in closed form and g = u on the boundary.
struct ManufacturedCase {
    std::string name;
    VectorField u;
    ScalarField p;
    VectorField f;
    VectorField g() const { return u; }
};

inline ManufacturedCase paper_case()
{
    constexpr double a = 2.0 * std::numbers::pi;
    ManufacturedCase c;
    c.name = "paper";
    c.u = [](const Point2& x) {
        return Eigen::Vector2d((1.0 - std::cos(a * x.x())) * std::sin(a * x.y()),
                               -(1.0 - std::cos(a * x.y())) * std::sin(a * x.x()));
    };
    c.p = [](const Point2& x) { return std::exp(x.x()) - std::exp(x.y()); };
    c.f = [](const Point2& x) {
        const double sx = std::sin(a * x.x()), cx = std::cos(a * x.x());
        const double sy = std::sin(a * x.y()), cy = std::cos(a * x.y());
        return Eigen::Vector2d(a * a * sy * (1.0 - 2.0 * cx) + std::exp(x.x()),
                               -a * a * sx * (1.0 - 2.0 * cy) - std::exp(x.y()));
    };
    return c;
}

/// Divergence-free polynomial solution reproduced exactly by order k.
inline ManufacturedCase patch_case(int k)
{
    check_order(k);
    ManufacturedCase c;
    c.name = "patch" + std::to_string(k);
    if (k == 1) {
        c.u = [](const Point2& x) { return Eigen::Vector2d(x.x() + 2.0 * x.y(), 3.0 * x.x() - x.y()); };
        c.p = [](const Point2&) { return 0.0; };
        c.f = [](const Point2&) { return Eigen::Vector2d(0.0, 0.0); };
    } else if (k == 2) {
        c.u = [](const Point2& x) { return Eigen::Vector2d(x.x() * x.x(), -2.0 * x.x() * x.y()); };
        c.p = [](const Point2& x) { return x.x() + x.y() - 1.0; };
        c.f = [](const Point2&) { return Eigen::Vector2d(-1.0, 1.0); };
    } else {
        c.u = [](const Point2& x) {
            return Eigen::Vector2d(2.0 * x.x() * x.x() * x.y(), -2.0 * x.x() * x.y() * x.y());
        };
        c.p = [](const Point2& x) { return x.x() * x.x() - x.y() * x.y() + x.x() * x.y() - 0.25; };
        c.f = [](const Point2& x) {
            return Eigen::Vector2d(2.0 * x.x() - 3.0 * x.y(), 5.0 * x.x() - 2.0 * x.y());
        };
    }
    return c;
}

inline ManufacturedCase make_case(const std::string& name, int k)
{
    if (name == "paper")
        return paper_case();
    if (name == "patch")
        return patch_case(k);
    throw InputError("unknown case '" + name + "' (expected paper or patch)");
}

struct Errors {
    double E_v = 0.0; ///< discrete energy norm of u_h - I_h u
    double E_p = 0.0; ///< L2 norm of p_h - Pi_h p
};

inline Errors compute_errors(const Discretization& disc, const SparseSystem& sys, const SolveResult& res,
                             const ManufacturedCase& mc)
{
    Errors e;
    const Eigen::VectorXd d = res.u - interpolate(disc, mc.u);
    e.E_v = std::sqrt(std::max(0.0, d.dot(sys.A * d)));
    const auto& ps = disc.pressure();
    const Eigen::VectorXd dp = res.p - project_pressure(disc, mc.p);
    double s = 0.0;
    for (int c = 0; c < ps.n_cells; ++c) {
        const auto seg = dp.segment(ps.index(c, 0), ps.per_cell);
        s += seg.dot(ps.mass[c] * seg);
    }
    e.E_p = std::sqrt(std::max(0.0, s));
    return e;
}

/// Mesh from "uniform:N", "voronoi:N,seed" (N seeds, 100 Lloyd iterations) or a file path.
inline Mesh make_mesh(const std::string& spec, int lloyd_iters = 100)
{
    auto parse_int = [&spec](const std::string& s) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(s, &pos);
        } catch (const std::exception&) {
            throw InputError("bad mesh spec '" + spec + "'");
        }
        if (pos != s.size() || v < 1)
            throw InputError("bad mesh spec '" + spec + "'");
        return v;
    };
    if (spec.rfind("uniform:", 0) == 0)
        return generate_uniform_square_mesh(static_cast<int>(parse_int(spec.substr(8))));
    if (spec.rfind("voronoi:", 0) == 0) {
        const std::string rest = spec.substr(8);
        const auto comma = rest.find(',');
        const long long n = parse_int(rest.substr(0, comma));
        const std::uint64_t seed = comma == std::string::npos ? 42 : parse_int(rest.substr(comma + 1));
        return generate_voronoi_mesh(static_cast<int>(n), lloyd_iters, seed);
    }
    if (!std::filesystem::exists(spec))
        throw InputError("mesh file not found: " + spec);
    return read_mesh(spec);
}

enum class MeshFamily { uniform, voronoi };

inline MeshFamily parse_family(const std::string& s)
{
    if (s == "uniform")
        return MeshFamily::uniform;
    if (s == "voronoi")
        return MeshFamily::voronoi;
    throw InputError("unknown mesh family '" + s + "'");
}

/// Level l has nominal h = 1/(4 * 2^l): an n x n square grid or n^2 Voronoi seeds.
inline Mesh family_mesh(MeshFamily fam, int level, std::uint64_t seed = 42)
{
    const int n = 4 << level;
    if (fam == MeshFamily::uniform)
        return generate_uniform_square_mesh(n);
    return generate_voronoi_mesh(n * n, 100, seed);
}

struct ConvergenceRow {
    double h = 0.0;
    int n_polygons = 0;
    int dim_v0 = 0;
    int dim_q = 0;
    int dim_z = 0;
    double E_v = 0.0;
    double E_p = 0.0;
    double rate_v = std::numeric_limits<double>::quiet_NaN();
    double rate_p = std::numeric_limits<double>::quiet_NaN();
    int cg_iters = 0;
    double t_cg = 0.0;
    std::optional<double> t_uzawa; ///< negative: budget exhausted
};

struct ConvergenceReport {
    std::string case_name;
    std::string family;
    int k = 1;
    std::vector<ConvergenceRow> rows;
};

struct RunOptions {
    SolveOptions solve;
    Stabilization stab = Stabilization::diagonal;
    bool with_uzawa = false;
    UzawaOptions uzawa;
    std::uint64_t seed = 42;
};

inline void fill_rates(ConvergenceReport& rep)
{
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        auto& r = rep.rows[i];
        const auto& q = rep.rows[i - 1];
        const double lh = std::log2(q.h / r.h);
        r.rate_v = std::log2(q.E_v / r.E_v) / lh;
        r.rate_p = std::log2(q.E_p / r.E_p) / lh;
    }
}

/// One solve of `mc` on `mesh`, filling everything except the rates.
inline ConvergenceRow run_single(const Mesh& mesh, double h, int k, const ManufacturedCase& mc,
                                 const RunOptions& opt = {})
{
    const Discretization disc(mesh, k);
    const SparseSystem sys = assemble(disc, mc.f, opt.stab);
    const DivFreeBasis basis = build_basis(disc, sys);
    const Lifting lift = build_lifting(disc, mc.g());
    const SolveResult res = solve_reduced(disc, sys, basis, lift, opt.solve);
    const Errors err = compute_errors(disc, sys, res, mc);
    ConvergenceRow row;
    row.h = h;
    row.n_polygons = mesh.n_cells();
    row.dim_v0 = dim_V0(mesh, k);
    row.dim_q = dim_Q(mesh, k);
    row.dim_z = basis.dim();
    row.E_v = err.E_v;
    row.E_p = err.E_p;
    row.cg_iters = res.iterations;
    row.t_cg = res.wall_time;
    if (opt.with_uzawa) {
        const SolveResult uz = uzawa(disc, sys, lift.u_tilde, opt.uzawa);
        row.t_uzawa = uz.converged ? uz.wall_time : -1.0;
    }
    return row;
}

/// Solves on levels 0..n_levels-1 of a family; a failing level ends the run and the
/// partial report is returned alongside the rethrown error through `error`.
inline ConvergenceReport run_convergence(const ManufacturedCase& mc, MeshFamily fam, int k, int n_levels,
                                         const RunOptions& opt = {}, std::string* error = nullptr)
{
    ConvergenceReport rep;
    rep.case_name = mc.name;
    rep.family = fam == MeshFamily::uniform ? "uniform" : "voronoi";
    rep.k = k;
    for (int l = 0; l < n_levels; ++l) {
        try {
            const Mesh mesh = family_mesh(fam, l, opt.seed);
            rep.rows.push_back(run_single(mesh, 1.0 / (4 << l), k, mc, opt));
        } catch (const Error& e) {
            if (!error)
                throw;
            *error = e.what();
            break;
        }
        fill_rates(rep);
    }
    return rep;
}

inline void write_csv(const ConvergenceReport& rep, std::ostream& os)
{
    os << "h,N_P,dimV0,dimQ,dimZ,E_v,E_p,rate_v,rate_p,cg_iters,t_cg,t_uzawa\n";
    os << std::setprecision(10);
    for (const auto& r : rep.rows) {
        os << r.h << ',' << r.n_polygons << ',' << r.dim_v0 << ',' << r.dim_q << ',' << r.dim_z << ',' << r.E_v
           << ',' << r.E_p << ',';
        if (!std::isnan(r.rate_v))
            os << r.rate_v;
        os << ',';
        if (!std::isnan(r.rate_p))
            os << r.rate_p;
        os << ',' << r.cg_iters << ',' << r.t_cg << ',';
        if (r.t_uzawa)
            os << (*r.t_uzawa < 0.0 ? std::string("*") : std::to_string(*r.t_uzawa));
        os << '\n';
    }
}

/// Gnuplot-friendly columns: h E_v E_p.
inline void write_dat(const ConvergenceReport& rep, std::ostream& os)
{
    os << "# h E_v E_p\n" << std::setprecision(10);
    for (const auto& r : rep.rows)
        os << r.h << ' ' << r.E_v << ' ' << r.E_p << '\n';
}

/// Log-log plot of E_v and E_p against h with a slope-k reference triangle.
inline void write_svg(const ConvergenceReport& rep, std::ostream& os)
{
    const double W = 480, H = 360, m = 50;
    double hmin = 1e300, hmax = -1e300, emin = 1e300, emax = -1e300;
    for (const auto& r : rep.rows) {
        hmin = std::min(hmin, r.h);
        hmax = std::max(hmax, r.h);
        for (double e : {r.E_v, r.E_p})
            if (e > 0.0) {
                emin = std::min(emin, e);
                emax = std::max(emax, e);
            }
    }
    if (rep.rows.empty() || emin > emax) {
        hmin = 0.1, hmax = 1.0, emin = 0.1, emax = 1.0;
    }
    const double lx0 = std::log10(hmin) - 0.1, lx1 = std::log10(hmax) + 0.1;
    const double ly0 = std::log10(emin) - 0.3, ly1 = std::log10(emax) + 0.3;
    auto X = [&](double h) { return m + (std::log10(h) - lx0) / (lx1 - lx0) * (W - 2 * m); };
    auto Y = [&](double e) { return H - m - (std::log10(e) - ly0) / (ly1 - ly0) * (H - 2 * m); };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << W - 2 * m << "\" height=\"" << H - 2 * m
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">h</text>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">" << rep.case_name << ", " << rep.family
       << ", k=" << rep.k << "</text>\n";
    auto polyline = [&](auto get, const char* color, const char* label, double ly) {
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (const auto& r : rep.rows)
            if (get(r) > 0.0)
                os << X(r.h) << ',' << Y(get(r)) << ' ';
        os << "\"/>\n";
        for (const auto& r : rep.rows)
            if (get(r) > 0.0)
                os << "<circle cx=\"" << X(r.h) << "\" cy=\"" << Y(get(r)) << "\" r=\"3\" fill=\"" << color
                   << "\"/>\n";
        os << "<text x=\"" << m + 10 << "\" y=\"" << ly << "\" fill=\"" << color << "\">" << label << "</text>\n";
    };
    polyline([](const ConvergenceRow& r) { return r.E_v; }, "blue", "E_v", m + 20);
    polyline([](const ConvergenceRow& r) { return r.E_p; }, "red", "E_p", m + 40);
    if (rep.rows.size() >= 2) {
        const auto& last = rep.rows.back();
        const double e0 = std::max(emin, 1e-300);
        const double h0 = last.h, h1 = 2.0 * last.h;
        const double e1 = e0 * std::pow(2.0, rep.k);
        os << "<polygon fill=\"none\" stroke=\"gray\" points=\"" << X(h0) << ',' << Y(e0) << ' ' << X(h1) << ','
           << Y(e0) << ' ' << X(h1) << ',' << Y(e1) << "\"/>\n";
        os << "<text x=\"" << X(h1) + 4 << "\" y=\"" << 0.5 * (Y(e0) + Y(e1)) << "\" fill=\"gray\">" << rep.k
           << "</text>\n";
    }
    os << "</svg>\n";
}

/// Writes report.csv, errors.dat and errors.svg into `dir`.
inline void write_report(const ConvergenceReport& rep, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "report.csv");
    write_csv(rep, csv);
    std::ofstream dat(dir / "errors.dat");
    write_dat(rep, dat);
    std::ofstream svg(dir / "errors.svg");
    write_svg(rep, svg);
}

struct TimingRow {
    double h = 0.0;
    int k = 1;
    double t_cg = 0.0;
    double t_uzawa = 0.0; ///< negative when the Uzawa budget was exhausted
    int cg_iters = 0;
    int uzawa_inner_iters = 0;
    double velocity_gap = 0.0; ///< energy norm of u_cg - u_uzawa
};

/// Reduced CG against Uzawa on uniform meshes n x n for each n in `ns`.
inline std::vector<TimingRow> run_timing(const ManufacturedCase& mc, int k, const std::vector<int>& ns,
                                         const RunOptions& opt = {})
{
    std::vector<TimingRow> out;
    for (int n : ns) {
        const Mesh mesh = generate_uniform_square_mesh(n);
        const Discretization disc(mesh, k);
        const SparseSystem sys = assemble(disc, mc.f, opt.stab);
        const DivFreeBasis basis = build_basis(disc, sys);
        const Lifting lift = build_lifting(disc, mc.g());
        const SolveResult a = solve_reduced(disc, sys, basis, lift, opt.solve);
        const SolveResult b = uzawa(disc, sys, lift.u_tilde, opt.uzawa);
        TimingRow row;
        row.h = 1.0 / n;
        row.k = k;
        row.t_cg = a.wall_time;
        row.t_uzawa = b.converged ? b.wall_time : -1.0;
        row.cg_iters = a.iterations;
        row.uzawa_inner_iters = b.iterations;
        const Eigen::VectorXd d = a.u - b.u;
        row.velocity_gap = std::sqrt(std::max(0.0, d.dot(sys.A * d)));
        out.push_back(row);
    }
    return out;
}

inline void write_timing_csv(const std::vector<TimingRow>& rows, std::ostream& os)
{
    os << "h,k,t_cg,t_uzawa,cg_iters,uzawa_inner_iters,velocity_gap\n" << std::setprecision(10);
    for (const auto& r : rows) {
        os << r.h << ',' << r.k << ',' << r.t_cg << ',';
        if (r.t_uzawa < 0.0)
            os << '*';
        else
            os << r.t_uzawa;
        os << ',' << r.cg_iters << ',' << r.uzawa_inner_iters << ',' << r.velocity_gap << '\n';
    }
}

} // namespace polystokes
