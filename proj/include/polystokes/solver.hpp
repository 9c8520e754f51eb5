#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "assembly.hpp"
#include "divfree.hpp"
#include "error.hpp"

namespace polystokes {

struct CgResult {
    Eigen::VectorXd x;
    int iterations = 0;
    double residual = 0.0; ///< |rhs - A x| / |rhs|
};

struct NoProjection {
    void operator()(Eigen::VectorXd&) const {}
};

/// Conjugate gradients on a symmetric positive definite operator; stops when
/// |rhs - A x|_2 <= tol |rhs|_2. `project` is applied to the iterate after each update
/// (used to fix a kernel component). An optional diagonal enables Jacobi preconditioning.
template <class Op, class Project = NoProjection>
CgResult cg(const Op& apply, const Eigen::VectorXd& rhs, double tol, int max_iter,
            const Eigen::VectorXd* x0 = nullptr, const Eigen::VectorXd* diag = nullptr,
            Project project = {})
{
    CgResult res;
    const double bnorm = rhs.norm();
    res.x = x0 ? *x0 : Eigen::VectorXd::Zero(rhs.size());
    if (bnorm == 0.0) {
        res.x.setZero();
        return res;
    }
    Eigen::VectorXd r = x0 ? Eigen::VectorXd(rhs - apply(res.x)) : rhs;
    auto precond = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return diag ? Eigen::VectorXd(v.cwiseQuotient(*diag)) : v;
    };
    Eigen::VectorXd z = precond(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    res.residual = r.norm() / bnorm;
    while (res.residual > tol) {
        if (res.iterations >= max_iter)
            throw SolverError("cg: max_iter exceeded (relative residual " + std::to_string(res.residual) + ")");
        const Eigen::VectorXd Ap = apply(p);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0))
            throw SolverError("cg: breakdown, operator is not positive definite");
        const double alpha = rz / pAp;
        res.x += alpha * p;
        project(res.x);
        r -= alpha * Ap;
        z = precond(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
        ++res.iterations;
        res.residual = r.norm() / bnorm;
    }
    return res;
}

struct SolveOptions {
    double tol = 1e-10;          ///< CG relative tolerance
    double pressure_tol = 1e-9;  ///< normal-equation CG relative tolerance
    int max_iter = 0;            ///< 0: 10 x system size
    bool jacobi = false;
};

struct SolveResult {
    Eigen::VectorXd u;
    Eigen::VectorXd p;  ///< zero-mean pressure coefficients
    int iterations = 0;
    double residual = 0.0;
    double wall_time = 0.0; ///< seconds spent in the velocity solve
    int pressure_iterations = 0;
    double pressure_residual = 0.0;
    bool converged = true;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Rows of `M` listed in `rows`, in that order.
inline SparseMatrix select_rows(const SparseMatrix& M, const std::vector<int>& rows)
{
    std::vector<Triplet> t;
    t.reserve(rows.size());
    for (int i = 0; i < static_cast<int>(rows.size()); ++i)
        t.emplace_back(i, rows[i], 1.0);
    SparseMatrix P(static_cast<Eigen::Index>(rows.size()), M.rows());
    P.setFromTriplets(t.begin(), t.end());
    return P * M;
}

inline int default_max_iter(int n, int requested) { return requested > 0 ? requested : std::max(100, 10 * n); }

} // namespace detail

/// Least-squares pressure from the interior rows of B p = F - A u by CG on the
/// normal equations, with the mean removed after every update.
inline CgResult recover_pressure(const Discretization& disc, const SparseSystem& sys, const Eigen::VectorXd& u,
                                 double tol, int max_iter = 0)
{
    const auto& ps = disc.pressure();
    const SparseMatrix Bi = detail::select_rows(sys.B, disc.dofs().interior_dofs());
    const SparseMatrix BiT = Bi.transpose();
    Eigen::VectorXd r = sys.F - sys.A * u;
    Eigen::VectorXd ri(Bi.rows());
    const auto& ids = disc.dofs().interior_dofs();
    for (int i = 0; i < static_cast<int>(ids.size()); ++i)
        ri[i] = r[ids[i]];
    const Eigen::VectorXd rhs = BiT * ri;
    auto apply = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return BiT * (Bi * p); };
    auto project = [&ps](Eigen::VectorXd& p) { p = project_zero_mean(ps, p); };
    CgResult res = cg(apply, rhs, tol, detail::default_max_iter(ps.n_raw(), max_iter), nullptr, nullptr, project);
    res.x = project_zero_mean(ps, res.x);
    return res;
}

/// Reduced solve: N^T A N z = N^T (F - A u~), u = N z + u~, then pressure recovery.
inline SolveResult solve_reduced(const Discretization& disc, const SparseSystem& sys, const DivFreeBasis& basis,
                                 const Lifting& lift, const SolveOptions& opt = {})
{
    SolveResult out;
    const auto t0 = detail::Clock::now();
    const SparseMatrix NT = basis.N.transpose();
    const SparseMatrix K = NT * sys.A * basis.N;
    const Eigen::VectorXd rhs = NT * (sys.F - sys.A * lift.u_tilde);
    Eigen::VectorXd diag;
    if (opt.jacobi)
        diag = K.diagonal();
    auto apply = [&K](const Eigen::VectorXd& z) -> Eigen::VectorXd { return K * z; };
    const CgResult z = cg(apply, rhs, opt.tol, detail::default_max_iter(basis.dim(), opt.max_iter), nullptr,
                          opt.jacobi ? &diag : nullptr);
    out.u = basis.N * z.x + lift.u_tilde;
    out.wall_time = detail::seconds_since(t0);
    out.iterations = z.iterations;
    out.residual = z.residual;
    const CgResult p = recover_pressure(disc, sys, out.u, opt.pressure_tol);
    out.p = p.x;
    out.pressure_iterations = p.iterations;
    out.pressure_residual = p.residual;
    return out;
}

/// Builds the system, basis and lifting, then solves.
inline SolveResult solve_reduced(const Discretization& disc, const VectorField& f, const VectorField& g,
                                 const SolveOptions& opt = {})
{
    const SparseSystem sys = assemble(disc, f);
    const DivFreeBasis basis = build_basis(disc, sys);
    const Lifting lift = build_lifting(disc, g);
    return solve_reduced(disc, sys, basis, lift, opt);
}

/// Step sizes near 2 / (lambda_min + lambda_max) of the mass-scaled Schur complement,
/// whose spectrum is mesh independent: lambda_max is about 2, 3.1 and 7.8 for k = 1, 2, 3.
inline double default_uzawa_omega(int k)
{
    check_order(k);
    constexpr double omega[] = {0.8, 0.55, 0.22};
    return omega[k - 1];
}

struct UzawaOptions {
    double omega = 0.0;       ///< 0: default_uzawa_omega(k)
    double tol = 1e-10;       ///< outer: |B^T u| reduced by this factor
    double inner_tol = 1e-12; ///< inner CG relative tolerance
    int max_outer = 100000;
    double time_budget = 0.0; ///< seconds; 0 means unlimited
};

/// Mass-scaled Uzawa iteration p <- p + omega M_q^{-1} B^T u on the full saddle system,
/// with boundary DOFs fixed to `boundary` and inner CG solves on the interior block.
/// Returns converged = false when the time or iteration budget is exhausted.
inline SolveResult uzawa(const Discretization& disc, const SparseSystem& sys, const Eigen::VectorXd& boundary,
                         const UzawaOptions& opt = {})
{
    SolveResult out;
    const auto t0 = detail::Clock::now();
    const auto& dofs = disc.dofs();
    const auto& ps = disc.pressure();
    const auto& ids = dofs.interior_dofs();
    const double omega = opt.omega > 0.0 ? opt.omega : default_uzawa_omega(disc.k());
    const SparseMatrix Ai = detail::select_rows(sys.A, ids);
    const SparseMatrix AiT = Ai.transpose();
    const SparseMatrix Aii = detail::select_rows(AiT, ids); // symmetric: (A_I.)^T rows I = A_II
    const SparseMatrix Bi = detail::select_rows(sys.B, ids);
    const SparseMatrix BT = sys.B.transpose();

    Eigen::VectorXd ub = Eigen::VectorXd::Zero(dofs.size());
    for (int i : dofs.boundary_dofs())
        ub[i] = boundary[i];
    Eigen::VectorXd fi(ids.size());
    const Eigen::VectorXd Aub = sys.A * ub;
    for (int i = 0; i < static_cast<int>(ids.size()); ++i)
        fi[i] = sys.F[ids[i]] - Aub[ids[i]];

    std::vector<Eigen::LLT<Eigen::MatrixXd>> mass;
    for (const auto& M : ps.mass)
        mass.emplace_back(M);

    auto apply = [&Aii](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Aii * x; };
    const int inner_max = detail::default_max_iter(static_cast<int>(ids.size()), 0);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(ps.n_raw());
    Eigen::VectorXd ui = Eigen::VectorXd::Zero(ids.size());
    Eigen::VectorXd u = ub;
    double r0 = -1.0;
    double prev = 0.0;
    int growth = 0;
    out.converged = false;
    for (int it = 0; it < opt.max_outer; ++it) {
        const Eigen::VectorXd rhs = fi - Bi * p;
        const CgResult inner = cg(apply, rhs, opt.inner_tol, inner_max, &ui);
        ui = inner.x;
        out.iterations += inner.iterations;
        for (int i = 0; i < static_cast<int>(ids.size()); ++i)
            u[ids[i]] = ui[i];
        const Eigen::VectorXd div = BT * u;
        const double dn = div.norm();
        if (r0 < 0.0)
            r0 = dn;
        out.residual = r0 > 0.0 ? dn / r0 : 0.0;
        if (dn == 0.0 || out.residual <= opt.tol) {
            out.converged = true;
            break;
        }
        growth = dn > prev && it > 0 ? growth + 1 : 0;
        prev = dn;
        if (growth >= 10)
            throw SolverError("uzawa: diverging (residual grew over 10 outer iterations)");
        for (int c = 0; c < ps.n_cells; ++c) {
            const int o = ps.index(c, 0);
            p.segment(o, ps.per_cell) += omega * mass[c].solve(div.segment(o, ps.per_cell));
        }
        if (opt.time_budget > 0.0 && detail::seconds_since(t0) > opt.time_budget)
            break;
    }
    out.u = u;
    out.p = project_zero_mean(ps, p);
    out.wall_time = detail::seconds_since(t0);
    return out;
}

} // namespace polystokes
