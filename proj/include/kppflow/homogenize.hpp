#pragma once

// Cell problem -lap chi + A u.grad chi = A u.e and the effective diffusivity.

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

#include "kppflow/flows.hpp"
#include "kppflow/krylov.hpp"
#include "kppflow/torus.hpp"

namespace kppflow {

struct CellOptions {
    double tol = 1e-10;
    int restart = 50;
    int max_iterations = 10000;
};

struct CellSolution {
    ScalarField chi;
    std::vector<double> e;
    double A = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = true;
};

namespace detail {

inline std::vector<double> unit_direction(std::vector<double> e, int dim, const char* what) {
    detail::require(static_cast<int>(e.size()) == dim, std::string(what) + ": direction has the wrong dimension");
    double n = 0.0;
    for (double x : e) {
        detail::require(std::isfinite(x), std::string(what) + ": direction is not finite");
        n += x * x;
    }
    n = std::sqrt(n);
    detail::require(n > 0.0, std::string(what) + ": direction must be nonzero");
    for (auto& x : e)
        x /= n;
    return e;
}

inline std::vector<double> basis_vector(int dim, int axis) {
    std::vector<double> e(dim, 0.0);
    e[axis] = 1.0;
    return e;
}

}  // namespace detail

/// Solve the cell problem by GMRES right-preconditioned with the mean-zero inverse Laplacian.
inline CellSolution solve_cell_problem(const FlowField& flow, double A, std::vector<double> e,
                                       const CellOptions& opt = {}, const ScalarField* warm_start = nullptr) {
    detail::require(std::isfinite(A), "solve_cell_problem: amplitude must be finite");
    detail::require(opt.tol >= 1e-12 && opt.tol <= 1e-4, "solve_cell_problem: tol must lie in [1e-12, 1e-4]");
    const TorusGrid& g = flow.grid();
    e = detail::unit_direction(std::move(e), g.dim(), "solve_cell_problem");

    CellSolution sol{ScalarField(g), e, A, 0.0, 0, true};
    if (A == 0.0)
        return sol;

    DealiasedOperator adv(flow.u());
    const Spectral& sp = adv.spectral();
    const std::size_t ns = sp.spectral_size();
    std::vector<cplx> fh(ns), out(ns), scratch;

    const ScalarField ue = flow.u().dot(e);
    std::vector<double> b(ue.storage());
    for (auto& v : b)
        v *= A;
    detail::remove_mean(b);

    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        sp.forward(x, fh);
        adv.apply(fh, out, A);
        for (std::size_t s = 0; s < ns; ++s)
            out[s] += sp.k2(s) * fh[s];
        out[0] = 0.0;
        sp.inverse(out, y, scratch);
    };
    auto precond = [&](const std::vector<double>& x, std::vector<double>& y) {
        sp.forward(x, fh);
        for (std::size_t s = 0; s < ns; ++s)
            fh[s] = sp.k2(s) > 0.0 ? fh[s] / sp.k2(s) : cplx{0.0, 0.0};
        sp.inverse(fh, y, scratch);
    };

    std::vector<double> x(g.size(), 0.0);
    if (warm_start) {
        detail::require_same_grid(warm_start->grid(), g, "solve_cell_problem");
        x = warm_start->storage();
        detail::remove_mean(x);
    }
    const KrylovReport rep = gmres<double>(apply, precond, b, x, opt.tol, opt.restart, opt.max_iterations);
    detail::remove_mean(x);
    sol.chi = ScalarField(g, std::move(x));
    sol.residual = rep.residual;
    sol.iterations = rep.iterations;
    sol.converged = rep.converged;
    return sol;
}

struct DiffusivityResult {
    Eigen::MatrixXd sigma;           ///< sigma_ij = mean((grad chi_i + e_i).(grad chi_j + e_j))
    std::vector<double> e;
    double D_e = 1.0;                ///< e . sigma e
    double D_e_energy = 1.0;         ///< 1 + mean |grad chi_e|^2
    double crosscheck = 0.0;         ///< |D_e - D_e_energy| / D_e
    std::vector<CellSolution> cells; ///< one per basis direction
    std::optional<CellSolution> cell_e;  ///< extra solve when e is not a basis direction
    bool converged = true;
    int iterations = 0;
    double max_residual = 0.0;
};

namespace detail {

inline std::vector<VectorField> shifted_gradients(const std::vector<const CellSolution*>& cells) {
    std::vector<VectorField> out;
    for (const auto* c : cells) {
        VectorField g = gradient(c->chi);
        for (int a = 0; a < g.dim(); ++a)
            if (c->e[a] != 0.0)
                for (auto& v : g[a].values())
                    v += c->e[a];
        out.push_back(std::move(g));
    }
    return out;
}

inline double mean_dot(const VectorField& a, const VectorField& b) {
    double s = 0.0;
    for (int c = 0; c < a.dim(); ++c)
        s += detail::dot(a[c].values(), b[c].values());
    return s / static_cast<double>(a.grid().size());
}

inline double gradient_energy(const ScalarField& chi) {
    const VectorField g = gradient(chi);
    double s = 0.0;
    for (int c = 0; c < g.dim(); ++c)
        s += reduce(g[c], ReduceKind::L2SqMean);
    return s;
}

inline int basis_axis(const std::vector<double>& e) {
    int axis = -1;
    for (std::size_t a = 0; a < e.size(); ++a) {
        if (e[a] == 0.0)
            continue;
        if (axis >= 0 || std::abs(std::abs(e[a]) - 1.0) > 1e-15)
            return -1;
        axis = static_cast<int>(a);
    }
    return axis;
}

}  // namespace detail

/// Full effective diffusivity matrix from the canonical-basis correctors plus D_e
/// for the requested direction. `warm` optionally seeds each basis solve.
inline DiffusivityResult diffusivity(const FlowField& flow, double A, std::vector<double> e,
                                     const CellOptions& opt = {}, const std::vector<ScalarField>* warm = nullptr) {
    const int d = flow.dim();
    e = detail::unit_direction(std::move(e), d, "diffusivity");
    DiffusivityResult r;
    r.e = e;
    for (int a = 0; a < d; ++a) {
        const ScalarField* w = warm && static_cast<int>(warm->size()) == d ? &(*warm)[a] : nullptr;
        r.cells.push_back(solve_cell_problem(flow, A, detail::basis_vector(d, a), opt, w));
    }
    std::vector<const CellSolution*> ptrs;
    for (const auto& c : r.cells)
        ptrs.push_back(&c);
    const auto grads = detail::shifted_gradients(ptrs);
    r.sigma.resize(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j)
            r.sigma(i, j) = r.sigma(j, i) = detail::mean_dot(grads[i], grads[j]);

    Eigen::VectorXd ev(d);
    for (int a = 0; a < d; ++a)
        ev[a] = e[a];
    r.D_e = ev.dot(r.sigma * ev);

    const int axis = detail::basis_axis(e);
    if (axis >= 0) {
        r.D_e_energy = 1.0 + detail::gradient_energy(r.cells[axis].chi);
    } else {
        r.cell_e = solve_cell_problem(flow, A, e, opt);
        r.D_e_energy = 1.0 + detail::gradient_energy(r.cell_e->chi);
    }
    r.crosscheck = std::abs(r.D_e - r.D_e_energy) / r.D_e;

    auto account = [&](const CellSolution& c) {
        r.converged = r.converged && c.converged;
        r.iterations += c.iterations;
        r.max_residual = std::max(r.max_residual, c.residual);
    };
    for (const auto& c : r.cells)
        account(c);
    if (r.cell_e)
        account(*r.cell_e);
    return r;
}

struct DirectionalDiffusivity {
    double A = 0.0;
    double D_e = 1.0;         ///< mean |grad chi_e + e|^2
    double D_e_energy = 1.0;  ///< 1 + mean |grad chi_e|^2
    CellSolution cell;
};

/// D_e from the single corrector chi_e (no full matrix).
inline DirectionalDiffusivity directional_diffusivity(const FlowField& flow, double A, std::vector<double> e,
                                                      const CellOptions& opt = {},
                                                      const ScalarField* warm_start = nullptr) {
    DirectionalDiffusivity r;
    r.A = A;
    r.cell = solve_cell_problem(flow, A, std::move(e), opt, warm_start);
    const auto grads = detail::shifted_gradients({&r.cell});
    r.D_e = detail::mean_dot(grads[0], grads[0]);
    r.D_e_energy = 1.0 + detail::gradient_energy(r.cell.chi);
    return r;
}

/// D_e along an increasing amplitude list; solves above A = 100 start from the
/// previous corrector.
inline std::vector<DirectionalDiffusivity> diffusivity_sweep(const FlowField& flow, const std::vector<double>& As,
                                                             const std::vector<double>& e,
                                                             const CellOptions& opt = {}) {
    std::vector<DirectionalDiffusivity> out;
    for (std::size_t i = 0; i < As.size(); ++i) {
        const ScalarField* warm = nullptr;
        if (i > 0 && As[i] > 100.0 && out.back().cell.converged)
            warm = &out.back().cell.chi;
        out.push_back(directional_diffusivity(flow, As[i], e, opt, warm));
    }
    return out;
}

}  // namespace kppflow

namespace kppflow {

struct ContinuationStep {
    int n = 0;
    double D_e = 1.0;
    bool converged = true;
};

struct ContinuationResult {
    double D_e = 1.0;
    int accepted_n = 0;
    double last_change = INFINITY;  ///< relative change between the last two resolutions
    bool converged = false;         ///< last_change below the tolerance
    std::vector<ContinuationStep> history;
};

/// Resolution continuation: double the grid until D_e changes by less than
/// `rel_change` between successive resolutions.
inline ContinuationResult diffusivity_continuation(const FlowSpec& spec, int dim, double A, const std::vector<double>& e,
                                                   int n_start, int n_max, double rel_change = 5e-3,
                                                   const CellOptions& opt = {}) {
    detail::require(n_start >= 8 && n_start <= n_max, "diffusivity_continuation: need 8 <= n_start <= n_max");
    ContinuationResult r;
    for (int n = n_start; n <= n_max; n *= 2) {
        const FlowField flow = build_flow(spec, dim, n);
        const auto d = directional_diffusivity(flow, A, e, opt);
        r.history.push_back({n, d.D_e, d.cell.converged});
        if (r.history.size() >= 2) {
            const double prev = r.history[r.history.size() - 2].D_e;
            r.last_change = std::abs(d.D_e - prev) / d.D_e;
            if (r.last_change < rel_change && d.cell.converged) {
                r.converged = true;
                break;
            }
        }
    }
    r.D_e = r.history.back().D_e;
    r.accepted_n = r.history.back().n;
    return r;
}

}  // namespace kppflow
