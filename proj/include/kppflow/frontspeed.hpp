#pragma once

// Principal eigenvalue kappa_e(lambda;A) of
//   L phi = lap phi - A u.grad phi - 2 lambda e.grad phi + lambda A (u.e) phi,
// the curve mu_e = lambda^2 + kappa_e, its inverse, and the minimal front speed
//   c* = inf_lambda (f'(0) + mu_e(lambda)) / lambda.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kppflow/flows.hpp"
#include "kppflow/homogenize.hpp"
#include "kppflow/krylov.hpp"
#include "kppflow/torus.hpp"

namespace kppflow {

struct EigenOptions {
    double tol = 1e-8;        ///< residual ||L phi - kappa phi|| / (||phi|| scale)
    int max_outer = 400;
    int restart = 50;
    int max_inner = 4000;
    double shift_factor = 0.1;  ///< shift offset as a fraction of 1 + lambda A |u| + lambda^2
};

struct EigenPoint {
    double lambda = 0.0;
    double A = 0.0;
    std::vector<double> e;
    double kappa = 0.0;
    double mu = 0.0;
    ScalarField phi;  ///< positive, max phi = 1
    double residual = 0.0;
    int outer_iterations = 0;
    int inner_iterations = 0;
    bool converged = true;
};

namespace detail {

/// Spectral form of L, the shifted operator and its constant-coefficient preconditioner.
class TwistedOperator {
 public:
    TwistedOperator(const FlowField& flow, double A, const std::vector<double>& e, double lambda)
        : A_(A), lambda_(lambda), e_(e), ue_(flow.u().dot(e)), op_(flow.u(), &ue_), sp_(op_.spectral()) {
        const std::size_t ns = sp_.spectral_size();
        drift_.resize(ns);
        for (std::size_t s = 0; s < ns; ++s) {
            double ek = 0.0;
            for (int a = 0; a < flow.dim(); ++a)
                ek += e[a] * sp_.k(a, s);
            drift_[s] = cplx{0.0, 2.0 * lambda * ek};
        }
        fh_.resize(ns);
        out_.resize(ns);
    }

    const ScalarField& ue() const { return ue_; }
    const Spectral& spectral() const { return sp_; }

    /// y = (shift - L) x
    void shifted(double shift, const std::vector<double>& x, std::vector<double>& y) {
        sp_.forward(x, fh_);
        op_.apply(fh_, out_, A_, -lambda_ * A_);
        for (std::size_t s = 0; s < fh_.size(); ++s)
            out_[s] += (shift + sp_.k2(s) + drift_[s]) * fh_[s];
        sp_.inverse(out_, y, scratch_);
    }

    /// y = (shift - lap + 2 lambda e.grad)^{-1} x
    void precondition(double shift, const std::vector<double>& x, std::vector<double>& y) {
        sp_.forward(x, fh_);
        for (std::size_t s = 0; s < fh_.size(); ++s)
            fh_[s] /= shift + sp_.k2(s) + drift_[s];
        sp_.inverse(fh_, y, scratch_);
    }

    /// ||L x - kappa x|| / ||x||
    double residual(const std::vector<double>& x, double kappa) {
        std::vector<double> y(x.size());
        shifted(kappa, x, y);
        return detail::norm(y) / detail::norm(x);
    }

    /// kappa = lambda A mean(u.e phi) / mean(phi), exact for the eigenfunction.
    double flux_estimate(const std::vector<double>& phi) const {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < phi.size(); ++i) {
            num += ue_[i] * phi[i];
            den += phi[i];
        }
        return lambda_ * A_ * num / den;
    }

 private:
    double A_, lambda_;
    std::vector<double> e_;
    ScalarField ue_;
    DealiasedOperator op_;
    const Spectral& sp_;
    std::vector<cplx> drift_, fh_, out_, scratch_;
};

inline double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace detail

/// Principal eigenpair by shifted inverse iteration: phi <- (sigma - L)^{-1} phi with
/// sigma kept above kappa by a Collatz-Wielandt bound, so every iterate stays positive.
inline EigenPoint principal_eigenvalue(const FlowField& flow, double A, std::vector<double> e, double lambda,
                                       const EigenOptions& opt = {}, const EigenPoint* warm = nullptr) {
    detail::require(std::isfinite(lambda) && lambda >= 0.0, "principal_eigenvalue: lambda must be >= 0");
    detail::require(std::isfinite(A), "principal_eigenvalue: amplitude must be finite");
    detail::require(opt.tol > 0.0, "principal_eigenvalue: tol must be positive");
    const TorusGrid& g = flow.grid();
    e = detail::unit_direction(std::move(e), g.dim(), "principal_eigenvalue");

    EigenPoint p;
    p.lambda = lambda;
    p.A = A;
    p.e = e;
    p.mu = lambda * lambda;
    p.phi = ScalarField(g, 1.0);
    if (lambda == 0.0 || A == 0.0)
        return p;

    detail::TwistedOperator L(flow, A, e, lambda);
    const double scale = 1.0 + lambda * std::abs(A) * flow.max_speed() + lambda * lambda;
    const double delta = opt.shift_factor * scale;
    const double inner_tol = std::max(1e-12, 0.1 * opt.tol);

    std::vector<double> phi(g.size(), 1.0);
    if (warm && warm->phi.grid() == g)
        phi = warm->phi.storage();
    double ue_max = -INFINITY;
    for (double v : L.ue().values())
        ue_max = std::max(ue_max, lambda * A * v);
    double kappa = L.flux_estimate(phi);
    double sigma = ue_max + delta;  // kappa <= max(lambda A u.e) by the maximum principle

    std::vector<double> psi(g.size());
    p.converged = false;
    for (int it = 0; it < opt.max_outer; ++it) {
        ++p.outer_iterations;
        for (std::size_t i = 0; i < psi.size(); ++i)
            psi[i] = phi[i] / (sigma - kappa);
        const double sh = sigma;
        const KrylovReport rep = gmres<double>(
            [&](const std::vector<double>& x, std::vector<double>& y) { L.shifted(sh, x, y); },
            [&](const std::vector<double>& x, std::vector<double>& y) { L.precondition(sh, x, y); }, phi, psi,
            inner_tol, opt.restart, opt.max_inner);
        p.inner_iterations += rep.iterations;

        double ratio_max = 0.0;
        const double cut = 1e-3 * detail::max_of(phi);
        for (std::size_t i = 0; i < phi.size(); ++i)
            if (phi[i] >= cut)
                ratio_max = std::max(ratio_max, psi[i] / phi[i]);
        const double kappa_cw = ratio_max > 0.0 ? sigma - 1.0 / ratio_max : -INFINITY;

        const double top = detail::max_of(psi);
        if (!(top > 0.0) || !std::isfinite(top))
            throw NumericalError("principal_eigenvalue: inverse iterate lost positivity");
        for (std::size_t i = 0; i < phi.size(); ++i)
            phi[i] = psi[i] / top;
        kappa = L.flux_estimate(phi);
        p.residual = L.residual(phi, kappa) / scale;
        if (p.residual <= opt.tol) {
            p.converged = true;
            break;
        }
        sigma = std::max(kappa_cw, kappa) + delta;
    }

    const double floor = *std::min_element(phi.begin(), phi.end());
    if (!(floor > 0.0)) {
        std::ostringstream os;
        os << "principal_eigenvalue: eigenfunction lost positivity (min phi = " << floor << ", lambda = " << lambda
           << ", A = " << A << ", residual = " << p.residual << ")";
        throw NumericalError(os.str());
    }
    p.kappa = kappa;
    p.mu = lambda * lambda + kappa;
    p.phi = ScalarField(g, std::move(phi));
    return p;
}

struct MuCurve {
    std::vector<EigenPoint> points;
    bool monotone = true;
    double min_first_difference = 0.0;
    double min_second_difference = 0.0;  ///< chord second differences divided by max |mu|
    bool convex = true;
    bool converged = true;
};

/// Geometric lambda grid over [1e-2, 1e1] sqrt(f'(0)).
inline std::vector<double> default_lambda_grid(double f_prime0, int points = 17) {
    detail::require(f_prime0 > 0.0 && points >= 2, "default_lambda_grid: invalid arguments");
    std::vector<double> l(points);
    const double lo = std::log(1e-2), hi = std::log(1e1);
    for (int i = 0; i < points; ++i)
        l[i] = std::sqrt(f_prime0) * std::exp(lo + (hi - lo) * i / (points - 1));
    return l;
}

/// mu_e over a sorted lambda grid with warm-started eigenfunctions and a shape report.
inline MuCurve mu_curve(const FlowField& flow, double A, const std::vector<double>& e,
                        const std::vector<double>& lambdas, const EigenOptions& opt = {},
                        double convexity_tol = 1e-6) {
    detail::require(!lambdas.empty(), "mu_curve: empty lambda grid");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        detail::require(lambdas[i] >= 0.0, "mu_curve: lambdas must be nonnegative");
        detail::require(i == 0 || lambdas[i] > lambdas[i - 1], "mu_curve: lambdas must be strictly increasing");
    }
    MuCurve c;
    for (double l : lambdas) {
        const EigenPoint* warm = c.points.empty() ? nullptr : &c.points.back();
        c.points.push_back(principal_eigenvalue(flow, A, e, l, opt, warm));
        c.converged = c.converged && c.points.back().converged;
    }
    double mu_max = 0.0;
    for (const auto& p : c.points)
        mu_max = std::max(mu_max, std::abs(p.mu));
    const double norm = mu_max > 0.0 ? mu_max : 1.0;
    c.min_first_difference = INFINITY;
    c.min_second_difference = INFINITY;
    for (std::size_t i = 1; i < c.points.size(); ++i)
        c.min_first_difference = std::min(c.min_first_difference, c.points[i].mu - c.points[i - 1].mu);
    for (std::size_t i = 1; i + 1 < c.points.size(); ++i) {
        const double h0 = c.points[i].lambda - c.points[i - 1].lambda;
        const double h1 = c.points[i + 1].lambda - c.points[i].lambda;
        const double chord = (h1 * c.points[i - 1].mu + h0 * c.points[i + 1].mu) / (h0 + h1);
        c.min_second_difference = std::min(c.min_second_difference, (chord - c.points[i].mu) / norm);
    }
    if (!std::isfinite(c.min_first_difference))
        c.min_first_difference = 0.0;
    if (!std::isfinite(c.min_second_difference))
        c.min_second_difference = 0.0;
    c.monotone = c.min_first_difference >= -convexity_tol * norm;
    c.convex = c.min_second_difference >= -convexity_tol;
    return c;
}

struct LambdaOfMu {
    double lambda = 0.0;
    double mu = 0.0;           ///< mu_e(lambda) at the returned lambda
    double mu_at_sqrt = 0.0;   ///< mu_e(sqrt(mu)); >= mu certifies lambda <= sqrt(mu)
    bool certificate = true;   ///< lambda <= sqrt(mu) + tol
    bool bracket_ok = true;
    bool converged = true;
    int evaluations = 0;
};

/// Inverse of the increasing map lambda -> mu_e(lambda;A) by bisection on [0, sqrt(mu)],
/// optionally starting from a narrower bracket [hint_lo, hint_hi] when it brackets mu.
inline LambdaOfMu lambda_of_mu(const FlowField& flow, double A, const std::vector<double>& e, double mu,
                               double tol = 1e-8, const EigenOptions& opt = {},
                               std::optional<std::pair<double, double>> hint = std::nullopt) {
    detail::require(std::isfinite(mu) && mu > 0.0, "lambda_of_mu: mu must be positive");
    LambdaOfMu r;
    const double top = std::sqrt(mu);
    std::optional<EigenPoint> last;
    auto eval = [&](double l) {
        ++r.evaluations;
        last = principal_eigenvalue(flow, A, e, l, opt, last ? &*last : nullptr);
        r.converged = r.converged && last->converged;
        return last->mu;
    };
    r.mu_at_sqrt = eval(top);
    double lo = 0.0, hi = top;
    if (r.mu_at_sqrt < mu * (1.0 - tol)) {
        r.bracket_ok = false;
        r.lambda = top;
        r.mu = r.mu_at_sqrt;
        r.certificate = false;
        return r;
    }
    if (std::abs(r.mu_at_sqrt - mu) <= tol * mu) {
        r.lambda = top;
        r.mu = r.mu_at_sqrt;
        return r;
    }
    if (hint && hint->first > 0.0 && hint->first < hint->second && hint->second <= top) {
        const double mlo = eval(hint->first), mhi = eval(hint->second);
        if (mlo <= mu && mhi >= mu) {
            lo = hint->first;
            hi = hint->second;
        }
    }
    double m = NAN, mid = hi;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        m = eval(mid);
        if (std::abs(m - mu) <= tol * mu)
            break;
        (m < mu ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * hi)
            break;
    }
    r.lambda = mid;
    r.mu = m;
    r.converged = r.converged && std::abs(m - mu) <= tol * mu;
    r.certificate = r.lambda <= top + tol;
    return r;
}

struct SpeedResult {
    double c_star = NAN;
    double lambda_star = NAN;
    double mu_star = NAN;
    double f_prime0 = NAN;
    double A = 0.0;
    std::vector<double> e;
    std::vector<EigenPoint> curve;  ///< every evaluated point, sorted by lambda
    double bracket_lo = NAN, bracket_hi = NAN;
    bool bracket_ok = true;
    double c_mu_form = NAN;   ///< (f'(0) + mu*) / lambda_e(mu*)
    double form_agreement = NAN;
    double lambda_inverse = NAN;  ///< lambda_e(mu*) from the inverse map
    bool inverse_bound = true;    ///< lambda_e(mu*) <= sqrt(mu*) + 1e-8
    bool converged = true;
    bool above_kpp = true;    ///< c* >= 2 sqrt(f'(0)) - 1e-6
    std::vector<std::string> flags;
};

struct SpeedOptions {
    EigenOptions eigen{};
    double lambda_rel_tol = 1e-5;  ///< golden-section bracket width relative to lambda
    bool cross_check = true;
    double bracket_limit = 1e3;  ///< expansion stops at bracket_limit sqrt(f'(0))
    bool keep_eigenfunctions = false;
};

/// Minimal speed by golden-section search on an automatically expanded bracket.
inline SpeedResult minimal_speed(const FlowField& flow, double A, std::vector<double> e, double f_prime0,
                                 const SpeedOptions& opt = {}) {
    detail::require(std::isfinite(f_prime0) && f_prime0 > 0.0, "minimal_speed: f'(0) must be positive");
    e = detail::unit_direction(std::move(e), flow.dim(), "minimal_speed");
    SpeedResult r;
    r.f_prime0 = f_prime0;
    r.A = A;
    r.e = e;
    const double root = std::sqrt(f_prime0);

    std::vector<EigenPoint> pts;
    auto nearest = [&](double l) -> const EigenPoint* {
        const EigenPoint* best = nullptr;
        for (const auto& p : pts)
            if (!best || std::abs(std::log(p.lambda / l)) < std::abs(std::log(best->lambda / l)))
                best = &p;
        return best;
    };
    auto objective = [&](double l) {
        EigenPoint p = principal_eigenvalue(flow, A, e, l, opt.eigen, nearest(l));
        r.converged = r.converged && p.converged;
        EigenPoint stored = p;
        if (!opt.keep_eigenfunctions)
            stored.phi = ScalarField();
        r.curve.push_back(std::move(stored));
        if (pts.size() >= 4)
            pts.erase(pts.begin());
        pts.push_back(std::move(p));
        return (f_prime0 + pts.back().mu) / l;
    };

    // expand: lambda_lo, 2 lambda_lo, ... until the objective increases
    double l0 = 1e-3 * root, g0 = objective(l0);
    double l1 = 2.0 * l0, g1 = objective(l1);
    double a = l0;
    while (!(g1 > g0)) {
        if (l1 > opt.bracket_limit * root) {
            r.bracket_ok = false;
            r.flags.push_back("bracket expansion exceeded the lambda limit; objective still decreasing");
            r.lambda_star = l1;
            r.c_star = g1;
            break;
        }
        a = l0;
        l0 = l1;
        g0 = g1;
        l1 = 2.0 * l1;
        g1 = objective(l1);
    }
    if (r.bracket_ok) {
        double b = l1;
        r.bracket_lo = a;
        r.bracket_hi = b;
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
        double f1 = objective(x1), f2 = objective(x2);
        while (b - a > opt.lambda_rel_tol * 0.5 * (a + b)) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - phi * (b - a);
                f1 = objective(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (b - a);
                f2 = objective(x2);
            }
        }
        const double lstar = f1 <= f2 ? x1 : x2;
        r.lambda_star = lstar;
        r.c_star = std::min(f1, f2);
    }
    std::sort(r.curve.begin(), r.curve.end(), [](const auto& p, const auto& q) { return p.lambda < q.lambda; });
    for (const auto& p : r.curve)
        if (p.lambda == r.lambda_star)
            r.mu_star = p.mu;

    if (r.bracket_ok && opt.cross_check && std::isfinite(r.mu_star) && r.mu_star > 0.0) {
        const double w = 1e-3 * r.lambda_star;
        const auto inv = lambda_of_mu(flow, A, e, r.mu_star, 1e-11, opt.eigen,
                                      std::make_pair(r.lambda_star - w, std::min(r.lambda_star + w, std::sqrt(r.mu_star))));
        r.lambda_inverse = inv.lambda;
        r.inverse_bound = inv.bracket_ok && inv.lambda <= std::sqrt(r.mu_star) + 1e-8;
        if (!r.inverse_bound)
            r.flags.push_back("lambda_e(mu*) exceeds sqrt(mu*)");
        r.c_mu_form = (f_prime0 + r.mu_star) / inv.lambda;
        r.form_agreement = std::abs(r.c_mu_form - r.c_star) / r.c_star;
        if (!(r.form_agreement <= 1e-6))
            r.flags.push_back("lambda-form and mu-form speeds disagree");
    }
    if (!r.converged)
        r.flags.push_back("eigen-solve did not converge");
    r.above_kpp = r.c_star >= 2.0 * root - 1e-6;
    if (!r.above_kpp)
        r.flags.push_back("c* below 2 sqrt(f'(0))");
    return r;
}

struct ZetaCheck {
    double mean_grad_zeta_sq = NAN;
    double defect = NAN;  ///< |mu - mean|grad zeta|^2| / max(mu, 1e-12)
    bool flagged = false;
};

/// With zeta = ln phi + lambda x.e, mu = mean |grad zeta|^2 where grad zeta = grad phi / phi + lambda e.
inline ZetaCheck zeta_identity_check(const EigenPoint& point, const std::vector<double>& e) {
    ZetaCheck z;
    const ScalarField& phi = point.phi;
    detail::require(phi.size() > 0, "zeta_identity_check: eigenpoint has no eigenfunction");
    const auto ev = detail::unit_direction(e, phi.grid().dim(), "zeta_identity_check");
    if (reduce(phi, ReduceKind::Min) < 1e-12) {
        z.flagged = true;
        return z;
    }
    const VectorField g = gradient(phi);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
        for (int a = 0; a < g.dim(); ++a) {
            const double v = g[a][i] / phi[i] + point.lambda * ev[a];
            s += v * v;
        }
    z.mean_grad_zeta_sq = s / static_cast<double>(phi.size());
    z.defect = std::abs(point.mu - z.mean_grad_zeta_sq) / std::max(point.mu, 1e-12);
    return z;
}

}  // namespace kppflow
