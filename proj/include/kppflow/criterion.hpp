#pragma once

// Band-limited least squares for u.grad phi = u.e and the Bounded/Diverging
// classification of directions built on it.
//
// Nonexistence of a finite-energy phi cannot be proven from finite data. The
// verdict Diverging rests on measured D_e growth; the least-squares residual
// only corroborates. Bounded needs both a collapsing residual and saturated D_e.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kppflow/flows.hpp"
#include "kppflow/homogenize.hpp"
#include "kppflow/krylov.hpp"
#include "kppflow/torus.hpp"

namespace kppflow {

struct CriterionOptions {
    double shift_factor = 1e-10;   ///< Tikhonov shift = shift_factor * mean |u|^2
    std::size_t dense_limit = 3000;  ///< unknown count above which matrix-free CG is used
    double cg_tol = 1e-10;
    int cg_max_iterations = 20000;
};

struct CriterionTrend {
    int reference_cutoff = 0;  ///< cutoff the reduction is measured from (4 when present)
    double reduction = 1.0;    ///< r(reference) / r(N_max)
    double grad_growth = 1.0;  ///< |grad phi|(N_max) / |grad phi|(reference)
    bool exact = false;        ///< r(N_max) at roundoff level
    bool collapsed = false;
};

struct CriterionDiagnostics {
    std::vector<double> e;
    std::vector<int> mode_cutoffs;
    std::vector<double> residuals;      ///< ||u.grad phi_N - u.e|| / ||u.e|| (grid L2)
    std::vector<double> abs_residuals;  ///< ||u.grad phi_N - u.e||, cell-averaged L2
    std::vector<double> grad_norms;     ///< sqrt(mean |grad phi_N|^2)
    std::vector<std::size_t> unknowns;
    std::vector<std::string> methods;   ///< "dense" or "cg"
    std::vector<std::vector<std::string>> flags;
    std::vector<ScalarField> minimizers;
    double shift = 0.0;
    bool residuals_nonincreasing = true;
    bool grad_norms_nondecreasing = true;
    CriterionTrend trend;
};

namespace detail {

inline ScalarField product_pointwise(const ScalarField& a, const ScalarField& b) {
    ScalarField r(a.grid());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = a[i] * b[i];
    return r;
}

struct BandModes {
    std::vector<std::array<int, 3>> m;
    std::vector<std::array<double, 3>> k;
    std::vector<double> knorm;
    std::vector<std::size_t> neg;  ///< index of -m
};

inline BandModes band_modes(const TorusGrid& g, int N) {
    BandModes b;
    const int d = g.dim();
    const int n2 = d == 3 ? N : 0;
    for (int a = 0; a <= 2 * N; ++a)
        for (int c = 0; c <= 2 * N; ++c)
            for (int z = 0; z <= 2 * n2; ++z) {
                const std::array<int, 3> m{a - N, c - N, d == 3 ? z - N : 0};
                if (m[0] == 0 && m[1] == 0 && m[2] == 0)
                    continue;
                std::array<double, 3> k{0.0, 0.0, 0.0};
                double kk = 0.0;
                for (int ax = 0; ax < d; ++ax) {
                    k[ax] = 2.0 * std::numbers::pi * m[ax] / g.period(ax);
                    kk += k[ax] * k[ax];
                }
                b.m.push_back(m);
                b.k.push_back(k);
                b.knorm.push_back(std::sqrt(kk));
            }
    // enumeration is symmetric under m -> -m
    const std::size_t K = b.m.size();
    b.neg.resize(K);
    for (std::size_t i = 0; i < K; ++i)
        b.neg[i] = K - 1 - i;
    return b;
}

/// Position of integer mode m (any sign) in the r2c layout, and whether the
/// stored value must be conjugated.
inline std::pair<std::size_t, bool> half_index(const TorusGrid& g, std::array<int, 3> m) {
    const int d = g.dim();
    for (int a = 0; a < d; ++a) {
        const int n = g.n(a);
        m[a] = ((m[a] % n) + n) % n;
    }
    bool conj = false;
    const int last = d - 1;
    if (m[last] > g.n(last) / 2) {
        conj = true;
        for (int a = 0; a < d; ++a)
            m[a] = (g.n(a) - m[a]) % g.n(a);
    }
    std::size_t s = 0;
    for (int a = 0; a < d; ++a)
        s = s * static_cast<std::size_t>(g.spectral_extent(a)) + static_cast<std::size_t>(m[a]);
    return {s, conj};
}

inline cplx spectrum_at(const std::vector<cplx>& spec, const TorusGrid& g, const std::array<int, 3>& m) {
    const auto [s, c] = half_index(g, m);
    return c ? std::conj(spec[s]) : spec[s];
}

/// Real field sum_m coef_m e^{i k_m x} for a Hermitian coefficient set on the band.
inline ScalarField band_field(const Spectral& sp, const BandModes& b, const std::vector<cplx>& coef) {
    const TorusGrid& g = sp.grid();
    std::vector<cplx> h(sp.spectral_size(), cplx{0.0, 0.0});
    for (std::size_t i = 0; i < b.m.size(); ++i) {
        const auto [s, c] = half_index(g, b.m[i]);
        if (!c)
            h[s] = coef[i];
    }
    return sp.inverse(h);
}

/// u.grad phi evaluated pointwise (the grid objective, no dealiasing).
inline ScalarField transport(const VectorField& u, const ScalarField& phi) {
    const VectorField gphi = gradient(phi);
    ScalarField r(phi.grid());
    for (int a = 0; a < u.dim(); ++a)
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] += u[a][i] * gphi[a][i];
    return r;
}

struct BandSolve {
    ScalarField phi;
    std::string method;
    std::vector<std::string> flags;
};

/// Minimize mean |u.grad phi - u.b|^2 + shift mean |grad phi|^2 over mean-zero phi on the band.
inline BandSolve band_least_squares(const FlowField& flow, const std::vector<double>& b, int N, double shift,
                                    const CriterionOptions& opt) {
    const TorusGrid& g = flow.grid();
    const VectorField& u = flow.u();
    const int d = g.dim();
    const Spectral sp(g);
    const BandModes band = band_modes(g, N);
    const std::size_t K = band.m.size();
    const ScalarField ub = u.dot(b);

    // rhs_l = (-i / |k_l|) sum_a k_la F(u_a ub)(l)
    std::array<std::vector<cplx>, 3> fub;
    for (int a = 0; a < d; ++a)
        fub[a] = sp.forward(product_pointwise(u[a], ub));
    std::vector<cplx> rhs(K);
    for (std::size_t i = 0; i < K; ++i) {
        cplx s{0.0, 0.0};
        for (int a = 0; a < d; ++a)
            s += band.k[i][a] * spectrum_at(fub[a], g, band.m[i]);
        rhs[i] = cplx{0.0, -1.0} * s / band.knorm[i];
    }

    BandSolve out;
    std::vector<cplx> dvec(K, cplx{0.0, 0.0});
    if (K <= opt.dense_limit) {
        out.method = "dense";
        std::array<std::array<std::vector<cplx>, 3>, 3> w;
        for (int a = 0; a < d; ++a)
            for (int c = a; c < d; ++c)
                w[a][c] = sp.forward(product_pointwise(u[a], u[c]));
        Eigen::MatrixXcd M(K, K);
        for (std::size_t l = 0; l < K; ++l)
            for (std::size_t k = 0; k < K; ++k) {
                std::array<int, 3> diff{};
                for (int a = 0; a < 3; ++a)
                    diff[a] = band.m[l][a] - band.m[k][a];
                cplx s{0.0, 0.0};
                for (int a = 0; a < d; ++a)
                    for (int c = 0; c < d; ++c) {
                        const cplx wac = spectrum_at(w[std::min(a, c)][std::max(a, c)], g, diff);
                        s += band.k[l][a] * band.k[k][c] * wac;
                    }
                M(l, k) = s / (band.knorm[l] * band.knorm[k]);
            }
        M.diagonal().array() += shift;
        Eigen::VectorXcd r = Eigen::Map<const Eigen::VectorXcd>(rhs.data(), K);
        Eigen::LLT<Eigen::MatrixXcd> llt(M);
        Eigen::VectorXcd x;
        if (llt.info() == Eigen::Success) {
            x = llt.solve(r);
        } else {
            out.flags.push_back("cholesky failed; pivoted LDLT used");
            x = M.ldlt().solve(r);
        }
        const double rn = r.norm();
        if (rn > 0.0 && (M * x - r).norm() > 1e-6 * rn)
            out.flags.push_back("normal equations unresolved at this shift");
        for (std::size_t i = 0; i < K; ++i)
            dvec[i] = x[static_cast<Eigen::Index>(i)];
    } else {
        out.method = "cg";
        // matrix-free normal operator on the complex coefficient vector: a complex
        // potential Phi is carried as two real fields Phi_r + i Phi_i
        std::vector<cplx> p(K), q(K);
        auto apply = [&](const std::vector<cplx>& in, std::vector<cplx>& res) {
            for (std::size_t i = 0; i < K; ++i) {
                const cplx ci = in[i] / band.knorm[i];
                const cplx cn = std::conj(in[band.neg[i]] / band.knorm[band.neg[i]]);
                p[i] = 0.5 * (ci + cn);
                q[i] = (ci - cn) / cplx{0.0, 2.0};
            }
            const ScalarField gr = transport(u, band_field(sp, band, p));
            const ScalarField gi = transport(u, band_field(sp, band, q));
            std::array<std::vector<cplx>, 3> fr, fi;
            for (int a = 0; a < d; ++a) {
                fr[a] = sp.forward(product_pointwise(u[a], gr));
                fi[a] = sp.forward(product_pointwise(u[a], gi));
            }
            for (std::size_t i = 0; i < K; ++i) {
                cplx s{0.0, 0.0};
                for (int a = 0; a < d; ++a)
                    s += band.k[i][a] *
                         (spectrum_at(fr[a], g, band.m[i]) + cplx{0.0, 1.0} * spectrum_at(fi[a], g, band.m[i]));
                res[i] = cplx{0.0, -1.0} * s / band.knorm[i] + shift * in[i];
            }
        };
        const KrylovReport rep = conjugate_gradient<cplx>(apply, rhs, dvec, opt.cg_tol, opt.cg_max_iterations);
        if (!rep.converged)
            out.flags.push_back("conjugate gradients did not converge (residual " + std::to_string(rep.residual) +
                                ")");
    }

    // real part of the potential; the exact minimizer is Hermitian
    std::vector<cplx> coef(K);
    for (std::size_t i = 0; i < K; ++i) {
        const cplx ci = dvec[i] / band.knorm[i];
        const cplx cn = std::conj(dvec[band.neg[i]] / band.knorm[band.neg[i]]);
        coef[i] = 0.5 * (ci + cn);
    }
    out.phi = band_field(sp, band, coef);
    return out;
}

}  // namespace detail

inline std::vector<int> default_cutoffs(int dim) {
    return dim == 3 ? std::vector<int>{1, 2, 3, 4, 6} : std::vector<int>{2, 4, 8, 16};
}

/// Residual-collapse evidence from a cutoff sequence.
inline CriterionTrend criterion_trend(const std::vector<int>& cutoffs, const std::vector<double>& residuals,
                                      const std::vector<double>& grad_norms, double collapse_factor = 100.0,
                                      double grad_growth_limit = 2.0) {
    CriterionTrend t;
    if (cutoffs.empty())
        return t;
    std::size_t ref = 0;
    for (std::size_t i = 0; i < cutoffs.size(); ++i)
        if (cutoffs[i] <= 4)
            ref = i;
    const std::size_t last = cutoffs.size() - 1;
    t.reference_cutoff = cutoffs[ref];
    t.exact = residuals[last] <= 1e-12;
    t.reduction = residuals[last] > 0.0 ? residuals[ref] / residuals[last] : INFINITY;
    if (grad_norms[ref] > 0.0)
        t.grad_growth = grad_norms[last] / grad_norms[ref];
    else
        t.grad_growth = grad_norms[last] > 0.0 ? INFINITY : 1.0;
    t.collapsed = t.exact || (ref != last && t.reduction >= collapse_factor && t.grad_growth <= grad_growth_limit);
    return t;
}

/// For each cutoff N, the best mean-zero phi on modes |m|_inf <= N for u.grad phi = u.e.
inline CriterionDiagnostics h1_least_squares(const FlowField& flow, std::vector<double> e,
                                             std::vector<int> cutoffs = {}, const CriterionOptions& opt = {}) {
    const TorusGrid& g = flow.grid();
    const int d = g.dim();
    e = detail::unit_direction(std::move(e), d, "h1_least_squares");
    if (cutoffs.empty())
        cutoffs = default_cutoffs(d);
    for (std::size_t i = 0; i < cutoffs.size(); ++i) {
        detail::require(cutoffs[i] >= 1, "h1_least_squares: cutoffs must be positive");
        detail::require(i == 0 || cutoffs[i] > cutoffs[i - 1], "h1_least_squares: cutoffs must increase");
        for (int a = 0; a < d; ++a)
            detail::require(cutoffs[i] < g.n(a) / 2, "h1_least_squares: cutoff " + std::to_string(cutoffs[i]) +
                                                         " is not below the Nyquist index of " + g.describe());
    }
    CriterionDiagnostics r;
    r.e = e;
    r.mode_cutoffs = cutoffs;
    const VectorField& u = flow.u();
    double usq = 0.0;
    for (int a = 0; a < d; ++a)
        usq += reduce(u[a], ReduceKind::L2SqMean);
    r.shift = opt.shift_factor * usq;
    const ScalarField ue = u.dot(e);
    const double bnorm = std::sqrt(reduce(ue, ReduceKind::L2SqMean));
    const bool trivial = bnorm <= 1e-14 * std::sqrt(usq);

    for (int N : cutoffs) {
        std::size_t K = 1;
        for (int a = 0; a < d; ++a)
            K *= static_cast<std::size_t>(2 * N + 1);
        --K;
        r.unknowns.push_back(K);
        if (trivial) {
            r.residuals.push_back(0.0);
            r.abs_residuals.push_back(bnorm);
            r.grad_norms.push_back(0.0);
            r.methods.push_back("trivial");
            r.flags.emplace_back();
            r.minimizers.emplace_back(g, 0.0);
            continue;
        }
        auto sol = detail::band_least_squares(flow, e, N, r.shift, opt);
        ScalarField res = detail::transport(u, sol.phi);
        res -= ue;
        const double an = std::sqrt(reduce(res, ReduceKind::L2SqMean));
        r.abs_residuals.push_back(an);
        r.residuals.push_back(an / bnorm);
        r.grad_norms.push_back(std::sqrt(detail::gradient_energy(sol.phi)));
        r.methods.push_back(sol.method);
        r.flags.push_back(std::move(sol.flags));
        r.minimizers.push_back(std::move(sol.phi));
    }
    for (std::size_t i = 1; i < cutoffs.size(); ++i) {
        // nested spaces; the shift allows a relative slack of its own size
        if (r.residuals[i] > r.residuals[i - 1] * (1.0 + 1e-8) + 1e-12)
            r.residuals_nonincreasing = false;
        if (r.grad_norms[i] < r.grad_norms[i - 1] * (1.0 - 1e-8) - 1e-12)
            r.grad_norms_nondecreasing = false;
    }
    r.trend = criterion_trend(r.mode_cutoffs, r.residuals, r.grad_norms);
    return r;
}

struct LinearityCheck {
    int cutoff = 0;
    double residual_e = 0.0;    ///< absolute residuals, cell-averaged L2
    double residual_f = 0.0;
    double residual_sum = 0.0;  ///< for e + f at phi_N(e) + phi_N(f)
    bool holds = false;
};

/// Evaluate the residual for e + f at the sum of the two band minimizers.
inline LinearityCheck linearity_check(const FlowField& flow, const std::vector<double>& e,
                                      const std::vector<double>& f, int cutoff, const CriterionOptions& opt = {}) {
    const auto de = h1_least_squares(flow, e, {cutoff}, opt);
    const auto df = h1_least_squares(flow, f, {cutoff}, opt);
    LinearityCheck c;
    c.cutoff = cutoff;
    c.residual_e = de.abs_residuals[0];
    c.residual_f = df.abs_residuals[0];
    ScalarField phi = de.minimizers[0];
    phi += df.minimizers[0];
    std::vector<double> sum(e.size());
    for (std::size_t a = 0; a < e.size(); ++a)
        sum[a] = de.e[a] + df.e[a];
    ScalarField res = detail::transport(flow.u(), phi);
    res -= flow.u().dot(sum);
    c.residual_sum = std::sqrt(reduce(res, ReduceKind::L2SqMean));
    c.holds = c.residual_sum <= c.residual_e + c.residual_f;
    return c;
}

enum class Verdict { Bounded, Diverging, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Bounded:
            return "Bounded";
        case Verdict::Diverging:
            return "Diverging";
        case Verdict::Inconclusive:
            return "Inconclusive";
    }
    return "?";
}

struct ClassifyThresholds {
    double growth = 0.15;            ///< Bounded needs D(A_max)/D(A_max/4) <= 1 + growth
    double collapse_factor = 100.0;  ///< residual reduction from N=4 to N_max
    double grad_growth = 2.0;        ///< allowed growth of |grad phi_N| over the same range
    std::vector<int> cutoffs;        ///< empty: default_cutoffs(dim)
};

struct DirectionClassification {
    Verdict verdict = Verdict::Inconclusive;
    std::string flow_id;
    std::vector<double> e;
    std::vector<double> A;
    std::vector<double> D;
    std::vector<double> cell_residuals;
    std::vector<int> cell_iterations;
    double slope = 0.0;       ///< log D vs log A over the top half of the samples
    double growth_4 = 1.0;    ///< D growth per factor 4 in A over the last two samples
    bool saturated = false;
    bool growing = false;
    ClassifyThresholds thresholds;
    CriterionDiagnostics criterion;
    std::vector<std::string> reasons;
};

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

inline DirectionClassification classify_direction(const FlowField& flow, std::vector<double> e,
                                                  const std::vector<double>& A_samples,
                                                  const ClassifyThresholds& th = {}, const CellOptions& cell = {},
                                                  const CriterionOptions& copt = {}) {
    e = detail::unit_direction(std::move(e), flow.dim(), "classify_direction");
    detail::require(A_samples.size() >= 3, "classify_direction: at least three amplitudes are required");
    for (std::size_t i = 0; i < A_samples.size(); ++i) {
        detail::require(A_samples[i] > 0.0 && std::isfinite(A_samples[i]),
                        "classify_direction: amplitudes must be positive");
        detail::require(i == 0 || A_samples[i] > A_samples[i - 1], "classify_direction: amplitudes must increase");
    }
    DirectionClassification c;
    c.flow_id = flow.id();
    c.e = e;
    c.A = A_samples;
    c.thresholds = th;

    c.criterion = h1_least_squares(flow, e, th.cutoffs, copt);
    c.criterion.trend = criterion_trend(c.criterion.mode_cutoffs, c.criterion.residuals, c.criterion.grad_norms,
                                        th.collapse_factor, th.grad_growth);
    const bool collapsed = c.criterion.trend.collapsed;

    bool solves_ok = true;
    try {
        const auto sweep = diffusivity_sweep(flow, A_samples, e, cell);
        for (const auto& s : sweep) {
            c.D.push_back(s.D_e);
            c.cell_residuals.push_back(s.cell.residual);
            c.cell_iterations.push_back(s.cell.iterations);
            if (!s.cell.converged) {
                solves_ok = false;
                std::ostringstream os;
                os << "cell problem at A=" << s.A << " did not converge (residual " << s.cell.residual << ")";
                c.reasons.push_back(os.str());
            }
        }
    } catch (const std::exception& ex) {
        solves_ok = false;
        c.reasons.push_back(std::string("diffusivity solve failed: ") + ex.what());
    }
    if (!solves_ok) {
        c.verdict = Verdict::Inconclusive;
        return c;
    }

    const std::size_t n = c.A.size();
    const std::size_t top = std::max<std::size_t>(2, (n + 1) / 2);
    c.slope = loglog_slope({c.A.end() - top, c.A.end()}, {c.D.end() - top, c.D.end()});
    const double span = std::log(c.A[n - 1] / c.A[n - 2]);
    c.growth_4 = std::pow(c.D[n - 1] / c.D[n - 2], std::log(4.0) / span);
    c.saturated = c.growth_4 <= 1.0 + th.growth;
    c.growing = !c.saturated;

    std::ostringstream os;
    os << "D growth per factor 4 in A: " << c.growth_4 << " (threshold " << 1.0 + th.growth << ")";
    c.reasons.push_back(os.str());
    std::ostringstream cs;
    cs << "least-squares residual reduction " << c.criterion.trend.reduction << " from N="
       << c.criterion.trend.reference_cutoff << ", gradient growth " << c.criterion.trend.grad_growth
       << (collapsed ? " (collapse)" : " (no collapse)");
    c.reasons.push_back(cs.str());

    if (collapsed && c.saturated) {
        c.verdict = Verdict::Bounded;
    } else if (c.growing && !collapsed) {
        c.verdict = Verdict::Diverging;
    } else {
        c.verdict = Verdict::Inconclusive;
        c.reasons.push_back(collapsed ? "residual collapses but D_e has not saturated"
                                      : "D_e saturated but the residual does not collapse");
    }
    return c;
}

inline nlohmann::json to_json(const CriterionDiagnostics& d) {
    nlohmann::json j;
    j["e"] = d.e;
    j["mode_cutoffs"] = d.mode_cutoffs;
    j["residuals"] = d.residuals;
    j["abs_residuals"] = d.abs_residuals;
    j["grad_norms"] = d.grad_norms;
    j["unknowns"] = d.unknowns;
    j["methods"] = d.methods;
    j["flags"] = d.flags;
    j["shift"] = d.shift;
    j["residuals_nonincreasing"] = d.residuals_nonincreasing;
    j["grad_norms_nondecreasing"] = d.grad_norms_nondecreasing;
    j["trend"] = {{"reference_cutoff", d.trend.reference_cutoff},
                  {"reduction", std::isfinite(d.trend.reduction) ? nlohmann::json(d.trend.reduction)
                                                                 : nlohmann::json("inf")},
                  {"grad_growth", std::isfinite(d.trend.grad_growth) ? nlohmann::json(d.trend.grad_growth)
                                                                     : nlohmann::json("inf")},
                  {"exact", d.trend.exact},
                  {"collapsed", d.trend.collapsed}};
    return j;
}

inline nlohmann::json to_json(const DirectionClassification& c) {
    nlohmann::json j;
    j["flow"] = c.flow_id;
    j["e"] = c.e;
    j["verdict"] = to_string(c.verdict);
    j["A"] = c.A;
    j["D_e"] = c.D;
    j["cell_residuals"] = c.cell_residuals;
    j["cell_iterations"] = c.cell_iterations;
    j["slope_top_half"] = c.slope;
    j["growth_per_factor_4"] = c.growth_4;
    j["saturated"] = c.saturated;
    j["thresholds"] = {{"growth", c.thresholds.growth},
                       {"collapse_factor", c.thresholds.collapse_factor},
                       {"grad_growth", c.thresholds.grad_growth}};
    j["criterion"] = to_json(c.criterion);
    j["reasons"] = c.reasons;
    return j;
}

}  // namespace kppflow
