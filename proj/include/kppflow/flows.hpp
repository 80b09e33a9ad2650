#pragma once

// Periodic incompressible mean-zero flows: the built-in gallery (shear,
// cellular, checkerboard, gap, 3D cellular, honeycomb) and user samples.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kppflow/torus.hpp"

namespace kppflow {

namespace flows {

/// u = (alpha(x2), 0[, 0]) with alpha = sum_j s_j sin(2 pi j x2/L2) + c_j cos(2 pi j x2/L2).
struct Shear {
    std::vector<double> sin_coef{1.0};
    std::vector<double> cos_coef{};
};

/// u = grad-perp H, H = sin(2 pi x1/L1) sin(2 pi x2/L2).
struct Cellular2D {};

/// H = (sin 2pi x1 sin 2pi x2)^alpha on cells where the product is positive, 0 elsewhere.
struct Checkerboard {
    double exponent = 2.0;
};

/// Cellular flow with dead vertical strips x1 mod 1 in [1-delta, 1).
struct GapFlow {
    double delta = 0.25;
    double exponent = 2.0;
};

/// amp * cos(p1 x1 + t1) * cos(p2 x2 + t2)
struct PhiTerm {
    double amp = 1.0;
    double p1 = 1.0, t1 = 0.0;
    double p2 = 1.0, t2 = 0.0;
};

/// u = (Phi_x1 W'(x3), Phi_x2 W'(x3), k Phi W(x3)) with lap Phi = -k Phi and
/// W = sum_m w_m sin(m x3).
struct Cellular3D {
    std::vector<PhiTerm> phi{{1.0, 1.0, 0.0, 1.0, 0.0}};
    std::vector<double> w_sine{1.0};
    double k = 2.0;

    static Cellular3D cubic() { return {}; }
};

/// Hexagonal cells: Phi = 2 cos(sqrt3 x1) cos x2 + cos(2 x2 - pi/2), W = sin x3, k = 4.
struct Honeycomb3D {};

struct CustomStream {
    ScalarField H;
};

struct CustomVelocity {
    VectorField u;
};

}  // namespace flows

using FlowSpec = std::variant<flows::Shear, flows::Cellular2D, flows::Checkerboard, flows::GapFlow,
                              flows::Cellular3D, flows::Honeycomb3D, flows::CustomStream, flows::CustomVelocity>;

inline std::string flow_kind(const FlowSpec& spec) {
    static const char* names[] = {"shear",      "cellular",  "checkerboard",  "gap",
                                  "cellular3d", "honeycomb", "custom_stream", "custom_velocity"};
    return names[spec.index()];
}

/// Native dimension of a variant (0 = either).
inline int flow_native_dim(const FlowSpec& spec) {
    switch (spec.index()) {
        case 0:
            return 0;
        case 4:
        case 5:
            return 3;
        case 7:
            return std::get<flows::CustomVelocity>(spec).u.dim();
        default:
            return 2;
    }
}

/// Period box a variant is naturally posed on.
inline std::vector<double> natural_periods(const FlowSpec& spec, int dim) {
    const double tp = 2.0 * std::numbers::pi;
    switch (spec.index()) {
        case 4:
            return {tp, tp, tp};
        case 5:
            return {tp / std::sqrt(3.0), tp, tp};
        case 6:
            return std::get<flows::CustomStream>(spec).H.grid().periods();
        case 7:
            return std::get<flows::CustomVelocity>(spec).u.grid().periods();
        default:
            return std::vector<double>(dim, 1.0);
    }
}

struct ValidationReport {
    double max_divergence = 0.0;       ///< max |div u| / max|u|
    std::vector<double> means;         ///< per-component mean / max|u|
    double lipschitz = 0.0;            ///< max forward-difference quotient of u
    double max_speed = 0.0;            ///< max |u|
    bool divergence_ok = false;
    bool mean_ok = false;
    bool lipschitz_ok = false;

    bool passed() const { return divergence_ok && mean_ok && lipschitz_ok; }

    std::string summary() const {
        std::ostringstream os;
        os << "div/|u|=" << max_divergence << " mean/|u|=[";
        for (std::size_t i = 0; i < means.size(); ++i)
            os << (i ? "," : "") << means[i];
        os << "] lip=" << lipschitz << (passed() ? " pass" : " FAIL");
        return os.str();
    }
};

inline constexpr double kDivergenceTol = 1e-8;
inline constexpr double kMeanTol = 1e-10;
inline constexpr double kMeanRemovalLimit = 1e-6;

inline ValidationReport validate_velocity(const VectorField& u) {
    ValidationReport r;
    r.max_speed = u.max_norm();
    const double scale = r.max_speed > 0.0 ? r.max_speed : 1.0;
    for (int a = 0; a < u.dim(); ++a) {
        if (!u[a].all_finite()) {
            r.means.assign(u.dim(), INFINITY);
            r.max_divergence = INFINITY;
            r.lipschitz = INFINITY;
            return r;
        }
    }
    const ScalarField div = divergence(u);
    for (double d : div.values())
        r.max_divergence = std::max(r.max_divergence, std::abs(d) / scale);
    for (int a = 0; a < u.dim(); ++a)
        r.means.push_back(mean(u[a]) / scale);

    const TorusGrid& g = u.grid();
    const int d = g.dim();
    std::array<std::size_t, 3> stride{1, 1, 1};
    for (int a = d - 2; a >= 0; --a)
        stride[a] = stride[a + 1] * static_cast<std::size_t>(g.n(a + 1));
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (int ax = 0; ax < d; ++ax) {
            const auto n = static_cast<std::size_t>(g.n(ax));
            const std::size_t idx = (i / stride[ax]) % n;
            const std::size_t j = idx + 1 < n ? i + stride[ax] : i - idx * stride[ax];
            double diff2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double dv = u[c][j] - u[c][i];
                diff2 += dv * dv;
            }
            r.lipschitz = std::max(r.lipschitz, std::sqrt(diff2) / g.spacing(ax));
        }
    }
    r.divergence_ok = r.max_divergence <= kDivergenceTol;
    r.mean_ok = std::all_of(r.means.begin(), r.means.end(), [](double m) { return std::abs(m) <= kMeanTol; });
    r.lipschitz_ok = std::isfinite(r.lipschitz);
    return r;
}

/// An immutable sampled flow with its validation report.
class FlowField {
 public:
    FlowField(FlowSpec spec, VectorField u, std::string id = {})
        : spec_(std::move(spec)), u_(std::move(u)), report_(validate_velocity(u_)), id_(std::move(id)) {
        if (id_.empty())
            id_ = flow_kind(spec_);
    }

    const FlowSpec& spec() const { return spec_; }
    const TorusGrid& grid() const { return u_.grid(); }
    const VectorField& u() const { return u_; }
    const ValidationReport& validation() const { return report_; }
    const std::string& id() const { return id_; }
    int dim() const { return u_.dim(); }
    double max_speed() const { return report_.max_speed; }

    /// Same flow and samples under a different identifier.
    FlowField renamed(std::string id) const { return {spec_, u_, std::move(id)}; }

 private:
    FlowSpec spec_;
    VectorField u_;
    ValidationReport report_;
    std::string id_;
};

inline ValidationReport validate_flow(const FlowField& flow) { return validate_velocity(flow.u()); }

namespace detail {

inline double shear_profile(const flows::Shear& s, double x2, double L2) {
    double a = 0.0;
    const double w = 2.0 * std::numbers::pi / L2;
    for (std::size_t j = 0; j < s.sin_coef.size(); ++j)
        a += s.sin_coef[j] * std::sin(w * static_cast<double>(j + 1) * x2);
    for (std::size_t j = 0; j < s.cos_coef.size(); ++j)
        a += s.cos_coef[j] * std::cos(w * static_cast<double>(j + 1) * x2);
    return a;
}

/// b^alpha verbatim for integer exponents, |b|^alpha otherwise.
inline double cell_power(double b, double alpha) {
    if (alpha == std::round(alpha))
        return std::pow(b, alpha);
    return std::pow(std::abs(b), alpha);
}

/// d/db of cell_power.
inline double cell_power_derivative(double b, double alpha) {
    if (alpha == std::round(alpha))
        return alpha * std::pow(b, alpha - 1.0);
    return alpha * std::pow(std::abs(b), alpha - 1.0) * (b >= 0.0 ? 1.0 : -1.0);
}

inline double frac(double x) { return x - std::floor(x); }

struct Phi3 {
    double v, d1, d2;
};

inline Phi3 eval_phi(const std::vector<flows::PhiTerm>& terms, double x1, double x2) {
    Phi3 r{0.0, 0.0, 0.0};
    for (const auto& t : terms) {
        const double c1 = std::cos(t.p1 * x1 + t.t1), s1 = std::sin(t.p1 * x1 + t.t1);
        const double c2 = std::cos(t.p2 * x2 + t.t2), s2 = std::sin(t.p2 * x2 + t.t2);
        r.v += t.amp * c1 * c2;
        r.d1 += -t.amp * t.p1 * s1 * c2;
        r.d2 += -t.amp * t.p2 * c1 * s2;
    }
    return r;
}

inline flows::Cellular3D honeycomb_as_cellular3d() {
    flows::Cellular3D c;
    c.phi = {{2.0, std::sqrt(3.0), 0.0, 1.0, 0.0}, {1.0, 0.0, 0.0, 2.0, -std::numbers::pi / 2.0}};
    c.w_sine = {1.0};
    c.k = 4.0;
    return c;
}

}  // namespace detail

/// Stream function of the 2D stream-function variants at a point (unit-torus formulas
/// unless the variant is scaled by the grid periods).
inline double stream_function(const FlowSpec& spec, double x1, double x2, double L1 = 1.0, double L2 = 1.0) {
    const double tp = 2.0 * std::numbers::pi;
    if (std::holds_alternative<flows::Cellular2D>(spec))
        return std::sin(tp * x1 / L1) * std::sin(tp * x2 / L2);
    if (const auto* c = std::get_if<flows::Checkerboard>(&spec)) {
        const double s = std::sin(tp * x1 / L1) * std::sin(tp * x2 / L2);
        return s > 0.0 ? detail::cell_power(s, c->exponent) : 0.0;
    }
    if (const auto* g = std::get_if<flows::GapFlow>(&spec)) {
        const double f = detail::frac(x1 / L1);
        if (f >= 1.0 - g->delta)
            return 0.0;
        const double b = std::sin(tp * f / (1.0 - g->delta)) * std::sin(tp * x2 / L2);
        return detail::cell_power(b, g->exponent);
    }
    throw InputError("stream_function: variant " + flow_kind(spec) + " has no closed-form stream function");
}

/// Exact velocity of the closed-form variants at a point x on the grid's torus.
inline std::array<double, 3> analytic_velocity(const FlowSpec& spec, const std::array<double, 3>& x,
                                               const std::vector<double>& L) {
    const double tp = 2.0 * std::numbers::pi;
    std::array<double, 3> u{0.0, 0.0, 0.0};
    if (const auto* s = std::get_if<flows::Shear>(&spec)) {
        u[0] = detail::shear_profile(*s, x[1], L[1]);
    } else if (std::holds_alternative<flows::Cellular2D>(spec)) {
        const double a = tp / L[0], b = tp / L[1];
        u[0] = -b * std::sin(a * x[0]) * std::cos(b * x[1]);
        u[1] = a * std::cos(a * x[0]) * std::sin(b * x[1]);
    } else if (const auto* c = std::get_if<flows::Checkerboard>(&spec)) {
        const double a = tp / L[0], b = tp / L[1];
        const double sa = std::sin(a * x[0]), sb = std::sin(b * x[1]);
        const double s = sa * sb;
        if (s > 0.0) {
            const double dp = detail::cell_power_derivative(s, c->exponent);
            u[0] = -dp * sa * b * std::cos(b * x[1]);
            u[1] = dp * a * std::cos(a * x[0]) * sb;
        }
    } else if (const auto* g = std::get_if<flows::GapFlow>(&spec)) {
        const double f = detail::frac(x[0] / L[0]);
        if (f < 1.0 - g->delta) {
            const double a = tp / (1.0 - g->delta), b = tp / L[1];
            const double sa = std::sin(a * f), sb = std::sin(b * x[1]);
            const double dp = detail::cell_power_derivative(sa * sb, g->exponent);
            u[0] = -dp * sa * b * std::cos(b * x[1]);
            u[1] = dp * (a / L[0]) * std::cos(a * f) * sb;
        }
    } else if (std::holds_alternative<flows::Cellular3D>(spec) || std::holds_alternative<flows::Honeycomb3D>(spec)) {
        const flows::Cellular3D c = std::holds_alternative<flows::Cellular3D>(spec)
                                        ? std::get<flows::Cellular3D>(spec)
                                        : detail::honeycomb_as_cellular3d();
        const auto phi = detail::eval_phi(c.phi, x[0], x[1]);
        double w = 0.0, wp = 0.0;
        for (std::size_t m = 0; m < c.w_sine.size(); ++m) {
            const double mm = static_cast<double>(m + 1);
            w += c.w_sine[m] * std::sin(mm * x[2]);
            wp += c.w_sine[m] * mm * std::cos(mm * x[2]);
        }
        u[0] = phi.d1 * wp;
        u[1] = phi.d2 * wp;
        u[2] = c.k * phi.v * w;
    } else {
        throw InputError("analytic_velocity: variant " + flow_kind(spec) + " is sample-defined");
    }
    return u;
}

namespace detail {

inline VectorField perp_gradient(const ScalarField& H) {
    const VectorField g = gradient(H);
    VectorField u(H.grid());
    for (std::size_t i = 0; i < H.size(); ++i) {
        u[0][i] = -g[1][i];
        u[1][i] = g[0][i];
    }
    return u;
}

/// Max relative defect of lap Phi = -k Phi on the (x1,x2) grid of a 3D grid.
inline double phi_eigen_defect(const flows::Cellular3D& c, const TorusGrid& grid) {
    const TorusGrid g2({grid.n(0), grid.n(1)}, {grid.period(0), grid.period(1)});
    const ScalarField phi =
        ScalarField::sample(g2, [&](const std::array<double, 3>& x) { return eval_phi(c.phi, x[0], x[1]).v; });
    const ScalarField lap = laplacian(phi);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        num = std::max(num, std::abs(lap[i] + c.k * phi[i]));
        den = std::max(den, std::abs(phi[i]));
    }
    return den > 0.0 ? num / den : num;
}

inline void check_w_periodic(const flows::Cellular3D& c, const TorusGrid& grid) {
    // W must be L3-periodic: m * L3 / (2 pi) integral for every active sine.
    for (std::size_t m = 0; m < c.w_sine.size(); ++m) {
        if (c.w_sine[m] == 0.0)
            continue;
        const double cycles = static_cast<double>(m + 1) * grid.period(2) / (2.0 * std::numbers::pi);
        if (std::abs(cycles - std::round(cycles)) > 1e-9)
            throw InputError("build_flow: W(x3) is not periodic on the x3 period");
    }
}

}  // namespace detail

/// Sample a flow on a grid. Closed-form variants are sampled analytically;
/// stream-function variants take grad-perp H spectrally so that the discrete
/// divergence vanishes.
inline FlowField build_flow(const FlowSpec& spec, const TorusGrid& grid, std::string id = {}) {
    const int native = flow_native_dim(spec);
    if (native != 0 && native != grid.dim())
        throw InputError("build_flow: " + flow_kind(spec) + " needs a " + std::to_string(native) + "D grid");
    const std::vector<double> L = grid.periods();
    VectorField u(grid);

    auto sample_analytic = [&] {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto v = analytic_velocity(spec, grid.node(i), L);
            for (int a = 0; a < grid.dim(); ++a)
                u[a][i] = v[a];
        }
    };

    switch (spec.index()) {
        case 0: {
            const auto& s = std::get<flows::Shear>(spec);
            detail::require(!s.sin_coef.empty() || !s.cos_coef.empty(), "build_flow: shear profile is empty");
            sample_analytic();
            break;
        }
        case 1:
            sample_analytic();
            break;
        case 2: {
            const auto& c = std::get<flows::Checkerboard>(spec);
            detail::require(c.exponent >= 2.0, "build_flow: checkerboard exponent must be >= 2");
            const ScalarField H = ScalarField::sample(
                grid, [&](const std::array<double, 3>& x) { return stream_function(spec, x[0], x[1], L[0], L[1]); });
            u = detail::perp_gradient(H);
            break;
        }
        case 3: {
            const auto& g = std::get<flows::GapFlow>(spec);
            detail::require(g.delta > 0.0 && g.delta < 1.0, "build_flow: gap width must lie in (0,1)");
            detail::require(g.exponent >= 2.0, "build_flow: gap-flow exponent must be >= 2");
            const ScalarField H = ScalarField::sample(
                grid, [&](const std::array<double, 3>& x) { return stream_function(spec, x[0], x[1], L[0], L[1]); });
            u = detail::perp_gradient(H);
            break;
        }
        case 4:
        case 5: {
            const flows::Cellular3D c = spec.index() == 4 ? std::get<flows::Cellular3D>(spec)
                                                          : detail::honeycomb_as_cellular3d();
            detail::require(c.k > 0.0, "build_flow: k must be positive");
            const double defect = detail::phi_eigen_defect(c, grid);
            if (defect > 1e-8) {
                std::ostringstream os;
                os << "build_flow: lap Phi = -k Phi fails on the grid (relative defect " << defect << ", k = " << c.k
                   << ")";
                throw InputError(os.str());
            }
            detail::check_w_periodic(c, grid);
            sample_analytic();
            break;
        }
        case 6: {
            const auto& cs = std::get<flows::CustomStream>(spec);
            detail::require(cs.H.grid() == grid, "build_flow: stream-function samples must live on the target grid");
            detail::require_finite(cs.H, "build_flow");
            u = detail::perp_gradient(cs.H);
            break;
        }
        case 7: {
            const auto& cv = std::get<flows::CustomVelocity>(spec);
            detail::require(cv.u.grid() == grid, "build_flow: velocity samples must live on the target grid");
            u = cv.u;
            break;
        }
    }

    const double speed = std::max(u.max_norm(), 1e-300);
    for (int a = 0; a < grid.dim(); ++a) {
        detail::require_finite(u[a], "build_flow");
        const double m = mean(u[a]);
        if (std::abs(m) > kMeanRemovalLimit * speed) {
            std::ostringstream os;
            os << "build_flow: component " << a << " has mean " << m << " (|u| = " << speed
               << "); the flow must have mean zero";
            throw InputError(os.str());
        }
        // roundoff-level means are left alone so closed-form samples stay exact
        if (std::abs(m) > 1e-13 * speed)
            for (auto& v : u[a].values())
                v -= m;
    }

    FlowField flow(spec, std::move(u), std::move(id));
    if (!flow.validation().divergence_ok) {
        std::ostringstream os;
        os << "build_flow: " << flow.id() << " is not divergence-free on " << grid.describe() << " ("
           << flow.validation().summary() << ")";
        throw InputError(os.str());
    }
    return flow;
}

/// Build a variant on its natural period box at n points per axis.
inline FlowField build_flow(const FlowSpec& spec, int dim, int n, std::string id = {}) {
    const int native = flow_native_dim(spec);
    const int d = native != 0 ? native : dim;
    return build_flow(spec, TorusGrid(std::vector<int>(d, n), natural_periods(spec, d)), std::move(id));
}

}  // namespace kppflow
