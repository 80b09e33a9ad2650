#pragma once

// Direct simulation of T_t + A u.grad T = lap T + f(T) on a strip of cells,
// x1 in [0, P L1] with T = 1 on the left and T = 0 on the right, periodic in x2.
// Second-order finite differences; diffusion is implicit (FFT in x2, tridiagonal
// in x1), advection (first-order upwind) and reaction are explicit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <tuple>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kppflow/error.hpp"
#include "kppflow/flows.hpp"
#include "kppflow/torus.hpp"

namespace kppflow {

struct KppNonlinearity {
    std::function<double(double)> f;
    double f_prime0 = 1.0;
    double lipschitz = 1.0;  ///< sup |f'| on [0,1], bounds the explicit reaction step
    std::string name;

    double operator()(double s) const { return f(s); }

    /// f(s) = r s (1 - s).
    static KppNonlinearity fisher(double r = 1.0) {
        detail::require(r > 0.0 && std::isfinite(r), "KppNonlinearity::fisher: rate must be positive");
        return make([r](double s) { return r * s * (1.0 - s); }, r, "fisher");
    }

    /// Validated nonlinearity; the Lipschitz constant is estimated on a fine grid when not given.
    static KppNonlinearity make(std::function<double(double)> f, double f_prime0, std::string name = "custom",
                                double lipschitz = -1.0);
};

/// f(0) = f(1) = 0, f > 0 inside and f(s) <= f'(0) s on a sampled grid.
inline void validate_kpp(const KppNonlinearity& k, int samples = 1000) {
    detail::require(static_cast<bool>(k.f), "KppNonlinearity: f is empty");
    detail::require(k.f_prime0 > 0.0 && std::isfinite(k.f_prime0), "KppNonlinearity: f'(0) must be positive");
    detail::require(std::abs(k.f(0.0)) <= 1e-14 && std::abs(k.f(1.0)) <= 1e-14,
                    "KppNonlinearity: f must vanish at 0 and 1");
    for (int i = 1; i < samples; ++i) {
        const double s = static_cast<double>(i) / samples;
        const double v = k.f(s);
        if (!(v > 0.0))
            throw InputError("KppNonlinearity: f(" + std::to_string(s) + ") is not positive");
        if (v > k.f_prime0 * s * (1.0 + 1e-12))
            throw InputError("KppNonlinearity: f(" + std::to_string(s) + ") exceeds f'(0) s (not KPP)");
    }
}

inline KppNonlinearity KppNonlinearity::make(std::function<double(double)> f, double f_prime0, std::string name,
                                             double lipschitz) {
    KppNonlinearity k;
    k.f = std::move(f);
    k.f_prime0 = f_prime0;
    k.name = std::move(name);
    validate_kpp(k);
    if (lipschitz > 0.0) {
        k.lipschitz = lipschitz;
    } else {
        const int n = 4096;
        double L = k.f_prime0;
        for (int i = 0; i < n; ++i) {
            const double a = static_cast<double>(i) / n, b = static_cast<double>(i + 1) / n;
            L = std::max(L, std::abs(k.f(b) - k.f(a)) * n);
        }
        k.lipschitz = 1.05 * L;
    }
    return k;
}

/// Temperature on the strip: `columns` x1-nodes (boundary columns included) by n2
/// crosswise nodes, stored column by column. Column i sits at x1 = x0 + i h1.
struct StripField {
    int columns = 0;
    int n2 = 0;
    double h1 = 1.0;
    double x0 = 0.0;
    std::vector<double> T;

    double& at(int i, int j) { return T[static_cast<std::size_t>(i) * n2 + j]; }
    double at(int i, int j) const { return T[static_cast<std::size_t>(i) * n2 + j]; }

    double column_mean(int i) const {
        double s = 0.0;
        for (int j = 0; j < n2; ++j)
            s += at(i, j);
        return s / n2;
    }
};

/// Largest x1 where the crosswise mean crosses `level` from above, by linear
/// interpolation between columns. Absent when there is no crossing.
inline std::optional<double> front_position(const StripField& s, double level = 0.5) {
    detail::require(level > 0.0 && level < 1.0, "front_position: level must lie in (0,1)");
    double right = s.column_mean(s.columns - 1);
    for (int i = s.columns - 2; i >= 0; --i) {
        const double left = s.column_mean(i);
        if (left >= level && right < level)
            return s.x0 + s.h1 * (i + (left - level) / (left - right));
        right = left;
    }
    return std::nullopt;
}

struct EvolveOptions {
    double level = 0.5;
    double output_interval = 0.05;
    double initial_fraction = 0.05;  ///< the initial bump covers this share of the strip
    bool moving_window = true;
    double window_trigger = 0.5;     ///< shift once the front passes this share of the strip
    double window_target = 0.3;      ///< ... back to about this share
    double fit_fraction = 1.0 / 3.0; ///< speed is fitted over this final share of the run
    bool keep_final_state = false;
};

struct FrontTrajectory {
    std::vector<double> times;
    std::vector<double> positions;
    double speed = 0.0;         ///< slope of the tail fit
    double speed_stderr = 0.0;
    int fit_points = 0;
    double dt = 0.0;
    double stable_dt = 0.0;
    long steps = 0;
    int window_shifts = 0;
    double max_value = 1.0;
    double min_value = 0.0;
    double max_reset_jump = 0.0;  ///< largest |1 - T| overwritten by a window shift
    bool reached_boundary = false;
    bool monotone_after_burn_in = true;
    std::vector<std::string> flags;
    std::optional<StripField> final_state;

    bool valid() const { return !reached_boundary && fit_points >= 3; }
};

namespace detail {

/// Stepper for one strip run. Not thread-safe; runs are independent.
class StripStepper {
 public:
    StripStepper(const FlowField& flow, double A, const KppNonlinearity& f, int strip_periods, double dt,
                 double initial_fraction)
        : f_(f), A_(A), dt_(dt) {
        const TorusGrid& g = flow.grid();
        require(g.dim() == 2, "evolve: the strip oracle supports 2D flows only");
        require(strip_periods >= 4, "evolve: strip_periods must be at least 4");
        require(std::isfinite(A), "evolve: amplitude must be finite");
        require(initial_fraction > 0.0 && initial_fraction < 0.5, "evolve: initial_fraction must lie in (0, 0.5)");
        n1_ = g.n(0);
        n2_ = g.n(1);
        L1_ = g.period(0);
        h1_ = g.spacing(0);
        h2_ = g.spacing(1);
        const int M = strip_periods * n1_;
        s_.columns = M + 1;
        s_.n2 = n2_;
        s_.h1 = h1_;
        s_.x0 = 0.0;
        s_.T.assign(static_cast<std::size_t>(s_.columns) * n2_, 0.0);

        const auto& u = flow.u();
        u1_.assign(u[0].values().begin(), u[0].values().end());
        u2_.assign(u[1].values().begin(), u[1].values().end());
        double rate = 0.0;
        for (std::size_t i = 0; i < u1_.size(); ++i)
            rate = std::max(rate, std::abs(u1_[i]) / h1_ + std::abs(u2_[i]) / h2_);
        stable_dt_ = 1.0 / (f.lipschitz + std::abs(A) * rate);

        // compactly supported bump: 1, then a cosine ramp of width 2 w
        const double length = M * h1_;
        const double xc = initial_fraction * length, w = std::min(2.0 * h1_, 0.5 * xc);
        for (int i = 0; i < s_.columns; ++i) {
            const double x = i * h1_;
            double v = 0.0;
            if (x <= xc - w)
                v = 1.0;
            else if (x < xc + w)
                v = 0.5 * (1.0 + std::cos(std::numbers::pi * (x - xc + w) / (2.0 * w)));
            for (int j = 0; j < n2_; ++j)
                s_.at(i, j) = v;
        }
        apply_boundary();

        nc_ = n2_ / 2 + 1;
        plans_ = FftPlans::instance().get_batch(n2_, s_.columns);
        spec_.resize(static_cast<std::size_t>(s_.columns) * nc_);
        star_.resize(s_.T.size());
        const double r = 1.0 / (h1_ * h1_);
        diag_.resize(nc_);
        for (int m = 0; m < nc_; ++m) {
            const double lam = (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * m / n2_)) / (h2_ * h2_);
            diag_[m] = 1.0 + dt_ * (2.0 * r + lam);
        }
        off_ = -dt_ * r;
        cprime_.resize(static_cast<std::size_t>(s_.columns) * nc_);
        denom_.resize(cprime_.size());
        for (int m = 0; m < nc_; ++m) {
            // Thomas factors for interior rows 1..M-1
            double c = 0.0;
            for (int i = 1; i < s_.columns - 1; ++i) {
                const double den = diag_[m] - off_ * c;
                denom_[idx(i, m)] = den;
                c = off_ / den;
                cprime_[idx(i, m)] = c;
            }
        }
    }

    double stable_dt() const { return stable_dt_; }
    double time() const { return t_; }
    const StripField& state() const { return s_; }
    double length() const { return (s_.columns - 1) * h1_; }
    double period_length() const { return L1_; }

    void step() {
        const int C = s_.columns;
        std::copy(s_.T.begin(), s_.T.end(), star_.begin());
        for (int i = 1; i < C - 1; ++i) {
            const int r = i % n1_;
            for (int j = 0; j < n2_; ++j) {
                const std::size_t k = static_cast<std::size_t>(r) * n2_ + j;
                const double Tc = s_.at(i, j);
                double adv = 0.0;
                if (A_ != 0.0) {
                    const double a1 = A_ * u1_[k], a2 = A_ * u2_[k];
                    const int jm = j == 0 ? n2_ - 1 : j - 1, jp = j == n2_ - 1 ? 0 : j + 1;
                    adv += a1 > 0.0 ? a1 * (Tc - s_.at(i - 1, j)) / h1_ : a1 * (s_.at(i + 1, j) - Tc) / h1_;
                    adv += a2 > 0.0 ? a2 * (Tc - s_.at(i, jm)) / h2_ : a2 * (s_.at(i, jp) - Tc) / h2_;
                }
                star_[static_cast<std::size_t>(i) * n2_ + j] = Tc + dt_ * (f_(Tc) - adv);
            }
        }
        fftw_execute_dft_r2c(plans_.r2c, star_.data(), reinterpret_cast<fftw_complex*>(spec_.data()));
        // boundary columns enter the first and last interior rows
        for (int m = 0; m < nc_; ++m) {
            spec_[idx(1, m)] -= off_ * spec_[idx(0, m)];
            spec_[idx(C - 2, m)] -= off_ * spec_[idx(C - 1, m)];
            cplx prev{0.0, 0.0};
            for (int i = 1; i < C - 1; ++i) {
                prev = (spec_[idx(i, m)] - off_ * prev) / denom_[idx(i, m)];
                spec_[idx(i, m)] = prev;
            }
            for (int i = C - 3; i >= 1; --i)
                spec_[idx(i, m)] -= cprime_[idx(i, m)] * spec_[idx(i + 1, m)];
        }
        fftw_execute_dft_c2r(plans_.c2r, reinterpret_cast<fftw_complex*>(spec_.data()), s_.T.data());
        const double inv = 1.0 / n2_;
        for (auto& v : s_.T)
            v *= inv;
        apply_boundary();
        t_ += dt_;
    }

    /// Drop `periods` cells on the left, append fresh T = 0 cells on the right and
    /// reset the new left boundary to T = 1. Returns the largest |1 - T| overwritten.
    double shift(int periods) {
        const int drop = periods * n1_;
        const std::size_t off = static_cast<std::size_t>(drop) * n2_;
        std::move(s_.T.begin() + static_cast<std::ptrdiff_t>(off), s_.T.end(), s_.T.begin());
        std::fill(s_.T.end() - static_cast<std::ptrdiff_t>(off), s_.T.end(), 0.0);
        s_.x0 += periods * L1_;
        double jump = 0.0;
        for (int j = 0; j < n2_; ++j)
            jump = std::max(jump, std::abs(1.0 - s_.at(0, j)));
        apply_boundary();
        return jump;
    }

    std::pair<double, double> extrema() const {
        const auto [lo, hi] = std::minmax_element(s_.T.begin(), s_.T.end());
        return {*lo, *hi};
    }

 private:
    std::size_t idx(int i, int m) const { return static_cast<std::size_t>(i) * nc_ + m; }

    void apply_boundary() {
        for (int j = 0; j < n2_; ++j) {
            s_.at(0, j) = 1.0;
            s_.at(s_.columns - 1, j) = 0.0;
        }
    }

    const KppNonlinearity& f_;
    double A_, dt_, stable_dt_ = 0.0, t_ = 0.0;
    int n1_ = 0, n2_ = 0, nc_ = 0;
    double L1_ = 1.0, h1_ = 1.0, h2_ = 1.0;
    StripField s_;
    std::vector<double> u1_, u2_, star_;
    std::vector<cplx> spec_;
    std::vector<double> diag_, cprime_, denom_;
    double off_ = 0.0;
    FftPlans::Pair plans_;
};

inline double checked_dt(double dt, double stable) {
    if (dt <= 0.0)
        return std::min(0.9 * stable, 0.01);
    if (dt > stable * (1.0 + 1e-12))
        throw InputError("evolve: dt = " + std::to_string(dt) + " exceeds the explicit stability bound " +
                         std::to_string(stable));
    return dt;
}

/// Slope and standard error of an ordinary least-squares line.
inline std::pair<double, double> line_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double b = sxy / sxx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - my - b * (x[i] - mx);
        ss += r * r;
    }
    const double se = n > 2 ? std::sqrt(ss / static_cast<double>(n - 2) / sxx) : INFINITY;
    return {b, se};
}

}  // namespace detail

/// Explicit stability bound dt <= 1 / (Lip f + |A| max(|u1|/h1 + |u2|/h2)).
inline double oracle_stable_dt(const FlowField& flow, double A, const KppNonlinearity& f) {
    return detail::StripStepper(flow, A, f, 4, 1e-3, 0.05).stable_dt();
}

/// Spread from a bump on the left of a strip of `strip_periods` cells until t_end.
/// dt <= 0 picks min(0.9 * bound, 0.01).
inline FrontTrajectory evolve(const FlowField& flow, double A, const KppNonlinearity& f, int strip_periods,
                              double t_end, double dt = 0.0, const EvolveOptions& opt = {}) {
    detail::require(t_end > 0.0 && std::isfinite(t_end), "evolve: t_end must be positive");
    detail::require(opt.output_interval > 0.0, "evolve: output_interval must be positive");
    detail::require(opt.window_target < opt.window_trigger && opt.window_trigger < 1.0,
                    "evolve: window_target < window_trigger < 1 is required");
    validate_kpp(f);
    const double stable = oracle_stable_dt(flow, A, f);
    dt = detail::checked_dt(dt, stable);
    detail::StripStepper st(flow, A, f, strip_periods, dt, opt.initial_fraction);

    FrontTrajectory tr;
    tr.dt = dt;
    tr.stable_dt = stable;
    const long nsteps = std::lround(std::ceil(t_end / dt - 1e-9));
    const long every = std::max(1L, std::lround(opt.output_interval / dt));
    bool missing = false;
    double lo = 0.0, hi = 1.0;
    for (long n = 1; n <= nsteps; ++n) {
        st.step();
        ++tr.steps;
        const auto [a, b] = st.extrema();
        lo = std::min(lo, a);
        hi = std::max(hi, b);
        if (n % every != 0 && n != nsteps)
            continue;
        const auto pos = front_position(st.state(), opt.level);
        if (!pos) {
            missing = true;
            continue;
        }
        tr.times.push_back(st.time());
        tr.positions.push_back(*pos);
        const double rel = *pos - st.state().x0;
        // leading edge: the crosswise mean one cell before the right end
        const int probe = st.state().columns - 1 - static_cast<int>(std::lround(st.period_length() / st.state().h1));
        if (st.state().column_mean(probe) > 1e-3)
            tr.reached_boundary = true;
        if (opt.moving_window && rel > opt.window_trigger * st.length()) {
            const int s = static_cast<int>(std::floor((rel - opt.window_target * st.length()) / st.period_length()));
            if (s >= 1) {
                tr.max_reset_jump = std::max(tr.max_reset_jump, st.shift(s));
                ++tr.window_shifts;
            }
        }
    }
    tr.min_value = lo;
    tr.max_value = hi;

    std::vector<double> ft, fx;
    const double t_fit = (1.0 - opt.fit_fraction) * st.time();
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        if (tr.times[i] >= t_fit) {
            ft.push_back(tr.times[i]);
            fx.push_back(tr.positions[i]);
        }
    tr.fit_points = static_cast<int>(ft.size());
    if (ft.size() >= 3)
        std::tie(tr.speed, tr.speed_stderr) = detail::line_fit(ft, fx);
    else
        tr.flags.push_back("too few front positions for a speed fit");

    const double burn = st.time() / 3.0;
    for (std::size_t i = 1; i < tr.times.size(); ++i)
        if (tr.times[i - 1] >= burn && tr.positions[i] < tr.positions[i - 1] - 1e-9)
            tr.monotone_after_burn_in = false;

    if (tr.max_value > 1.0 + 1e-10 || tr.min_value < -1e-10)
        tr.flags.push_back("temperature left [0,1] by more than 1e-10");
    if (tr.reached_boundary)
        tr.flags.push_back("leading edge reached the right boundary; enlarge the strip");
    if (missing)
        tr.flags.push_back("front position absent at some output times");
    if (!tr.monotone_after_burn_in)
        tr.flags.push_back("front position decreased after burn-in");
    if (tr.max_reset_jump > 0.05)
        tr.flags.push_back("window reset overwrote T far from 1 (" + std::to_string(tr.max_reset_jump) + ")");
    if (opt.keep_final_state)
        tr.final_state = st.state();
    return tr;
}

struct ComparisonCheck {
    double min_gap = 0.0;  ///< min over output times and nodes of T_upper - T_lower
    int samples = 0;
    bool holds = false;
};

/// Two runs from ordered bumps (left fractions lower < upper, fixed window) must stay ordered.
inline ComparisonCheck comparison_check(const FlowField& flow, double A, const KppNonlinearity& f, int strip_periods,
                                        double t_end, double dt = 0.0, double lower_fraction = 0.03,
                                        double upper_fraction = 0.06, double output_interval = 0.1) {
    detail::require(lower_fraction < upper_fraction, "comparison_check: fractions must be ordered");
    validate_kpp(f);
    dt = detail::checked_dt(dt, oracle_stable_dt(flow, A, f));
    detail::StripStepper a(flow, A, f, strip_periods, dt, lower_fraction);
    detail::StripStepper b(flow, A, f, strip_periods, dt, upper_fraction);
    ComparisonCheck c;
    c.min_gap = INFINITY;
    auto sample = [&] {
        const auto& ta = a.state().T;
        const auto& tb = b.state().T;
        for (std::size_t i = 0; i < ta.size(); ++i)
            c.min_gap = std::min(c.min_gap, tb[i] - ta[i]);
        ++c.samples;
    };
    sample();
    const long nsteps = std::lround(std::ceil(t_end / dt - 1e-9));
    const long every = std::max(1L, std::lround(output_interval / dt));
    for (long n = 1; n <= nsteps; ++n) {
        a.step();
        b.step();
        if (n % every == 0 || n == nsteps)
            sample();
    }
    c.holds = c.min_gap >= -1e-8;
    return c;
}

struct DtHalvingCheck {
    double speed = 0.0;
    double speed_half = 0.0;
    double rel_change = 0.0;
};

/// Reference-run convergence check: the fitted speed at dt and dt/2.
inline DtHalvingCheck dt_halving_check(const FlowField& flow, double A, const KppNonlinearity& f, int strip_periods,
                                       double t_end, double dt, const EvolveOptions& opt = {}) {
    DtHalvingCheck c;
    c.speed = evolve(flow, A, f, strip_periods, t_end, dt, opt).speed;
    c.speed_half = evolve(flow, A, f, strip_periods, t_end, 0.5 * dt, opt).speed;
    c.rel_change = std::abs(c.speed_half - c.speed) / std::abs(c.speed_half);
    return c;
}

/// Trajectory CSV: header "t,position".
inline std::string trajectory_csv(const FrontTrajectory& tr) {
    std::ostringstream os;
    os.precision(10);
    os << "t,position\n";
    for (std::size_t i = 0; i < tr.times.size(); ++i)
        os << tr.times[i] << ',' << tr.positions[i] << '\n';
    return os.str();
}

}  // namespace kppflow
