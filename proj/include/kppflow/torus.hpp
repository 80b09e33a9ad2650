#pragma once

// Periodic grids on rectangular tori and the pseudo-spectral kernel shared by
// every solver: FFT transforms, spectral derivatives, 3/2-rule dealiased
// products, mean-zero Poisson inversion and cell averages.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "kppflow/error.hpp"

namespace kppflow {

using cplx = std::complex<double>;

/// Largest number of grid nodes a single field may hold (2^24, 128 MiB of doubles).
inline constexpr std::size_t kMaxGridPoints = std::size_t{1} << 24;

/// Uniform grid on the torus [0,L_0) x ... x [0,L_{d-1}), d in {2,3}.
/// Nodes are stored row-major with axis 0 slowest.
class TorusGrid {
 public:
    TorusGrid() = default;

    TorusGrid(std::vector<int> resolution, std::vector<double> periods) : TorusGrid(resolution, periods, true) {}

    /// Same periods, every resolution multiplied by num/den. The result may
    /// leave the power-of-two family (used for the 3/2 padding grid).
    TorusGrid rescaled(int num, int den) const {
        std::vector<int> r = resolution();
        for (auto& v : r)
            v = v * num / den;
        return {r, periods(), false};
    }

 private:
    TorusGrid(std::vector<int> resolution, std::vector<double> periods, bool power_of_two) {
        detail::require(resolution.size() == 2 || resolution.size() == 3,
                        "TorusGrid: dimension must be 2 or 3");
        detail::require(periods.size() == resolution.size(),
                        "TorusGrid: one period per axis is required");
        dim_ = static_cast<int>(resolution.size());
        std::size_t total = 1;
        for (int a = 0; a < dim_; ++a) {
            const int n = resolution[a];
            detail::require(n >= 8, "TorusGrid: resolution must be >= 8 per axis");
            detail::require(!power_of_two || (n & (n - 1)) == 0, "TorusGrid: resolution must be a power of two");
            detail::require(std::isfinite(periods[a]) && periods[a] > 0.0,
                            "TorusGrid: periods must be finite and positive");
            n_[a] = n;
            L_[a] = periods[a];
            total *= static_cast<std::size_t>(n);
            detail::require(total <= 4 * kMaxGridPoints, "TorusGrid: point count exceeds the memory cap");
        }
        detail::require(!power_of_two || total <= kMaxGridPoints, "TorusGrid: point count exceeds the memory cap");
    }

 public:

    /// n^dim grid on the unit torus.
    static TorusGrid unit(int dim, int n) {
        return TorusGrid(std::vector<int>(dim, n), std::vector<double>(dim, 1.0));
    }

    /// n^dim grid on the cube of side L.
    static TorusGrid cube(int dim, int n, double L) {
        return TorusGrid(std::vector<int>(dim, n), std::vector<double>(dim, L));
    }

    int dim() const { return dim_; }
    int n(int axis) const { return n_[axis]; }
    double period(int axis) const { return L_[axis]; }
    double spacing(int axis) const { return L_[axis] / n_[axis]; }
    double coord(int axis, int i) const { return L_[axis] * i / n_[axis]; }

    std::vector<int> resolution() const { return {n_.begin(), n_.begin() + dim_}; }
    std::vector<double> periods() const { return {L_.begin(), L_.begin() + dim_}; }

    std::size_t size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a)
            s *= static_cast<std::size_t>(n_[a]);
        return s;
    }

    /// Extent of the half-complex spectrum along an axis (last axis is halved).
    int spectral_extent(int axis) const { return axis == dim_ - 1 ? n_[axis] / 2 + 1 : n_[axis]; }

    std::size_t spectral_size() const {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a)
            s *= static_cast<std::size_t>(spectral_extent(a));
        return s;
    }

    double measure() const {
        double m = 1.0;
        for (int a = 0; a < dim_; ++a)
            m *= L_[a];
        return m;
    }

    /// Coordinates of a flat node index.
    std::array<double, 3> node(std::size_t flat) const {
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = dim_ - 1; a >= 0; --a) {
            const auto na = static_cast<std::size_t>(n_[a]);
            x[a] = coord(a, static_cast<int>(flat % na));
            flat /= na;
        }
        return x;
    }

    std::string describe() const {
        std::ostringstream os;
        for (int a = 0; a < dim_; ++a)
            os << (a ? "x" : "") << n_[a];
        os << " on [";
        for (int a = 0; a < dim_; ++a)
            os << (a ? "," : "") << L_[a];
        os << "]";
        return os.str();
    }

    bool operator==(const TorusGrid& o) const {
        if (dim_ != o.dim_)
            return false;
        for (int a = 0; a < dim_; ++a)
            if (n_[a] != o.n_[a] || L_[a] != o.L_[a])
                return false;
        return true;
    }

 private:
    int dim_ = 0;
    std::array<int, 3> n_{1, 1, 1};
    std::array<double, 3> L_{1.0, 1.0, 1.0};
};

/// Real samples of a periodic function at the nodes of a TorusGrid.
class ScalarField {
 public:
    ScalarField() = default;
    explicit ScalarField(TorusGrid grid, double value = 0.0)
        : grid_(std::move(grid)), v_(grid_.size(), value) {}
    ScalarField(TorusGrid grid, std::vector<double> values) : grid_(std::move(grid)), v_(std::move(values)) {
        detail::require(v_.size() == grid_.size(), "ScalarField: value count does not match the grid");
    }

    template <class F>
    static ScalarField sample(const TorusGrid& grid, F&& f) {
        ScalarField s(grid);
        for (std::size_t i = 0; i < s.size(); ++i)
            s.v_[i] = f(grid.node(i));
        return s;
    }

    const TorusGrid& grid() const { return grid_; }
    std::size_t size() const { return v_.size(); }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    std::span<double> values() { return v_; }
    std::span<const double> values() const { return v_; }
    std::vector<double>& storage() { return v_; }
    const std::vector<double>& storage() const { return v_; }

    bool all_finite() const {
        return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
    }

    ScalarField& operator+=(const ScalarField& o) {
        for (std::size_t i = 0; i < v_.size(); ++i)
            v_[i] += o.v_[i];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        for (std::size_t i = 0; i < v_.size(); ++i)
            v_[i] -= o.v_[i];
        return *this;
    }
    ScalarField& operator*=(double s) {
        for (auto& x : v_)
            x *= s;
        return *this;
    }

 private:
    TorusGrid grid_;
    std::vector<double> v_;
};

/// dim() components sharing one grid.
class VectorField {
 public:
    VectorField() = default;
    explicit VectorField(const TorusGrid& grid) : grid_(grid), c_(grid.dim(), ScalarField(grid)) {}
    VectorField(const TorusGrid& grid, std::vector<ScalarField> comps) : grid_(grid), c_(std::move(comps)) {
        detail::require(static_cast<int>(c_.size()) == grid_.dim(),
                        "VectorField: component count must equal the grid dimension");
        for (const auto& c : c_)
            detail::require(c.grid() == grid_, "VectorField: all components must share one grid");
    }

    const TorusGrid& grid() const { return grid_; }
    int dim() const { return grid_.dim(); }
    ScalarField& operator[](int a) { return c_[a]; }
    const ScalarField& operator[](int a) const { return c_[a]; }

    /// Pointwise e . v.
    ScalarField dot(std::span<const double> e) const {
        ScalarField r(grid_);
        for (int a = 0; a < dim(); ++a)
            for (std::size_t i = 0; i < r.size(); ++i)
                r[i] += e[a] * c_[a][i];
        return r;
    }

    double max_norm() const {
        double m = 0.0;
        for (std::size_t i = 0; i < grid_.size(); ++i) {
            double s = 0.0;
            for (int a = 0; a < dim(); ++a)
                s += c_[a][i] * c_[a][i];
            m = std::max(m, s);
        }
        return std::sqrt(m);
    }

    /// sqrt of the cell average of |v|^2.
    double rms() const {
        double s = 0.0;
        for (int a = 0; a < dim(); ++a)
            for (double x : c_[a].values())
                s += x * x;
        return std::sqrt(s / static_cast<double>(grid_.size()));
    }

 private:
    TorusGrid grid_;
    std::vector<ScalarField> c_;
};

namespace detail {

/// Process-wide FFTW plan cache. Plans are created under a lock (FFTW's planner
/// is not thread-safe); execution through the new-array interface is.
class FftPlans {
 public:
    struct Pair {
        fftw_plan r2c = nullptr;
        fftw_plan c2r = nullptr;
    };

    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    Pair get(const TorusGrid& g) {
        const std::array<int, 4> key{g.dim(), g.n(0), g.n(1), g.dim() == 3 ? g.n(2) : 1};
        std::lock_guard lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end())
            return it->second;
        std::vector<int> dims = g.resolution();
        auto* real = static_cast<double*>(fftw_malloc(sizeof(double) * g.size()));
        auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * g.spectral_size()));
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        Pair p;
        p.r2c = fftw_plan_dft_r2c(g.dim(), dims.data(), real, spec, flags);
        p.c2r = fftw_plan_dft_c2r(g.dim(), dims.data(), spec, real, flags);
        fftw_free(real);
        fftw_free(spec);
        if (!p.r2c || !p.c2r)
            throw NumericalError("FFTW planning failed for grid " + g.describe());
        plans_.emplace(key, p);
        return p;
    }

    /// `howmany` contiguous 1D transforms of length n (real stride n, complex stride n/2+1).
    Pair get_batch(int n, int howmany) {
        const std::array<int, 4> key{1, n, howmany, 0};
        std::lock_guard lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end())
            return it->second;
        const int nc = n / 2 + 1;
        auto* real = static_cast<double*>(fftw_malloc(sizeof(double) * n * howmany));
        auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc * howmany));
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        Pair p;
        p.r2c = fftw_plan_many_dft_r2c(1, &n, howmany, real, nullptr, 1, n, spec, nullptr, 1, nc, flags);
        p.c2r = fftw_plan_many_dft_c2r(1, &n, howmany, spec, nullptr, 1, nc, real, nullptr, 1, n, flags);
        fftw_free(real);
        fftw_free(spec);
        if (!p.r2c || !p.c2r)
            throw NumericalError("FFTW planning failed for a batch of " + std::to_string(howmany) +
                                 " transforms of length " + std::to_string(n));
        plans_.emplace(key, p);
        return p;
    }

    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;

 private:
    FftPlans() = default;
    ~FftPlans() {
        for (auto& [k, p] : plans_) {
            fftw_destroy_plan(p.r2c);
            fftw_destroy_plan(p.c2r);
        }
    }
    std::mutex mutex_;
    std::map<std::array<int, 4>, Pair> plans_;
};

inline int signed_frequency(int index, int n) { return index <= n / 2 ? index : index - n; }

}  // namespace detail

/// Wavenumber tables and transforms for one grid. Spectra hold normalized
/// Fourier coefficients (the zero mode is the cell average).
class Spectral {
 public:
    explicit Spectral(const TorusGrid& grid) : grid_(grid), plans_(detail::FftPlans::instance().get(grid)) {
        const std::size_t ns = grid.spectral_size();
        for (int a = 0; a < grid.dim(); ++a)
            kodd_[a].assign(ns, 0.0);
        k2_.assign(ns, 0.0);
        nyquist_.assign(ns, 0);
        const int d = grid.dim();
        std::array<int, 3> ext{1, 1, 1};
        for (int a = 0; a < d; ++a)
            ext[a] = grid.spectral_extent(a);
        std::size_t flat = 0;
        for (int i0 = 0; i0 < ext[0]; ++i0)
            for (int i1 = 0; i1 < ext[1]; ++i1)
                for (int i2 = 0; i2 < ext[2]; ++i2, ++flat) {
                    const std::array<int, 3> idx{i0, i1, i2};
                    double k2 = 0.0;
                    bool nyq = false;
                    for (int a = 0; a < d; ++a) {
                        const int n = grid.n(a);
                        const int f = detail::signed_frequency(idx[a], n);
                        const double k = 2.0 * std::numbers::pi * f / grid.period(a);
                        k2 += k * k;
                        const bool at_nyq = (std::abs(f) == n / 2);
                        nyq = nyq || at_nyq;
                        kodd_[a][flat] = at_nyq ? 0.0 : k;
                    }
                    k2_[flat] = k2;
                    nyquist_[flat] = nyq ? 1 : 0;
                }
    }

    const TorusGrid& grid() const { return grid_; }
    std::size_t spectral_size() const { return k2_.size(); }

    /// Wavenumber for first derivatives (Nyquist modes zeroed).
    double k(int axis, std::size_t s) const { return kodd_[axis][s]; }
    double k2(std::size_t s) const { return k2_[s]; }
    bool is_nyquist(std::size_t s) const { return nyquist_[s] != 0; }

    void forward(std::span<const double> in, std::span<cplx> out) const {
        fftw_execute_dft_r2c(plans_.r2c, const_cast<double*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
        const double inv = 1.0 / static_cast<double>(grid_.size());
        for (auto& c : out)
            c *= inv;
    }

    /// c2r overwrites its input, so the spectrum is copied into `scratch` first.
    void inverse(std::span<const cplx> in, std::span<double> out, std::vector<cplx>& scratch) const {
        scratch.assign(in.begin(), in.end());
        fftw_execute_dft_c2r(plans_.c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
    }

    std::vector<cplx> forward(const ScalarField& f) const {
        std::vector<cplx> s(spectral_size());
        forward(f.values(), s);
        return s;
    }

    ScalarField inverse(std::span<const cplx> s) const {
        ScalarField f(grid_);
        std::vector<cplx> scratch;
        inverse(s, f.values(), scratch);
        return f;
    }

 private:
    TorusGrid grid_;
    detail::FftPlans::Pair plans_;
    std::array<std::vector<double>, 3> kodd_;
    std::vector<double> k2_;
    std::vector<unsigned char> nyquist_;
};

/// 3/2-rule zero padding between a grid and its 3n/2 refinement.
class Dealiaser {
 public:
    explicit Dealiaser(const TorusGrid& coarse)
        : coarse_(coarse), fine_(coarse.rescaled(3, 2)) {
        const int d = coarse.dim();
        std::array<int, 3> ext{1, 1, 1};
        for (int a = 0; a < d; ++a)
            ext[a] = coarse.spectral_extent(a);
        map_.assign(coarse.spectral_size(), kDropped);
        std::size_t flat = 0;
        for (int i0 = 0; i0 < ext[0]; ++i0)
            for (int i1 = 0; i1 < ext[1]; ++i1)
                for (int i2 = 0; i2 < ext[2]; ++i2, ++flat) {
                    const std::array<int, 3> idx{i0, i1, i2};
                    std::size_t target = 0;
                    bool keep = true;
                    for (int a = 0; a < d; ++a) {
                        const int n = coarse.n(a);
                        const int m = fine_.n(a);
                        const int f = detail::signed_frequency(idx[a], n);
                        if (std::abs(f) == n / 2)
                            keep = false;
                        const int j = f >= 0 ? f : m + f;
                        target = target * static_cast<std::size_t>(fine_.spectral_extent(a)) +
                                 static_cast<std::size_t>(j);
                    }
                    if (keep)
                        map_[flat] = target;
                }
    }

    const TorusGrid& coarse() const { return coarse_; }
    const TorusGrid& fine() const { return fine_; }

    void pad(std::span<const cplx> coarse, std::span<cplx> fine) const {
        std::fill(fine.begin(), fine.end(), cplx{0.0, 0.0});
        for (std::size_t s = 0; s < map_.size(); ++s)
            if (map_[s] != kDropped)
                fine[map_[s]] = coarse[s];
    }

    void truncate(std::span<const cplx> fine, std::span<cplx> coarse) const {
        for (std::size_t s = 0; s < map_.size(); ++s)
            coarse[s] = map_[s] != kDropped ? fine[map_[s]] : cplx{0.0, 0.0};
    }

 private:
    static constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
    TorusGrid coarse_;
    TorusGrid fine_;
    std::vector<std::size_t> map_;
};

namespace detail {

inline void require_finite(const ScalarField& f, const char* what) {
    if (!f.all_finite())
        throw InputError(std::string(what) + ": field contains non-finite values");
}

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what) {
    if (!(a == b))
        throw InputError(std::string(what) + ": fields live on different grids (" + a.describe() + " vs " +
                         b.describe() + ")");
}

}  // namespace detail

/// Spectral gradient; exact for resolved trigonometric polynomials.
inline VectorField gradient(const ScalarField& f) {
    detail::require_finite(f, "gradient");
    const Spectral sp(f.grid());
    const auto fh = sp.forward(f);
    VectorField g(f.grid());
    std::vector<cplx> d(fh.size());
    std::vector<cplx> scratch;
    for (int a = 0; a < f.grid().dim(); ++a) {
        for (std::size_t s = 0; s < fh.size(); ++s)
            d[s] = cplx{0.0, sp.k(a, s)} * fh[s];
        sp.inverse(d, g[a].values(), scratch);
    }
    return g;
}

inline ScalarField divergence(const VectorField& v) {
    for (int a = 0; a < v.dim(); ++a) {
        detail::require_same_grid(v[a].grid(), v.grid(), "divergence");
        detail::require_finite(v[a], "divergence");
    }
    const Spectral sp(v.grid());
    std::vector<cplx> acc(sp.spectral_size(), cplx{0.0, 0.0});
    for (int a = 0; a < v.dim(); ++a) {
        const auto vh = sp.forward(v[a]);
        for (std::size_t s = 0; s < vh.size(); ++s)
            acc[s] += cplx{0.0, sp.k(a, s)} * vh[s];
    }
    return sp.inverse(acc);
}

inline ScalarField laplacian(const ScalarField& f) {
    detail::require_finite(f, "laplacian");
    const Spectral sp(f.grid());
    auto fh = sp.forward(f);
    for (std::size_t s = 0; s < fh.size(); ++s)
        fh[s] *= -sp.k2(s);
    return sp.inverse(fh);
}

/// Dealiased pointwise product a*b.
inline ScalarField product(const ScalarField& a, const ScalarField& b) {
    detail::require_same_grid(a.grid(), b.grid(), "product");
    const Spectral sp(a.grid());
    const Dealiaser dl(a.grid());
    const Spectral fine(dl.fine());
    std::vector<cplx> pa(fine.spectral_size()), pb(fine.spectral_size()), scratch;
    std::vector<double> xa(dl.fine().size()), xb(dl.fine().size());
    dl.pad(sp.forward(a), pa);
    dl.pad(sp.forward(b), pb);
    fine.inverse(pa, xa, scratch);
    fine.inverse(pb, xb, scratch);
    for (std::size_t i = 0; i < xa.size(); ++i)
        xa[i] *= xb[i];
    fine.forward(xa, pa);
    std::vector<cplx> out(sp.spectral_size());
    dl.truncate(pa, out);
    return sp.inverse(out);
}

/// u . grad f with the 3/2-rule dealiased product.
inline ScalarField advect(const VectorField& u, const ScalarField& f) {
    detail::require_same_grid(u.grid(), f.grid(), "advect");
    detail::require_finite(f, "advect");
    const TorusGrid& g = f.grid();
    const Spectral sp(g);
    const Dealiaser dl(g);
    const Spectral fine(dl.fine());
    const auto fh = sp.forward(f);
    std::vector<cplx> tmp(sp.spectral_size()), pad(fine.spectral_size()), scratch;
    std::vector<double> ua(dl.fine().size()), da(dl.fine().size()), acc(dl.fine().size(), 0.0);
    for (int a = 0; a < g.dim(); ++a) {
        dl.pad(sp.forward(u[a]), pad);
        fine.inverse(pad, ua, scratch);
        for (std::size_t s = 0; s < fh.size(); ++s)
            tmp[s] = cplx{0.0, sp.k(a, s)} * fh[s];
        dl.pad(tmp, pad);
        fine.inverse(pad, da, scratch);
        for (std::size_t i = 0; i < acc.size(); ++i)
            acc[i] += ua[i] * da[i];
    }
    fine.forward(acc, pad);
    dl.truncate(pad, tmp);
    return sp.inverse(tmp);
}

/// Reusable dealiased variable-coefficient operator f -> a u.grad f + b c f,
/// with u and c held on the 3/2 grid. Each instance owns scratch buffers and
/// must not be shared between threads.
class DealiasedOperator {
 public:
    DealiasedOperator(const VectorField& u, const ScalarField* potential = nullptr)
        : grid_(u.grid()), sp_(grid_), dl_(grid_), fine_(dl_.fine()) {
        const std::size_t nf = dl_.fine().size();
        std::vector<cplx> pad(fine_.spectral_size());
        for (int a = 0; a < grid_.dim(); ++a) {
            detail::require_same_grid(u[a].grid(), grid_, "DealiasedOperator");
            vel_[a].resize(nf);
            dl_.pad(sp_.forward(u[a]), pad);
            fine_.inverse(pad, vel_[a], scratch_);
        }
        if (potential) {
            detail::require_same_grid(potential->grid(), grid_, "DealiasedOperator");
            pot_.resize(nf);
            dl_.pad(sp_.forward(*potential), pad);
            fine_.inverse(pad, pot_, scratch_);
        }
        pad_.resize(fine_.spectral_size());
        tmp_.resize(sp_.spectral_size());
        da_.resize(nf);
        acc_.resize(nf);
    }

    const Spectral& spectral() const { return sp_; }
    const TorusGrid& grid() const { return grid_; }

    /// out = spectrum of (a u.grad f + b c f) given the spectrum fh of f.
    void apply(std::span<const cplx> fh, std::span<cplx> out, double a, double b = 0.0) {
        std::fill(acc_.begin(), acc_.end(), 0.0);
        if (a != 0.0) {
            for (int ax = 0; ax < grid_.dim(); ++ax) {
                for (std::size_t s = 0; s < fh.size(); ++s)
                    tmp_[s] = cplx{0.0, sp_.k(ax, s)} * fh[s];
                dl_.pad(tmp_, pad_);
                fine_.inverse(pad_, da_, scratch_);
                const auto& v = vel_[ax];
                for (std::size_t i = 0; i < acc_.size(); ++i)
                    acc_[i] += a * v[i] * da_[i];
            }
        }
        if (b != 0.0 && !pot_.empty()) {
            dl_.pad(fh, pad_);
            fine_.inverse(pad_, da_, scratch_);
            for (std::size_t i = 0; i < acc_.size(); ++i)
                acc_[i] += b * pot_[i] * da_[i];
        }
        fine_.forward(acc_, pad_);
        dl_.truncate(pad_, out);
    }

 private:
    TorusGrid grid_;
    Spectral sp_;
    Dealiaser dl_;
    Spectral fine_;
    std::array<std::vector<double>, 3> vel_;
    std::vector<double> pot_;
    std::vector<cplx> pad_, tmp_, scratch_;
    std::vector<double> da_, acc_;
};

enum class ReduceKind { Mean, L2SqMean, Max, Min };

/// Cell averages and extrema over the nodes.
inline double reduce(const ScalarField& f, ReduceKind kind) {
    detail::require_finite(f, "reduce");
    const auto v = f.values();
    switch (kind) {
        case ReduceKind::Mean:
            return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        case ReduceKind::L2SqMean:
            return std::inner_product(v.begin(), v.end(), v.begin(), 0.0) / static_cast<double>(v.size());
        case ReduceKind::Max:
            return *std::max_element(v.begin(), v.end());
        case ReduceKind::Min:
            return *std::min_element(v.begin(), v.end());
    }
    return 0.0;
}

inline double mean(const ScalarField& f) { return reduce(f, ReduceKind::Mean); }

/// Mean-zero f with -lap f = g. Rejects g whose mean exceeds 1e-10 of its rms.
inline ScalarField solve_poisson(const ScalarField& g, double mean_tol = 1e-10) {
    detail::require_finite(g, "solve_poisson");
    const double m = reduce(g, ReduceKind::Mean);
    const double scale = std::sqrt(reduce(g, ReduceKind::L2SqMean));
    if (std::abs(m) > mean_tol * scale) {
        std::ostringstream os;
        os << "solve_poisson: right-hand side has nonzero mean " << m << " (rms " << scale << ")";
        throw InputError(os.str());
    }
    const Spectral sp(g.grid());
    auto gh = sp.forward(g);
    for (std::size_t s = 0; s < gh.size(); ++s)
        gh[s] = sp.k2(s) > 0.0 ? gh[s] / sp.k2(s) : cplx{0.0, 0.0};
    return sp.inverse(gh);
}

/// Subsample a field onto a grid whose resolution divides this one's.
inline ScalarField restrict_to(const ScalarField& f, const TorusGrid& coarse) {
    const TorusGrid& g = f.grid();
    detail::require(coarse.dim() == g.dim(), "restrict_to: dimension mismatch");
    std::array<int, 3> stride{1, 1, 1}, nc{1, 1, 1}, nf{1, 1, 1};
    for (int a = 0; a < g.dim(); ++a) {
        detail::require(coarse.period(a) == g.period(a) && g.n(a) % coarse.n(a) == 0,
                        "restrict_to: incompatible grids");
        stride[a] = g.n(a) / coarse.n(a);
        nc[a] = coarse.n(a);
        nf[a] = g.n(a);
    }
    ScalarField r(coarse);
    std::size_t flat = 0;
    for (int i0 = 0; i0 < nc[0]; ++i0)
        for (int i1 = 0; i1 < nc[1]; ++i1)
            for (int i2 = 0; i2 < nc[2]; ++i2, ++flat) {
                const std::size_t src =
                    (static_cast<std::size_t>(i0 * stride[0]) * nf[1] + static_cast<std::size_t>(i1 * stride[1])) *
                        nf[2] +
                    static_cast<std::size_t>(i2 * stride[2]);
                r[flat] = f[src];
            }
    return r;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void remove_mean(std::span<double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (auto& x : v)
        x -= m;
}

}  // namespace detail
}  // namespace kppflow
