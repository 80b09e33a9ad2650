#pragma once

// Matrix-free Krylov solvers over std::vector<T>, T real or complex.

#include <cmath>
#include <complex>
#include <vector>

namespace kppflow {

struct KrylovReport {
    int iterations = 0;
    double residual = 0.0;  ///< final ||b - A x|| / ||b||
    bool converged = false;
    bool stagnated = false;  ///< stopped after restart cycles without progress (roundoff floor)
};

namespace detail {

inline double conj_(double x) { return x; }
inline std::complex<double> conj_(std::complex<double> x) { return std::conj(x); }

template <class T>
T inner(const std::vector<T>& a, const std::vector<T>& b) {
    T s{};
    for (std::size_t i = 0; i < a.size(); ++i)
        s += conj_(a[i]) * b[i];
    return s;
}

template <class T>
double norm(const std::vector<T>& a) {
    double s = 0.0;
    for (const auto& x : a)
        s += std::norm(x);
    return std::sqrt(s);
}

}  // namespace detail

/// Right-preconditioned restarted GMRES: solves A x = b with x = M y.
/// `apply(in, out)` and `precond(in, out)` write into preallocated vectors.
/// `x` holds the initial guess on entry.
template <class T, class Apply, class Precond>
KrylovReport gmres(Apply&& apply, Precond&& precond, const std::vector<T>& b, std::vector<T>& x, double tol,
                   int restart = 50, int max_iterations = 10000) {
    const std::size_t n = b.size();
    KrylovReport rep;
    const double bnorm = detail::norm(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), T{});
        rep.converged = true;
        return rep;
    }
    const int m = restart;
    std::vector<std::vector<T>> V(m + 1, std::vector<T>(n));
    std::vector<std::vector<T>> H(m + 1, std::vector<T>(m, T{}));
    std::vector<T> cs(m), sn(m), g(m + 1), w(n), z(n), r(n);

    auto residual = [&] {
        apply(x, w);
        for (std::size_t i = 0; i < n; ++i)
            r[i] = b[i] - w[i];
        return detail::norm(r);
    };

    double rnorm = residual();
    rep.residual = rnorm / bnorm;
    int idle_cycles = 0;
    while (rep.iterations < max_iterations) {
        if (rep.residual <= tol) {
            rep.converged = true;
            return rep;
        }
        for (std::size_t i = 0; i < n; ++i)
            V[0][i] = r[i] / rnorm;
        std::fill(g.begin(), g.end(), T{});
        g[0] = rnorm;
        int j = 0;
        for (; j < m && rep.iterations < max_iterations; ++j) {
            ++rep.iterations;
            precond(V[j], z);
            apply(z, w);
            for (int i = 0; i <= j; ++i) {
                H[i][j] = detail::inner(V[i], w);
                for (std::size_t k = 0; k < n; ++k)
                    w[k] -= H[i][j] * V[i][k];
            }
            const double hn = detail::norm(w);
            H[j + 1][j] = hn;
            if (hn > 0.0)
                for (std::size_t k = 0; k < n; ++k)
                    V[j + 1][k] = w[k] / hn;
            for (int i = 0; i < j; ++i) {
                const T a = H[i][j], c = H[i + 1][j];
                H[i][j] = cs[i] * a + sn[i] * c;
                H[i + 1][j] = -detail::conj_(sn[i]) * a + cs[i] * c;
            }
            const T a = H[j][j], c = H[j + 1][j];
            const double aa = std::abs(a), t = std::sqrt(std::norm(a) + std::norm(c));
            if (aa == 0.0) {
                cs[j] = 0.0;
                sn[j] = 1.0;
                H[j][j] = c;
            } else {
                cs[j] = aa / t;
                sn[j] = (a / aa) * detail::conj_(c) / t;
                H[j][j] = (a / aa) * t;
            }
            H[j + 1][j] = T{};
            g[j + 1] = -detail::conj_(sn[j]) * g[j];
            g[j] = cs[j] * g[j];
            if (std::abs(g[j + 1]) / bnorm <= tol || hn == 0.0) {
                ++j;
                break;
            }
        }
        std::vector<T> y(j);
        for (int i = j - 1; i >= 0; --i) {
            T s = g[i];
            for (int k = i + 1; k < j; ++k)
                s -= H[i][k] * y[k];
            y[i] = s / H[i][i];
        }
        std::fill(w.begin(), w.end(), T{});
        for (int i = 0; i < j; ++i)
            for (std::size_t k = 0; k < n; ++k)
                w[k] += y[i] * V[i][k];
        precond(w, z);
        for (std::size_t k = 0; k < n; ++k)
            x[k] += z[k];
        rnorm = residual();
        const double previous = rep.residual;
        rep.residual = rnorm / bnorm;
        idle_cycles = rep.residual > 0.999 * previous ? idle_cycles + 1 : 0;
        if (idle_cycles >= 3 && rep.residual > tol) {
            rep.stagnated = true;
            break;
        }
    }
    rep.converged = rep.residual <= tol;
    return rep;
}

/// Preconditioner-free conjugate gradients for a Hermitian positive (semi)definite operator.
template <class T, class Apply>
KrylovReport conjugate_gradient(Apply&& apply, const std::vector<T>& b, std::vector<T>& x, double tol,
                                int max_iterations) {
    const std::size_t n = b.size();
    KrylovReport rep;
    const double bnorm = detail::norm(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), T{});
        rep.converged = true;
        return rep;
    }
    std::vector<T> r(n), p(n), q(n);
    apply(x, q);
    for (std::size_t i = 0; i < n; ++i)
        r[i] = b[i] - q[i];
    p = r;
    double rr = std::real(detail::inner(r, r));
    while (rep.iterations < max_iterations && std::sqrt(rr) / bnorm > tol) {
        ++rep.iterations;
        apply(p, q);
        const double pq = std::real(detail::inner(p, q));
        if (pq <= 0.0)
            break;
        const double alpha = rr / pq;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        const double rr_new = std::real(detail::inner(r, r));
        for (std::size_t i = 0; i < n; ++i)
            p[i] = r[i] + (rr_new / rr) * p[i];
        rr = rr_new;
    }
    rep.residual = std::sqrt(rr) / bnorm;
    rep.converged = rep.residual <= tol;
    return rep;
}

}  // namespace kppflow
