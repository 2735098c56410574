#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "contrakt/error.hpp"
#include "contrakt/matrix.hpp"

namespace contrakt {

/// Eigendecomposition of a real symmetric matrix: A = Q diag(values) Qᵀ.
/// Eigenvalues ascending, eigenvectors in the matching columns of q.
struct SymmetricEigen {
    std::vector<double> values;
    DenseMatrix q;
};

namespace detail {

inline double hypot2(double a, double b) { return std::hypot(a, b); }

// Householder reduction of a symmetric matrix to tridiagonal form.
// On exit `z` holds the accumulated orthogonal transform, `d` the diagonal
// and `e` the subdiagonal (e[0] unused).
inline void tridiagonalize(DenseMatrix& z, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = z.rows();
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t l = i - 1;
        double h = 0.0;
        double scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    }
}

// Implicit QL iteration with Wilkinson shifts on a tridiagonal matrix,
// accumulating the rotations into `z`.
inline void ql_iterate(DenseMatrix& z, std::vector<double>& d, std::vector<double>& e) {
    const std::size_t n = d.size();
    if (n == 1) return;
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iterations = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 + 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iterations == 64) throw Error("symmetric eigensolver did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = hypot2(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

/// Symmetric eigensolver: tridiagonalization followed by implicit QL.
/// Input must be symmetric up to `symmetry_tol` relative to its magnitude;
/// the strictly symmetric part (A+Aᵀ)/2 is what actually gets decomposed.
inline SymmetricEigen symmetric_eigen(const DenseMatrix& a, double symmetry_tol = 1e-8) {
    a.require_square("symmetric eigensolver input");
    a.require_finite("symmetric eigensolver input");
    const std::size_t n = a.rows();
    const double scale = 1.0 + a.max_abs();
    DenseMatrix z(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(a(i, j) - a(j, i)) > symmetry_tol * scale)
                throw Error("matrix is not symmetric");
            z(i, j) = 0.5 * (a(i, j) + a(j, i));
        }

    std::vector<double> d, e;
    detail::tridiagonalize(z, d, e);
    detail::ql_iterate(z, d, e);

    // ascending order, eigenvector columns permuted alongside
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
    SymmetricEigen out;
    out.values.resize(n);
    out.q = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = d[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.q(i, j) = z(i, order[j]);
    }
    return out;
}

/// Largest eigenvalue of (A + Aᵀ)/2.
inline double symmetric_part_max_eig(const DenseMatrix& a) {
    a.require_square("symmetric part");
    a.require_finite("symmetric part");
    DenseMatrix s = (a + a.transpose()) * 0.5;
    const auto eig = symmetric_eigen(s);
    return eig.values.back();
}

/// Spectral norm (largest singular value) as sqrt of the largest
/// eigenvalue of AᵀA, reusing the symmetric solver.
inline double spectral_norm(const DenseMatrix& a) {
    a.require_finite("spectral norm input");
    const DenseMatrix ata = a.transpose() * a;
    const auto eig = symmetric_eigen(ata);
    return std::sqrt(std::max(0.0, eig.values.back()));
}

/// Spectrum of a graph Laplacian with its orthogonal diagonalizer.
/// Requires symmetry and zero row sums within 1e-10 (absolute, relative
/// to the matrix magnitude). Eigenvalues ascending, so values[1] is the
/// algebraic connectivity.
struct LaplacianSpectrum {
    std::vector<double> values;
    DenseMatrix q;

    double algebraic_connectivity() const {
        if (values.size() < 2) throw Error("algebraic connectivity needs at least 2 nodes");
        return values[1];
    }
};

inline LaplacianSpectrum laplacian_spectrum(const DenseMatrix& l) {
    l.require_square("laplacian");
    l.require_finite("laplacian");
    const std::size_t n = l.rows();
    const double scale = 1.0 + l.max_abs();
    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::abs(l(i, j) - l(j, i)) > 1e-10 * scale)
                throw Error("laplacian is not symmetric");
            row_sum += l(i, j);
        }
        if (std::abs(row_sum) > 1e-10 * scale)
            throw Error("laplacian row sums are not zero");
    }
    auto eig = symmetric_eigen(l, 1e-10);
    return LaplacianSpectrum{std::move(eig.values), std::move(eig.q)};
}

}  // namespace contrakt
