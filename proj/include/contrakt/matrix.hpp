#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "contrakt/error.hpp"

namespace contrakt {

/// Dense real matrix, row-major storage. The carrier type for system
/// matrices, Jacobians, Laplacians and norm weights. Entries are
/// validated to be finite whenever a matrix is built from user data.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), entries_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0) throw Error("matrix dimensions must be positive");
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), entries_(std::move(entries)) {
        if (rows == 0 || cols == 0) throw Error("matrix dimensions must be positive");
        if (entries_.size() != rows * cols)
            throw Error("matrix entry count " + std::to_string(entries_.size()) +
                        " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
        require_finite("matrix");
    }

    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        if (rows_ == 0) throw Error("matrix dimensions must be positive");
        cols_ = rows.begin()->size();
        entries_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw Error("ragged initializer for matrix");
            entries_.insert(entries_.end(), r.begin(), r.end());
        }
        require_finite("matrix");
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix diagonal(std::span<const double> d) {
        DenseMatrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        m.require_finite("diagonal");
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_ && rows_ > 0; }

    double& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

    std::span<const double> data() const { return entries_; }

    bool finite() const {
        return std::all_of(entries_.begin(), entries_.end(),
                           [](double v) { return std::isfinite(v); });
    }

    void require_finite(const char* what) const {
        if (!finite()) throw Error(std::string(what) + " has non-finite entries");
    }

    void require_square(const char* what) const {
        if (!square()) throw Error(std::string(what) + " must be square");
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    DenseMatrix& operator+=(const DenseMatrix& other) {
        check_same_shape(other);
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += other.entries_[k];
        return *this;
    }

    DenseMatrix& operator-=(const DenseMatrix& other) {
        check_same_shape(other);
        for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= other.entries_[k];
        return *this;
    }

    DenseMatrix& operator*=(double s) {
        for (double& v : entries_) v *= s;
        return *this;
    }

    friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
    friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
    friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
    friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

    friend DenseMatrix operator-(const DenseMatrix& a) {
        DenseMatrix r = a;
        for (double& v : r.entries_) v = -v;
        return r;
    }

    friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
        if (a.cols_ != b.rows_) throw Error("matrix product dimension mismatch");
        DenseMatrix r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        }
        return r;
    }

    /// y = A x for a state vector x.
    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != cols_) throw Error("matrix-vector dimension mismatch");
        std::vector<double> y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : entries_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    void check_same_shape(const DenseMatrix& other) const {
        if (rows_ != other.rows_ || cols_ != other.cols_)
            throw Error("matrix shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

/// Kronecker product A ⊗ B.
inline DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix r(a.rows() * b.rows(), a.cols() * b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) continue;
            for (std::size_t p = 0; p < b.rows(); ++p)
                for (std::size_t q = 0; q < b.cols(); ++q)
                    r(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
        }
    return r;
}

/// Maximum absolute column sum.
inline double norm_one(const DenseMatrix& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

/// Maximum absolute row sum.
inline double norm_inf(const DenseMatrix& a) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
/// Throws on a numerically singular pivot.
inline DenseMatrix invert(const DenseMatrix& a) {
    a.require_square("matrix to invert");
    a.require_finite("matrix to invert");
    const std::size_t n = a.rows();
    DenseMatrix work = a;
    DenseMatrix inv = DenseMatrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        double best = std::abs(work(col, col));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double v = std::abs(work(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best <= 1e-300) throw Error("singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(work(pivot, j), work(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        }
        const double d = work(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            work(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                work(r, j) -= f * work(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

/// 1-norm condition number estimate given a computed inverse.
inline double condition_one(const DenseMatrix& a, const DenseMatrix& a_inv) {
    return norm_one(a) * norm_one(a_inv);
}

// --- plain-text matrix format: first line "rows cols", then row-major
// --- whitespace-separated decimals.

inline DenseMatrix read_matrix(std::istream& in) {
    std::size_t rows = 0, cols = 0;
    if (!(in >> rows >> cols)) throw Error("matrix header must be 'rows cols'");
    if (rows == 0 || cols == 0) throw Error("matrix dimensions must be positive");
    std::vector<double> entries(rows * cols);
    for (double& v : entries)
        if (!(in >> v)) throw Error("matrix body shorter than rows*cols entries");
    return DenseMatrix(rows, cols, std::move(entries));
}

inline DenseMatrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open matrix file: " + path);
    try {
        return read_matrix(in);
    } catch (const Error& e) {
        throw Error(path + ": " + e.what());
    }
}

inline void write_matrix(std::ostream& out, const DenseMatrix& a) {
    out << a.rows() << " " << a.cols() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
            out << buf << (j + 1 == a.cols() ? "" : " ");
        }
        out << "\n";
    }
}

}  // namespace contrakt
