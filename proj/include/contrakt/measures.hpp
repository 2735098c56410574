#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "contrakt/eigen.hpp"
#include "contrakt/error.hpp"
#include "contrakt/matrix.hpp"

namespace contrakt {

enum class MeasureTag { One, Two, Inf };

/// Selects one of the matrix measures μ1, μ2, μ∞, optionally composed
/// with an invertible weight Θ so that μ_{Θ,i}(A) = μ_i(Θ A Θ⁻¹) and the
/// underlying vector norm is |x|_{Θ,i} = |Θx|_i. Weights whose 1-norm
/// condition estimate exceeds 1e12 are rejected as numerically singular.
class MeasureKind {
public:
    static MeasureKind one() { return MeasureKind(MeasureTag::One); }
    static MeasureKind two() { return MeasureKind(MeasureTag::Two); }
    static MeasureKind inf() { return MeasureKind(MeasureTag::Inf); }

    static MeasureKind from_tag(MeasureTag tag) { return MeasureKind(tag); }

    static MeasureKind weighted(MeasureTag tag, DenseMatrix theta) {
        theta.require_square("weight");
        theta.require_finite("weight");
        DenseMatrix inv = invert(theta);  // throws on singular
        if (condition_one(theta, inv) > 1e12)
            throw Error("weight is numerically singular (1-norm condition estimate > 1e12)");
        MeasureKind k(tag);
        k.weight_ = std::move(theta);
        k.weight_inv_ = std::move(inv);
        return k;
    }

    MeasureTag tag() const { return tag_; }
    bool has_weight() const { return weight_.has_value(); }
    const DenseMatrix& weight() const { return *weight_; }
    const DenseMatrix& weight_inverse() const { return *weight_inv_; }

    /// Θ A Θ⁻¹ (or a copy of A when unweighted).
    DenseMatrix transform(const DenseMatrix& a) const {
        if (!has_weight()) return a;
        if (a.rows() != weight_->rows())
            throw Error("weight dimension does not match matrix");
        return (*weight_ * a) * *weight_inv_;
    }

    std::string name() const {
        std::string base = tag_ == MeasureTag::One ? "mu_1"
                         : tag_ == MeasureTag::Two ? "mu_2"
                                                   : "mu_inf";
        return has_weight() ? base + "(weighted)" : base;
    }

private:
    explicit MeasureKind(MeasureTag tag) : tag_(tag) {}

    MeasureTag tag_;
    std::optional<DenseMatrix> weight_;
    std::optional<DenseMatrix> weight_inv_;
};

namespace detail {

inline double mu_one_plain(const DenseMatrix& a) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = a(j, j);
        for (std::size_t i = 0; i < a.rows(); ++i)
            if (i != j) s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

inline double mu_inf_plain(const DenseMatrix& a) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = a(i, i);
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (j != i) s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

}  // namespace detail

/// Matrix measure (logarithmic norm) μ_kind(A).
///   μ1: max over columns of diagonal plus off-diagonal absolute sum,
///   μ2: largest eigenvalue of (A+Aᵀ)/2,
///   μ∞: max over rows of diagonal plus off-diagonal absolute sum,
/// each applied to Θ A Θ⁻¹ when the kind carries a weight.
inline double mu(const DenseMatrix& a, const MeasureKind& kind) {
    a.require_square("measure input");
    a.require_finite("measure input");
    const DenseMatrix m = kind.transform(a);
    switch (kind.tag()) {
        case MeasureTag::One: return detail::mu_one_plain(m);
        case MeasureTag::Inf: return detail::mu_inf_plain(m);
        case MeasureTag::Two: return symmetric_part_max_eig(m);
    }
    throw Error("unknown measure tag");
}

/// Induced matrix norm matching the measure's underlying vector norm.
inline double induced_norm(const DenseMatrix& a, const MeasureKind& kind) {
    a.require_finite("norm input");
    if (kind.has_weight()) a.require_square("weighted norm input");
    const DenseMatrix m = kind.transform(a);
    switch (kind.tag()) {
        case MeasureTag::One: return norm_one(m);
        case MeasureTag::Inf: return norm_inf(m);
        case MeasureTag::Two: return spectral_norm(m);
    }
    throw Error("unknown measure tag");
}

/// Difference-quotient probe (‖I+hA‖−1)/h for each h in a strictly
/// decreasing positive sequence. Converges monotonically from above to
/// mu(A, kind) as h decreases; used by the test suites to confirm that.
inline std::vector<double> mu_limit_probe(const DenseMatrix& a, const MeasureKind& kind,
                                          std::span<const double> h_sequence) {
    a.require_square("measure input");
    a.require_finite("measure input");
    double prev = std::numeric_limits<double>::infinity();
    for (double h : h_sequence) {
        if (!(h > 0.0)) throw Error("probe step sizes must be positive");
        if (!(h < prev)) throw Error("probe step sizes must be strictly decreasing");
        prev = h;
    }
    const DenseMatrix eye = DenseMatrix::identity(a.rows());
    std::vector<double> out;
    out.reserve(h_sequence.size());
    for (double h : h_sequence)
        out.push_back((induced_norm(eye + a * h, kind) - 1.0) / h);
    return out;
}

/// Vector norm underlying the measure: |Θx|_i (Θ = I when unweighted).
inline double vector_norm(std::span<const double> x, const MeasureKind& kind) {
    std::vector<double> w;
    std::span<const double> v = x;
    if (kind.has_weight()) {
        if (x.size() != kind.weight().cols()) throw Error("weight dimension mismatch");
        w = kind.weight().apply(x);
        v = w;
    }
    double s = 0.0;
    switch (kind.tag()) {
        case MeasureTag::One:
            for (double c : v) s += std::abs(c);
            return s;
        case MeasureTag::Two:
            for (double c : v) s += c * c;
            return std::sqrt(s);
        case MeasureTag::Inf:
            for (double c : v) s = std::max(s, std::abs(c));
            return s;
    }
    throw Error("unknown measure tag");
}

inline MeasureTag measure_tag_from_string(const std::string& s) {
    if (s == "1" || s == "one") return MeasureTag::One;
    if (s == "2" || s == "two") return MeasureTag::Two;
    if (s == "inf" || s == "infinity") return MeasureTag::Inf;
    throw Error("unknown measure '" + s + "' (expected 1, 2 or inf)");
}

}  // namespace contrakt
