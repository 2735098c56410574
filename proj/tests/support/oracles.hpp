#pragma once

// Independent oracles for the test suites. These deliberately avoid the
// library's own algorithms: eigenvalues come from characteristic
// polynomial coefficients (Faddeev-LeVerrier) and Durand-Kerner root
// iteration, and expressions are re-evaluated by a standalone
// parse-and-evaluate pass over the printed text.

#include <cctype>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "contrakt/error.hpp"
#include "contrakt/expr.hpp"
#include "contrakt/matrix.hpp"

namespace oracles {

// --- eigenvalues of small matrices ---------------------------------------

// Characteristic polynomial det(tI - A) = t^n + c[1] t^(n-1) + ... + c[n]
// by the Faddeev-LeVerrier recursion.
inline std::vector<double> characteristic_polynomial(const contrakt::DenseMatrix& a) {
    const std::size_t n = a.rows();
    std::vector<double> c(n + 1, 0.0);
    c[0] = 1.0;
    contrakt::DenseMatrix m = a;
    for (std::size_t k = 1; k <= n; ++k) {
        double trace = 0.0;
        for (std::size_t i = 0; i < n; ++i) trace += m(i, i);
        c[k] = -trace / static_cast<double>(k);
        if (k == n) break;
        for (std::size_t i = 0; i < n; ++i) m(i, i) += c[k];
        m = a * m;
    }
    return c;
}

// All complex roots of a monic polynomial by Durand-Kerner iteration.
inline std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& coeff) {
    const std::size_t n = coeff.size() - 1;
    std::vector<std::complex<double>> roots(n);
    std::complex<double> seed(0.4, 0.9);
    std::complex<double> p(1.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        roots[i] = p;
        p *= seed;
    }
    auto eval_poly = [&](std::complex<double> z) {
        std::complex<double> v(0.0, 0.0);
        for (double c : coeff) v = v * z + c;
        return v;
    };
    for (int iter = 0; iter < 500; ++iter) {
        double shift = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::complex<double> denom(1.0, 0.0);
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            const std::complex<double> delta = eval_poly(roots[i]) / denom;
            roots[i] -= delta;
            shift = std::max(shift, std::abs(delta));
        }
        if (shift < 1e-14) break;
    }
    return roots;
}

inline std::vector<std::complex<double>> eigenvalues(const contrakt::DenseMatrix& a) {
    return polynomial_roots(characteristic_polynomial(a));
}

inline double max_real_eigenvalue(const contrakt::DenseMatrix& a) {
    double best = -1e300;
    for (const auto& z : eigenvalues(a)) best = std::max(best, z.real());
    return best;
}

// --- independent expression evaluator -------------------------------------
//
// Evaluates the canonical printed form of an expression directly off the
// text, with its own recursive descent over the published grammar.

class StringEvaluator {
public:
    StringEvaluator(const std::string& text, const std::vector<std::string>& names,
                    const std::vector<double>& values)
        : text_(text), names_(names), values_(values) {}

    double run() {
        const double v = sum();
        skip_ws();
        if (pos_ != text_.size()) throw contrakt::Error("oracle: trailing input");
        return v;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    double sum() {
        double v = product();
        while (true) {
            if (accept('+'))
                v += product();
            else if (accept('-'))
                v -= product();
            else
                return v;
        }
    }

    double product() {
        double v = power();
        while (true) {
            if (accept('*'))
                v *= power();
            else if (accept('/'))
                v /= power();
            else
                return v;
        }
    }

    double power() {
        double v = atom();
        while (accept('^')) v = std::pow(v, atom());
        return v;
    }

    double atom() {
        if (accept('-')) return -atom();
        if (accept('(')) {
            const double v = sum();
            if (!accept(')')) throw contrakt::Error("oracle: expected ')'");
            return v;
        }
        skip_ws();
        if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            std::size_t used = 0;
            const double v = std::stod(text_.substr(pos_), &used);
            pos_ += used;
            return v;
        }
        std::string ident;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                       text_[pos_] == '_'))
            ident += text_[pos_++];
        if (ident.empty()) throw contrakt::Error("oracle: expected atom");
        if (peek() == '(') {
            ++pos_;
            const double a = sum();
            double b = 0.0;
            bool two = false;
            if (accept(',')) {
                b = sum();
                two = true;
            }
            if (!accept(')')) throw contrakt::Error("oracle: expected ')'");
            if (ident == "sin") return std::sin(a);
            if (ident == "cos") return std::cos(a);
            if (ident == "exp") return std::exp(a);
            if (ident == "log") return std::log(a);
            if (ident == "abs") return std::abs(a);
            if (ident == "sign") return a > 0 ? 1.0 : (a < 0 ? -1.0 : 0.0);
            if (ident == "step") return a >= 0 ? 1.0 : 0.0;
            if (ident == "min" && two) return std::min(a, b);
            if (ident == "max" && two) return std::max(a, b);
            throw contrakt::Error("oracle: unknown function " + ident);
        }
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == ident) return values_[i];
        throw contrakt::Error("oracle: unknown identifier " + ident);
    }

    std::string text_;
    std::size_t pos_ = 0;
    const std::vector<std::string>& names_;
    const std::vector<double>& values_;
};

inline double evaluate_printed(const std::string& text, const std::vector<std::string>& names,
                               const std::vector<double>& values) {
    return StringEvaluator(text, names, values).run();
}

// --- random generators ------------------------------------------------------

inline contrakt::DenseMatrix random_matrix(std::mt19937_64& rng, std::size_t n,
                                           double scale = 2.0) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    contrakt::DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = dist(rng);
    return a;
}

inline contrakt::DenseMatrix random_symmetric(std::mt19937_64& rng, std::size_t n,
                                              double scale = 2.0) {
    contrakt::DenseMatrix a = random_matrix(rng, n, scale);
    return (a + a.transpose()) * 0.5;
}

// Random smooth expression over the given variables: no abs/min/max,
// denominators bounded away from zero, exp arguments damped.
inline contrakt::ExprPtr random_smooth_expr(std::mt19937_64& rng,
                                            const std::vector<std::string>& vars, int depth) {
    using namespace contrakt;
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::uniform_int_distribution<int> pick_var(0, static_cast<int>(vars.size()) - 1);
    if (depth <= 0) {
        if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) return make_constant(coef(rng));
        const int v = pick_var(rng);
        return make_variable(vars[static_cast<std::size_t>(v)], v);
    }
    switch (std::uniform_int_distribution<int>(0, 9)(rng)) {
        case 0:
            return make_binary_raw('+', random_smooth_expr(rng, vars, depth - 1),
                                   random_smooth_expr(rng, vars, depth - 1));
        case 1:
            return make_binary_raw('-', random_smooth_expr(rng, vars, depth - 1),
                                   random_smooth_expr(rng, vars, depth - 1));
        case 2:
        case 3:
            return make_binary_raw('*', random_smooth_expr(rng, vars, depth - 1),
                                   random_smooth_expr(rng, vars, depth - 1));
        case 4: {
            // denominator 1.5 + g^2 keeps the quotient smooth on the sample box
            ExprPtr g = random_smooth_expr(rng, vars, depth - 2);
            ExprPtr denom = make_binary_raw(
                '+', make_constant(1.5), make_binary_raw('*', g, g));
            return make_binary_raw('/', random_smooth_expr(rng, vars, depth - 1), denom);
        }
        case 5:
            return make_call(Func::Sin, {random_smooth_expr(rng, vars, depth - 1)});
        case 6:
            return make_call(Func::Cos, {random_smooth_expr(rng, vars, depth - 1)});
        case 7:
            // damped argument keeps nested exponentials in range
            return make_call(Func::Exp, {make_binary_raw('*', make_constant(0.25),
                                                         random_smooth_expr(rng, vars, depth - 1))});
        case 8: {
            const int e = std::uniform_int_distribution<int>(2, 3)(rng);
            return make_binary_raw('^', random_smooth_expr(rng, vars, depth - 1),
                                   make_constant(static_cast<double>(e)));
        }
        default: {
            const int v = pick_var(rng);
            return make_variable(vars[static_cast<std::size_t>(v)], v);
        }
    }
}

// Random expression that may include the kinked functions, for
// eval/print round-trip coverage.
inline contrakt::ExprPtr random_any_expr(std::mt19937_64& rng,
                                         const std::vector<std::string>& vars, int depth) {
    using namespace contrakt;
    if (depth > 0) {
        const int c = std::uniform_int_distribution<int>(0, 11)(rng);
        if (c == 0)
            return make_call(Func::Abs, {random_any_expr(rng, vars, depth - 1)});
        if (c == 1)
            return make_call(Func::Min, {random_any_expr(rng, vars, depth - 1),
                                         random_any_expr(rng, vars, depth - 1)});
        if (c == 2)
            return make_call(Func::Max, {random_any_expr(rng, vars, depth - 1),
                                         random_any_expr(rng, vars, depth - 1)});
        if (c == 3) {
            // the folding builder keeps the AST in the parser's canonical image
            return make_unary_minus(random_any_expr(rng, vars, depth - 1));
        }
    }
    return random_smooth_expr(rng, vars, depth);
}

}  // namespace oracles
