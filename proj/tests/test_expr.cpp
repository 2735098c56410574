#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "contrakt/expr.hpp"
#include "support/oracles.hpp"

using namespace contrakt;

namespace {

const std::vector<std::string> kT = {"t"};
const std::vector<std::string> kXY = {"x", "y"};

double eval_at(const ExprPtr& e, std::vector<double> env) { return eval(e, env); }

}  // namespace

TEST_CASE("parse builds the expected shapes", "[expr]") {
    const ExprPtr input = parse_expr("1.5+2*sin(10*t)", kT);
    REQUIRE(input->kind == ExprKind::Binary);
    CHECK(input->op == '+');
    CHECK(input->args[0]->kind == ExprKind::Constant);
    CHECK(input->args[0]->value == 1.5);
    const auto& rhs = input->args[1];
    REQUIRE(rhs->kind == ExprKind::Binary);
    CHECK(rhs->op == '*');
    CHECK(rhs->args[1]->kind == ExprKind::Call);
    CHECK(rhs->args[1]->name == "sin");

    const ExprPtr x = parse_expr("x", kXY);
    CHECK(x->kind == ExprKind::Variable);
    CHECK(x->slot == 0);

    const std::vector<std::pair<std::string, double>> params = {{"beta", 1.0}, {"h", 0.01}};
    const std::vector<std::string> vars = {"xt", "y"};
    const ExprPtr g = parse_expr("-beta*(xt - y - h)", vars, &params);
    CHECK(eval_at(g, {0.5, 0.2}) == Catch::Approx(-(0.5 - 0.2 - 0.01)));
}

TEST_CASE("operator precedence and associativity", "[expr]") {
    CHECK(eval_at(parse_expr("2*3+4*5", kT), {0.0}) == 26.0);
    CHECK(eval_at(parse_expr("2+3*4", kT), {0.0}) == 14.0);
    const std::vector<std::string> abc = {"a", "b", "c"};
    CHECK(eval_at(parse_expr("a-b-c", abc), {10.0, 3.0, 2.0}) == 5.0);
    CHECK(eval_at(parse_expr("12/2/3", kT), {0.0}) == 2.0);
    // '^' binds tighter than '*', and is left-associative
    CHECK(eval_at(parse_expr("2*3^2", kT), {0.0}) == 18.0);
    CHECK(eval_at(parse_expr("2^3^2", kT), {0.0}) == 64.0);
    // unary minus binds tighter than '^'
    CHECK(eval_at(parse_expr("-2^2", kT), {0.0}) == 4.0);
    CHECK(eval_at(parse_expr("-t^2", kT), {3.0}) == 9.0);
    CHECK(eval_at(parse_expr("-(t^2)", kT), {3.0}) == -9.0);
    CHECK(eval_at(parse_expr("(2+3)*4", kT), {0.0}) == 20.0);
}

TEST_CASE("parse errors carry position information", "[expr]") {
    CHECK_THROWS_AS(parse_expr("", kT), ParseError);
    CHECK_THROWS_AS(parse_expr("   ", kT), ParseError);
    CHECK_THROWS_AS(parse_expr("1+", kT), ParseError);
    CHECK_THROWS_AS(parse_expr("(1+2", kT), ParseError);
    CHECK_THROWS_AS(parse_expr("1 2", kT), ParseError);
    CHECK_THROWS_AS(parse_expr("foo", kT), ParseError);          // undeclared identifier
    CHECK_THROWS_AS(parse_expr("sin(1,2)", kT), ParseError);     // arity
    CHECK_THROWS_AS(parse_expr("min(1)", kT), ParseError);       // arity
    CHECK_THROWS_AS(parse_expr("blah(1)", kT), ParseError);      // unknown function
    CHECK_THROWS_AS(parse_expr("sin", kT), ParseError);          // function without args
    CHECK_THROWS_AS(parse_expr("x $ y", kXY), ParseError);       // bad character

    try {
        parse_expr("1 + foo", kT);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 1);
        CHECK(e.column == 5);
    }
}

TEST_CASE("eval basics", "[expr]") {
    const double pi = 3.14159265358979323846;
    CHECK(eval_at(parse_expr("abs(sin(t))", kT), {pi}) == Catch::Approx(0.0).margin(1e-12));
    CHECK(eval_at(parse_expr("1.5+2*sin(10*t)", kT), {0.0}) == Catch::Approx(1.5));
    CHECK(eval_at(parse_expr("min(3, t)", kT), {7.0}) == 3.0);
    CHECK(eval_at(parse_expr("max(3, t)", kT), {7.0}) == 7.0);
    CHECK(eval_at(parse_expr("sign(t)", kT), {0.0}) == 0.0);
    CHECK(eval_at(parse_expr("step(t)", kT), {0.0}) == 1.0);

    // env smaller than the referenced slot: unbound variable
    const ExprPtr e = parse_expr("x+y", kXY);
    std::vector<double> short_env = {1.0};
    CHECK_THROWS_AS(eval(e, short_env), Error);
}

TEST_CASE("eval is deterministic", "[expr]") {
    std::mt19937_64 rng(41);
    const std::vector<std::string> vars = {"x", "y", "t"};
    for (int trial = 0; trial < 100; ++trial) {
        const ExprPtr e = oracles::random_any_expr(rng, vars, 5);
        std::uniform_real_distribution<double> dist(-2.0, 2.0);
        const std::vector<double> env = {dist(rng), dist(rng), dist(rng)};
        const double a = eval(e, env);
        const double b = eval(e, env);
        if (std::isfinite(a)) {
            CHECK(a == b);
        }
    }
}

TEST_CASE("random expressions agree with the string-evaluator oracle", "[expr]") {
    std::mt19937_64 rng(42);
    const std::vector<std::string> vars = {"x", "y", "t"};
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 500; ++trial) {
        const ExprPtr e = oracles::random_any_expr(rng, vars, 5);
        const std::string text = print_expr(e);
        const std::vector<double> env = {dist(rng), dist(rng), dist(rng)};
        const double mine = eval(e, env);
        const double oracle = oracles::evaluate_printed(text, vars, env);
        if (std::isfinite(mine) && std::isfinite(oracle)) {
            CHECK(mine == Catch::Approx(oracle).margin(1e-12 * (1.0 + std::abs(oracle))));
        }
    }
}

TEST_CASE("print-parse round trip is the identity on ASTs", "[expr]") {
    std::mt19937_64 rng(43);
    const std::vector<std::string> vars = {"x", "y", "t"};
    for (int trial = 0; trial < 1000; ++trial) {
        const ExprPtr e = oracles::random_any_expr(rng, vars, 5);
        const std::string once = print_expr(e);
        const ExprPtr back = parse_expr(once, vars);
        CHECK(expr_equal(e, back));
        CHECK(print_expr(back) == once);
    }
    // and for parsed source text: parse . print . parse == parse
    for (const char* src : {"1.5+2*sin(10*t)", "-x^2 - min(x, y)*abs(t)", "x/(1.5+y*y)"}) {
        const ExprPtr p = parse_expr(src, vars);
        CHECK(expr_equal(p, parse_expr(print_expr(p), vars)));
    }
}

TEST_CASE("diff simple rules", "[expr]") {
    const ExprPtr sq = parse_expr("x*x", kXY);
    CHECK(eval_at(diff(sq, 0), {3.0, 0.0}) == 6.0);

    // d/dy of -k1*y + k2*(eT-y)*(xt-y) at a point equals
    // -k1 + k2*(-eT - xt + 2y)
    const std::vector<std::pair<std::string, double>> params = {
        {"k1", 0.5}, {"k2", 5.0}, {"eT", 1.0}};
    const std::vector<std::string> vars = {"xt", "y"};
    const ExprPtr field = parse_expr("-k1*y + k2*(eT-y)*(xt-y)", vars, &params);
    const ExprPtr dy = diff(field, 1);
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> dist(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double xt = dist(rng), y = dist(rng);
        const double expected = -0.5 + 5.0 * (-1.0 - xt + 2.0 * y);
        CHECK(eval_at(dy, {xt, y}) == Catch::Approx(expected).margin(1e-12));
    }

    // chain rules
    CHECK(eval_at(diff(parse_expr("sin(2*x)", kXY), 0), {0.25, 0}) ==
          Catch::Approx(2.0 * std::cos(0.5)));
    CHECK(eval_at(diff(parse_expr("exp(3*x)", kXY), 0), {0.1, 0}) ==
          Catch::Approx(3.0 * std::exp(0.3)));
    CHECK(eval_at(diff(parse_expr("log(x)", kXY), 0), {2.0, 0}) == Catch::Approx(0.5));
    CHECK(eval_at(diff(parse_expr("x^3", kXY), 0), {2.0, 0}) == Catch::Approx(12.0));
    // variable exponent goes through the log form
    CHECK(eval_at(diff(parse_expr("x^y", kXY), 0), {2.0, 3.0}) == Catch::Approx(12.0));
    CHECK(eval_at(diff(parse_expr("x^y", kXY), 1), {2.0, 3.0}) ==
          Catch::Approx(8.0 * std::log(2.0)));
}

TEST_CASE("diff conventions at kinks", "[expr]") {
    // d|x| = sign(x), and sign(0) = 0
    const ExprPtr dabs = diff(parse_expr("abs(x)", kXY), 0);
    CHECK(eval_at(dabs, {2.0, 0}) == 1.0);
    CHECK(eval_at(dabs, {-2.0, 0}) == -1.0);
    CHECK(eval_at(dabs, {0.0, 0}) == 0.0);

    // ties resolve to the first argument
    const ExprPtr dmin = diff(parse_expr("min(x, 2*x)", kXY), 0);
    CHECK(eval_at(dmin, {0.0, 0}) == 1.0);   // tie at x = 0
    CHECK(eval_at(dmin, {1.0, 0}) == 1.0);   // x < 2x
    CHECK(eval_at(dmin, {-1.0, 0}) == 2.0);  // 2x < x
    const ExprPtr dmax = diff(parse_expr("max(x, 2*x)", kXY), 0);
    CHECK(eval_at(dmax, {0.0, 0}) == 1.0);
    CHECK(eval_at(dmax, {1.0, 0}) == 2.0);
    CHECK(eval_at(dmax, {-1.0, 0}) == 1.0);

    // derivative ASTs stay inside the language: they print and reparse
    const std::vector<std::string> vars = {"x", "y"};
    CHECK(expr_equal(dmin, parse_expr(print_expr(dmin), vars)));
}

TEST_CASE("diff matches central finite differences on random smooth expressions", "[expr]") {
    std::mt19937_64 rng(45);
    const std::vector<std::string> vars = {"x", "y", "t"};
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    int checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const ExprPtr e = oracles::random_smooth_expr(rng, vars, 4);
        std::vector<ExprPtr> grads;
        for (int s = 0; s < 3; ++s) grads.push_back(diff(e, s));
        std::vector<double> env = {dist(rng), dist(rng), dist(rng)};
        for (int s = 0; s < 3; ++s) {
            const double h = 1e-6 * std::max(1.0, std::abs(env[s]));
            auto central = [&](double step) {
                std::vector<double> up = env, dn = env;
                up[s] += step;
                dn[s] -= step;
                return (eval(e, up) - eval(e, dn)) / (2.0 * step);
            };
            const double fdiff = central(h);
            const double fdiff2 = central(2.0 * h);
            const double analytic = eval(grads[s], env);
            if (!std::isfinite(fdiff) || !std::isfinite(fdiff2) || !std::isfinite(analytic))
                continue;
            if (std::abs(analytic) > 1e6) continue;  // wild growth
            // truncation-dominated stencils cannot resolve 1e-6; the
            // h-vs-2h disagreement measures that without peeking at the
            // analytic value
            if (std::abs(fdiff - fdiff2) > 2e-7 * std::max(1.0, std::abs(fdiff))) continue;
            const double rel = std::abs(fdiff - analytic) / std::max(1.0, std::abs(analytic));
            CHECK(rel < 1e-6);
            ++checked;
        }
    }
    CHECK(checked > 2000);
}
