#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "contrakt/eigen.hpp"
#include "support/oracles.hpp"

using namespace contrakt;

TEST_CASE("symmetric_part_max_eig on simple cases", "[eigen]") {
    CHECK(symmetric_part_max_eig(DenseMatrix({{1, 0, 0}, {0, 2, 0}, {0, 0, 3}})) ==
          Catch::Approx(3.0).margin(1e-12));
    // skew-symmetric: symmetric part vanishes
    CHECK(symmetric_part_max_eig(DenseMatrix({{0, 1}, {-1, 0}})) ==
          Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("symmetric eigensolver matches the characteristic-polynomial oracle", "[eigen]") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + trial % 4;  // up to 5x5
        const DenseMatrix s = oracles::random_symmetric(rng, n);
        const auto eig = symmetric_eigen(s);
        auto oracle = oracles::eigenvalues(s);
        std::vector<double> expected;
        for (const auto& z : oracle) {
            CHECK(std::abs(z.imag()) < 1e-7);
            expected.push_back(z.real());
        }
        std::sort(expected.begin(), expected.end());
        REQUIRE(eig.values.size() == n);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(eig.values[i] == Catch::Approx(expected[i]).margin(1e-9));
    }
}

TEST_CASE("symmetric eigensolver residuals and orthogonality", "[eigen]") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + trial % 7;  // up to 8x8
        const DenseMatrix s = oracles::random_symmetric(rng, n, 3.0);
        const auto eig = symmetric_eigen(s);
        const double scale = 1.0 + s.max_abs();
        // A v = lambda v
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                double av = 0.0;
                for (std::size_t j = 0; j < n; ++j) av += s(i, j) * eig.q(j, k);
                CHECK(std::abs(av - eig.values[k] * eig.q(i, k)) < 1e-9 * scale);
            }
        }
        // Q' Q = I
        const DenseMatrix qtq = eig.q.transpose() * eig.q;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                CHECK(std::abs(qtq(i, j) - (i == j ? 1.0 : 0.0)) < 1e-10);
        // ascending
        for (std::size_t i = 1; i < n; ++i) CHECK(eig.values[i] >= eig.values[i - 1]);
    }
}

TEST_CASE("spectral norm on known cases", "[eigen]") {
    CHECK(spectral_norm(DenseMatrix({{3, 0}, {0, 4}})) == Catch::Approx(4.0).margin(1e-12));
    CHECK(spectral_norm(DenseMatrix({{0, 1}, {0, 0}})) == Catch::Approx(1.0).margin(1e-12));
    CHECK(spectral_norm(DenseMatrix::identity(5)) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("laplacian spectrum of the complete graph K3 and the path P2", "[eigen]") {
    const DenseMatrix k3({{2, -1, -1}, {-1, 2, -1}, {-1, -1, 2}});
    const auto spec = laplacian_spectrum(k3);
    REQUIRE(spec.values.size() == 3);
    CHECK(spec.values[0] == Catch::Approx(0.0).margin(1e-10));
    CHECK(spec.values[1] == Catch::Approx(3.0).margin(1e-10));
    CHECK(spec.values[2] == Catch::Approx(3.0).margin(1e-10));
    CHECK(spec.algebraic_connectivity() == Catch::Approx(3.0).margin(1e-10));

    const DenseMatrix p2({{1, -1}, {-1, 1}});
    const auto spec2 = laplacian_spectrum(p2);
    CHECK(spec2.values[0] == Catch::Approx(0.0).margin(1e-10));
    CHECK(spec2.values[1] == Catch::Approx(2.0).margin(1e-10));

    const auto zero = laplacian_spectrum(DenseMatrix(3, 3));
    for (double v : zero.values) CHECK(v == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("laplacian diagonalization residual", "[eigen]") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> weight(0.2, 2.0);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + trial % 6;
        DenseMatrix l(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) continue;
                const double w = weight(rng);
                l(i, j) = -w;
                l(j, i) = -w;
            }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) s += l(i, j);
            l(i, i) = -s;
        }
        const auto spec = laplacian_spectrum(l);
        const DenseMatrix d = spec.q.transpose() * l * spec.q;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double want = (i == j) ? spec.values[i] : 0.0;
                CHECK(std::abs(d(i, j) - want) < 1e-8);
            }
        CHECK(spec.values[0] == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("laplacian validation rejects asymmetry and nonzero row sums", "[eigen]") {
    CHECK_THROWS_AS(laplacian_spectrum(DenseMatrix({{1, -1}, {0, 1}})), Error);
    CHECK_THROWS_AS(laplacian_spectrum(DenseMatrix({{1, -0.5}, {-0.5, 1}})), Error);
}
