#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "landing/lgr_basis.hpp"

using namespace landing::lgr;

namespace {

// Exact integral over [-1, 1] of sum_k c_k tau^k.
double analytic_integral(const Eigen::VectorXd& coeffs) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < coeffs.size(); ++k) {
        if (k % 2 == 0) s += coeffs(k) * 2.0 / static_cast<double>(k + 1);
    }
    return s;
}

double horner(const Eigen::VectorXd& c, double x) {
    double v = 0.0;
    for (Eigen::Index k = c.size() - 1; k >= 0; --k) v = v * x + c(k);
    return v;
}

}  // namespace

TEST_CASE("nodes for small n") {
    auto n1 = compute_lgr_nodes(1);
    REQUIRE(n1.size() == 2);
    CHECK(n1(0) == -1.0);
    CHECK(n1(1) == 1.0);

    auto n2 = compute_lgr_nodes(2);
    REQUIRE(n2.size() == 3);
    CHECK(n2(0) == -1.0);
    CHECK(n2(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(n2(2) == 1.0);

    auto n5 = compute_lgr_nodes(5);
    CHECK(n5(0) == -1.0);
    CHECK(n5(4) < 1.0);
    CHECK(n5(5) == 1.0);

    CHECK_THROWS_AS(compute_lgr_nodes(0), std::invalid_argument);
}

TEST_CASE("nodes are roots of P_{n-1} + P_n and strictly increasing") {
    for (int n : {2, 3, 7, 12, 30, 60, 100}) {
        auto nodes = compute_lgr_nodes(n);
        REQUIRE(nodes.size() == n + 1);
        CHECK(nodes(0) == -1.0);
        CHECK(nodes(n) == 1.0);
        for (int j = 1; j <= n; ++j) CHECK(nodes(j) > nodes(j - 1));
        CHECK(nodes(n - 1) < 1.0);
        for (int j = 0; j < n; ++j) {
            // residual scaled by derivative gives the root error estimate
            const auto a = legendre(n - 1, nodes(j));
            const auto b = legendre(n, nodes(j));
            CHECK(std::abs((a.p + b.p) / (a.dp + b.dp)) < 1e-14);
        }
    }
}

TEST_CASE("quadrature weights") {
    auto w1 = compute_quadrature_weights(compute_lgr_nodes(1));
    REQUIRE(w1.size() == 1);
    CHECK(w1(0) == doctest::Approx(2.0));

    auto w2 = compute_quadrature_weights(compute_lgr_nodes(2));
    CHECK(w2(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(w2(1) == doctest::Approx(1.5).epsilon(1e-14));

    for (int n = 1; n <= 40; ++n) {
        auto w = compute_quadrature_weights(compute_lgr_nodes(n));
        CHECK(w.minCoeff() > 0.0);
        CHECK(std::abs(w.sum() - 2.0) < 1e-13);
    }
}

TEST_CASE("quadrature is exact to degree 2n-2") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 2; n <= 12; ++n) {
        const auto g = LGRGrid::build(n);
        for (int k = 0; k <= 2 * n - 2; ++k) {
            Eigen::VectorXd c = Eigen::VectorXd::Zero(k + 1);
            c(k) = 1.0;
            double q = 0.0;
            for (int j = 0; j < n; ++j) q += g.weights(j) * std::pow(g.nodes(j), k);
            CHECK(std::abs(q - analytic_integral(c)) < 1e-12);
        }
    }
    // random polynomial of degree 2n-2 with n = 8
    const auto g = LGRGrid::build(8);
    Eigen::VectorXd c(15);
    for (auto& v : c) v = u(rng);
    double q = 0.0;
    for (int j = 0; j < 8; ++j) q += g.weights(j) * horner(c, g.nodes(j));
    CHECK(std::abs(q - analytic_integral(c)) < 1e-12);

    // degree 2n-1 is generally not integrated exactly
    Eigen::VectorXd c2 = Eigen::VectorXd::Zero(16);
    c2(15) = 1.0;
    c2(14) = 1.0;
    double q2 = 0.0;
    for (int j = 0; j < 8; ++j) q2 += g.weights(j) * horner(c2, g.nodes(j));
    CHECK(std::abs(q2 - analytic_integral(c2)) > 1e-6);
}

TEST_CASE("differentiation matrix") {
    for (int n : {1, 2, 5, 10, 30}) {
        const auto g = LGRGrid::build(n);
        REQUIRE(g.diff_matrix.rows() == n);
        REQUIRE(g.diff_matrix.cols() == n + 1);
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(n + 1);
        CHECK((g.diff_matrix * ones).cwiseAbs().maxCoeff() < 1e-11);
        Eigen::VectorXd lin = g.diff_matrix * g.nodes;
        CHECK((lin.array() - 1.0).abs().maxCoeff() < 1e-11);
    }
    // tau^2 at n = 2
    const auto g2 = LGRGrid::build(2);
    Eigen::VectorXd sq = g2.nodes.array().square();
    Eigen::VectorXd dsq = g2.diff_matrix * sq;
    for (int k = 0; k < 2; ++k) CHECK(std::abs(dsq(k) - 2.0 * g2.nodes(k)) < 1e-12);

    // exact for every degree <= n
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 2; n <= 16; ++n) {
        const auto g = LGRGrid::build(n);
        Eigen::VectorXd c(n + 1);
        for (auto& v : c) v = u(rng);
        Eigen::VectorXd dc = Eigen::VectorXd::Zero(n);
        for (int k = 1; k <= n; ++k) dc(k - 1) = k * c(k);
        Eigen::VectorXd samples(n + 1);
        for (int i = 0; i <= n; ++i) samples(i) = horner(c, g.nodes(i));
        Eigen::VectorXd d = g.diff_matrix * samples;
        for (int k = 0; k < n; ++k) CHECK(std::abs(d(k) - horner(dc, g.nodes(k))) < 1e-11);
    }

    Eigen::VectorXd dup(3);
    dup << -1.0, 0.0, 0.0;
    CHECK_THROWS_AS(compute_differentiation_matrix(dup), std::invalid_argument);
}

TEST_CASE("interpolation") {
    const auto g = LGRGrid::build(6);
    Eigen::VectorXd c = Eigen::VectorXd::Constant(7, 3.25);
    CHECK(interpolate(g, c, 0.37) == doctest::Approx(3.25));
    CHECK(interpolate(g, g.nodes, 0.2) == doctest::Approx(0.2).epsilon(1e-14));
    for (int i = 0; i <= 6; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(7);
        e(i) = 1.0;
        CHECK(interpolate(g, e, g.nodes(i)) == 1.0);
    }

    const auto g4 = LGRGrid::build(4);
    Eigen::VectorXd cube = g4.nodes.array().cube();
    CHECK(std::abs(interpolate(g4, cube, 0.5) - 0.125) < 1e-12);

    CHECK_THROWS_AS(interpolate(g4, cube, 1.0001), std::out_of_range);
    CHECK_THROWS_AS(interpolate(g4, cube, -1.5), std::out_of_range);
}

TEST_CASE("time map") {
    CHECK(time_map(0.0, 10.0, -1.0) == 0.0);
    CHECK(time_map(0.0, 10.0, 1.0) == 10.0);
    CHECK(time_map(100.0, 200.0, 1.0 / 3.0) == doctest::Approx(166.6666666666667));
    CHECK_THROWS_AS(time_map(5.0, 5.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(time_map(5.0, 4.0, 0.0), std::invalid_argument);
}
