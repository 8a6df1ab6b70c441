#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "flatstab/lp.hpp"

using flatstab::lp::Result;
using flatstab::lp::Status;
using flatstab::lp::minimize;

TEST_CASE("unique optimum on a one-constraint problem") {
    Eigen::MatrixXd A(1, 2);
    A << 1.0, 1.0;
    Eigen::VectorXd b(1);
    b << 1.0;
    Eigen::VectorXd c(2);
    c << 2.0, 1.0;
    const Result res = minimize(A, b, c);
    REQUIRE(res.status == Status::Optimal);
    CHECK(res.objective == doctest::Approx(1.0));
    CHECK(res.x(0) == doctest::Approx(0.0));
    CHECK(res.x(1) == doctest::Approx(1.0));
}

TEST_CASE("negative right-hand side is normalized before phase 1") {
    Eigen::MatrixXd A(2, 2);
    A << -1.0, -1.0, 1.0, -1.0;
    Eigen::VectorXd b(2);
    b << -3.0, 1.0;
    Eigen::VectorXd c(2);
    c << 1.0, 1.0;
    const Result res = minimize(A, b, c);
    REQUIRE(res.status == Status::Optimal);
    CHECK(res.x(0) == doctest::Approx(2.0));
    CHECK(res.x(1) == doctest::Approx(1.0));
    CHECK(res.objective == doctest::Approx(3.0));
}

TEST_CASE("infeasible system is reported") {
    Eigen::MatrixXd A(1, 1);
    A << 1.0;
    Eigen::VectorXd b(1);
    b << -1.0;
    Eigen::VectorXd c(1);
    c << 1.0;
    CHECK(minimize(A, b, c).status == Status::Infeasible);
}

TEST_CASE("unbounded direction is reported") {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(1, 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(1);
    Eigen::VectorXd c(1);
    c << -1.0;
    CHECK(minimize(A, b, c).status == Status::Unbounded);
}

TEST_CASE("redundant duplicated rows are tolerated") {
    Eigen::MatrixXd A(3, 2);
    A << 1.0, 1.0, 1.0, 1.0, 1.0, -1.0;
    Eigen::VectorXd b(3);
    b << 2.0, 2.0, 0.0;
    Eigen::VectorXd c(2);
    c << 1.0, 3.0;
    const Result res = minimize(A, b, c);
    REQUIRE(res.status == Status::Optimal);
    CHECK(res.x(0) == doctest::Approx(1.0));
    CHECK(res.x(1) == doctest::Approx(1.0));
    CHECK(res.objective == doctest::Approx(4.0));
}

TEST_CASE("degenerate optimum at the origin") {
    Eigen::MatrixXd A(2, 2);
    A << 1.0, -1.0, 1.0, 1.0;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd c(2);
    c << 1.0, 0.0;
    const Result res = minimize(A, b, c);
    REQUIRE(res.status == Status::Optimal);
    CHECK(res.objective == doctest::Approx(0.0));
}

TEST_CASE("basis hint skips phase 1 and reaches the same optimum") {
    // Signed-split structure: x = s+ - s- against two unit rows.
    Eigen::MatrixXd A(2, 4);
    A << 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0;
    Eigen::VectorXd b(2);
    b << 1.0, -2.0;
    Eigen::VectorXd c = Eigen::VectorXd::Ones(4);
    const std::vector<int> hint{0, 3};
    const Result hinted = minimize(A, b, c, &hint);
    const Result cold = minimize(A, b, c);
    REQUIRE(hinted.status == Status::Optimal);
    REQUIRE(cold.status == Status::Optimal);
    CHECK(hinted.objective == doctest::Approx(3.0));
    CHECK(cold.objective == doctest::Approx(hinted.objective));
    CHECK(hinted.x(0) == doctest::Approx(1.0));
    CHECK(hinted.x(3) == doctest::Approx(2.0));
}

TEST_CASE("invalid basis hint falls back to phase 1") {
    Eigen::MatrixXd A(1, 2);
    A << 1.0, 1.0;
    Eigen::VectorXd b(1);
    b << 1.0;
    Eigen::VectorXd c(2);
    c << 2.0, 1.0;
    const std::vector<int> bad_hint{5};
    const Result res = minimize(A, b, c, &bad_hint);
    REQUIRE(res.status == Status::Optimal);
    CHECK(res.objective == doctest::Approx(1.0));
}

TEST_CASE("random feasible systems are solved at least as well as the seed point") {
    std::mt19937_64 rng(20240817ULL);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = 3, n = 6;
        Eigen::MatrixXd A(m, n);
        Eigen::VectorXd x0(n), c(n);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                A(i, j) = static_cast<double>(static_cast<int>(rng() % 7)) - 3.0;
            }
        }
        for (int j = 0; j < n; ++j) {
            x0(j) = static_cast<double>(rng() % 4);
            c(j) = 1.0 + static_cast<double>(rng() % 5);
        }
        const Eigen::VectorXd b = A * x0;
        const Result res = minimize(A, b, c);
        REQUIRE(res.status == Status::Optimal);
        CHECK(res.objective <= c.dot(x0) + 1e-7);
        CHECK(res.objective >= -1e-9);
        CHECK((A * res.x - b).lpNorm<Eigen::Infinity>() <= 1e-7);
        CHECK(res.x.minCoeff() >= -1e-9);
    }
}
