#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "mmdg/kernels.hpp"

using namespace mmdg;

namespace {

Eigen::VectorXd randn(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = g(rng);
    return v;
}

// central finite difference of k(., y) at x
Eigen::VectorXd fd_grad(const KernelSpec& k, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double h = 1e-6;
    Eigen::VectorXd g(x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c) {
        Eigen::VectorXd xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        g[c] = (kernel_eval(k, xp, y) - kernel_eval(k, xm, y)) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("rbf evaluation") {
    const KernelSpec k = KernelSpec::rbf(2.0);
    Eigen::VectorXd x(2), y(2);
    x << 1.0, 0.0;
    y << 1.0, 0.0;
    CHECK(kernel_eval(k, x, y) == doctest::Approx(1.0));
    y << 3.0, 0.0;
    // exp(-4 / (2*4)) = exp(-1/2)
    CHECK(kernel_eval(k, x, y) == doctest::Approx(std::exp(-0.5)));
    CHECK(kernel_eval(k, x, y) == kernel_eval(k, y, x));
}

TEST_CASE("polynomial evaluation") {
    const KernelSpec k = KernelSpec::polynomial(3, 1.0, 0.5);
    Eigen::VectorXd x(2), y(2);
    x << 2.0, 0.0;
    y << 1.0, 1.0;
    // (1 + 0.5*2)^3 = 8
    CHECK(kernel_eval(k, x, y) == doctest::Approx(8.0));
}

TEST_CASE("rbf gram matrix is positive semidefinite") {
    std::mt19937_64 rng(1);
    const KernelSpec k = KernelSpec::rbf(1.0);
    const int n = 25;
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < n; ++i) pts.push_back(randn(rng, 3));
    Eigen::MatrixXd G(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) G(i, j) = kernel_eval(k, pts[i], pts[j]);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("gradients match finite differences") {
    std::mt19937_64 rng(2);
    for (const KernelSpec& k : {KernelSpec::rbf(0.7), KernelSpec::rbf(2.0),
                                KernelSpec::polynomial(3, 1.0, 0.25),
                                KernelSpec::polynomial(2, 0.5, 1.0)}) {
        for (int trial = 0; trial < 50; ++trial) {
            const Eigen::VectorXd x = randn(rng, 4);
            const Eigen::VectorXd y = randn(rng, 4);
            const Eigen::VectorXd g = kernel_grad_x(k, x, y);
            const Eigen::VectorXd g_fd = fd_grad(k, x, y);
            CHECK((g - g_fd).norm() <= 1e-5 * (1.0 + g.norm()));
        }
    }
}

TEST_CASE("prompt kernels") {
    const KernelSpec d = KernelSpec::prompt_delta();
    Eigen::VectorXd p(2), q(2);
    p << 1.0, 0.0;
    q << 1.0, 0.0;
    CHECK(prompt_kernel_eval(d, p, q) == 1.0);
    q << 0.0, 1.0;
    CHECK(prompt_kernel_eval(d, p, q) == 0.0);

    const KernelSpec r = KernelSpec::prompt_rbf(1.0);
    CHECK(prompt_kernel_eval(r, p, p) == doctest::Approx(1.0));
    const double v = prompt_kernel_eval(r, p, q);
    CHECK(v > 0.0);
    CHECK(v < 1.0);
}

TEST_CASE("lipschitz constant bounds the gradient norm and is attained") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (double sigma : {0.5, 1.0, 2.0}) {
        const KernelSpec k = KernelSpec::rbf(sigma);
        const double L = lipschitz_L(k);
        CHECK(L == doctest::Approx(1.0 / (sigma * std::sqrt(std::exp(1.0)))));
        double sup = 0.0;
        for (int trial = 0; trial < 10000; ++trial) {
            Eigen::VectorXd x(3), y(3);
            for (int c = 0; c < 3; ++c) {
                x[c] = unif(rng);
                y[c] = unif(rng);
            }
            sup = std::max(sup, kernel_grad_x(k, x, y).norm());
            CHECK(kernel_grad_x(k, x, y).norm() <= L * (1.0 + 1e-12));
        }
        // the sup is attained at separation sigma
        Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3), y0 = Eigen::VectorXd::Zero(3);
        y0[0] = sigma;
        CHECK(kernel_grad_x(k, x0, y0).norm() == doctest::Approx(L));
    }
}

TEST_CASE("lipschitz constant of the gradient map") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (double sigma : {0.5, 1.0, 2.0}) {
        const KernelSpec k = KernelSpec::rbf(sigma);
        const double Lp = lipschitz_Lprime(k);
        CHECK(Lp == doctest::Approx(2.0 / (sigma * sigma * std::sqrt(std::exp(1.0)))));
        for (int trial = 0; trial < 10000; ++trial) {
            Eigen::VectorXd x(2), x2(2), y(2);
            for (int c = 0; c < 2; ++c) {
                x[c] = unif(rng);
                x2[c] = unif(rng);
                y[c] = unif(rng);
            }
            const double lhs = (kernel_grad_x(k, x, y) - kernel_grad_x(k, x2, y)).norm();
            CHECK(lhs <= Lp * (x - x2).norm() * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("validation rejects bad parameters") {
    CHECK_THROWS_AS(KernelSpec::rbf(0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec::rbf(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec::polynomial(0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec::polynomial(3, -1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec::polynomial(3, 1.0, 0.0), std::invalid_argument);
    // product factors must be (prompt, latent) in that order
    CHECK_THROWS_AS(KernelSpec::product(KernelSpec::rbf(1.0), KernelSpec::rbf(1.0)),
                    std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec::product(KernelSpec::prompt_delta(), KernelSpec::prompt_delta()),
                    std::invalid_argument);
    CHECK_NOTHROW(KernelSpec::product(KernelSpec::prompt_delta(), KernelSpec::rbf(1.0)));

    const KernelSpec k = KernelSpec::rbf(1.0);
    Eigen::VectorXd x(2), y(3);
    x.setZero();
    y.setZero();
    CHECK_THROWS_AS(kernel_eval(k, x, y), std::invalid_argument);
    CHECK_THROWS_AS(kernel_eval(KernelSpec::prompt_delta(), x, x), std::invalid_argument);
    CHECK_THROWS_AS(lipschitz_L(KernelSpec::polynomial(3, 1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("json round trip") {
    for (const KernelSpec& k :
         {KernelSpec::rbf(0.5), KernelSpec::polynomial(3, 1.0, 0.1), KernelSpec::prompt_delta(),
          KernelSpec::prompt_rbf(2.0),
          KernelSpec::product(KernelSpec::prompt_rbf(1.5), KernelSpec::rbf(0.25))}) {
        const KernelSpec back = KernelSpec::from_json(k.to_json());
        CHECK(back.to_json() == k.to_json());
    }
    CHECK_THROWS_AS(KernelSpec::from_json({{"kind", "nope"}}), std::invalid_argument);
}
