#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <random>

#include "doctest.h"
#include "mmdg/concentration.hpp"
#include "mmdg/mmd.hpp"

using namespace mmdg;

namespace {

GmmSpec single_gaussian(int d, double var, double mean0) {
    GmmSpec g;
    g.weights = Eigen::VectorXd::Ones(1);
    g.variances = Eigen::VectorXd::Constant(1, var);
    g.means = Eigen::MatrixXd::Zero(1, d);
    g.means(0, 0) = mean0;
    return g;
}

GmmSpec two_component(int d) {
    GmmSpec g;
    g.weights = Eigen::Vector2d(0.7, 0.3);
    g.variances = Eigen::Vector2d(1.0, 0.5);
    g.means = Eigen::MatrixXd::Zero(2, d);
    g.means(0, 0) = 1.0;
    g.means(1, 0) = -1.5;
    return g;
}

// Monte Carlo population cross term with many draws.
Eigen::VectorXd mc_cross_term(const Eigen::VectorXd& z0, const GmmSpec& Q, const KernelSpec& k,
                              int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(z0.size());
    const int chunk = 10000;
    int left = draws;
    while (left > 0) {
        const int n = std::min(chunk, left);
        const Batch b = sample_gmm(Q, n, rng);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            acc += kernel_grad_x(k, z0, b.data.row(i));
        }
        left -= n;
    }
    return -2.0 * acc / static_cast<double>(draws);
}

}  // namespace

TEST_CASE("pointwise bound closed-form values and monotonicity") {
    // L=1, n=16, delta=1/e -> (4/4)(1+sqrt(2))
    CHECK(pointwise_bound(1.0, 16, std::exp(-1.0)) == doctest::Approx(2.414214).epsilon(1e-6));
    CHECK(pointwise_bound(1.0, 64, 0.1) < pointwise_bound(1.0, 16, 0.1));
    CHECK(pointwise_bound(1.0, 16, 0.01) > pointwise_bound(1.0, 16, 0.1));
    CHECK_THROWS_AS(pointwise_bound(1.0, 16, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(pointwise_bound(1.0, 16, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(pointwise_bound(0.0, 16, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(pointwise_bound(1.0, 0, 0.1), std::invalid_argument);
}

TEST_CASE("rbf pointwise bound") {
    // sigma=1, n=100, delta=0.05 -> 0.3 (1 + sqrt(2 ln 20))
    CHECK(rbf_pointwise_bound(1.0, 100, 0.05) == doctest::Approx(1.0343240).epsilon(1e-5));
    // halving sigma doubles the bound
    CHECK(rbf_pointwise_bound(0.5, 100, 0.05) ==
          doctest::Approx(2.0 * rbf_pointwise_bound(1.0, 100, 0.05)));
    // dominates the generic bound with L = 1/(sigma sqrt(e)) since 4/sqrt(e) < 3
    for (double sigma : {0.5, 1.0, 3.0}) {
        const double L = lipschitz_L(KernelSpec::rbf(sigma));
        CHECK(rbf_pointwise_bound(sigma, 49, 0.1) >= pointwise_bound(L, 49, 0.1));
    }
}

TEST_CASE("uniform bound") {
    const double L = 1.0, Lp = 2.0;
    // direct substitution: dim=1, 6 R sqrt(n) = e
    const int n = 36;
    const double R = std::exp(1.0) / (6.0 * 6.0);
    const double delta = 0.1;
    const double expected =
        4.0 * Lp / 6.0 + (4.0 * L / 6.0) * (1.0 + std::sqrt(2.0 + 2.0 * std::log(1.0 / delta)));
    CHECK(uniform_bound(L, Lp, n, delta, 1, R) == doctest::Approx(expected).epsilon(1e-12));
    // uniform dominates pointwise when the covering term is active
    CHECK(uniform_bound(L, Lp, 100, 0.1, 3, 2.0) > pointwise_bound(L, 100, 0.1));
    // grows with dimension
    CHECK(uniform_bound(L, Lp, 100, 0.1, 10, 2.0) > uniform_bound(L, Lp, 100, 0.1, 2, 2.0));
    CHECK_THROWS_AS(uniform_bound(L, Lp, 100, 0.1, 0, 2.0), std::invalid_argument);
}

TEST_CASE("product bound equals the pointwise bound in the latent constant") {
    // L_z = 0.5, n = 25, delta = 0.1 -> 0.4 (1 + sqrt(2 ln 10))
    CHECK(product_pointwise_bound(0.5, 25, 0.1) == doctest::Approx(1.25838).epsilon(1e-5));
    for (int n : {9, 100}) {
        CHECK(product_pointwise_bound(0.7, n, 0.2) == pointwise_bound(0.7, n, 0.2));
    }
}

TEST_CASE("closed-form population cross term agrees with Monte Carlo") {
    const KernelSpec k = KernelSpec::rbf(1.0);
    // single gaussian
    {
        const GmmSpec Q = single_gaussian(3, 0.8, 0.5);
        Eigen::VectorXd z0(3);
        z0 << 0.2, -0.4, 1.0;
        const Eigen::VectorXd cf = population_cross_term(z0, Q, k);
        const Eigen::VectorXd mc = mc_cross_term(z0, Q, k, 1000000, 11);
        CHECK((cf - mc).norm() <= 1e-3);
    }
    // mixture
    {
        const GmmSpec Q = two_component(2);
        Eigen::VectorXd z0(2);
        z0 << 0.3, 0.1;
        const Eigen::VectorXd cf = population_cross_term(z0, Q, k);
        const Eigen::VectorXd mc = mc_cross_term(z0, Q, k, 1000000, 12);
        CHECK((cf - mc).norm() <= 1e-3);
    }
    CHECK_THROWS_AS(
        population_cross_term(Eigen::VectorXd::Zero(2), two_component(2),
                              KernelSpec::polynomial(3, 1.0, 1.0)),
        std::invalid_argument);
}

TEST_CASE("near point-mass references give vanishing deviations") {
    const KernelSpec k = KernelSpec::rbf(1.0);
    const GmmSpec Q = single_gaussian(2, 1e-12, 0.5);
    Eigen::VectorXd z0(2);
    z0 << 0.5, 0.0;  // at the (near) point mass: both gradients vanish
    const auto devs = empirical_pointwise_deviation(z0, Q, k, 20, 200, 3);
    CHECK(devs.back() <= 1e-5);
}

TEST_CASE("pointwise deviations are sorted, shrink with n_ref, and obey the bound") {
    const KernelSpec k = KernelSpec::rbf(1.0);
    const GmmSpec Q = two_component(5);
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(5);
    z0[0] = 0.4;

    const auto devs = empirical_pointwise_deviation(z0, Q, k, 100, 1000, 21);
    CHECK(std::is_sorted(devs.begin(), devs.end()));
    // empirical 95th percentile under the corollary bound
    CHECK(devs[949] <= rbf_pointwise_bound(1.0, 100, 0.05));

    const auto big = empirical_pointwise_deviation(z0, Q, k, 100000, 120, 22);
    CHECK(big.back() <= 0.2 * rbf_pointwise_bound(1.0, 100000, 0.05));

    // root-n scaling of the median
    const auto devs4 = empirical_pointwise_deviation(z0, Q, k, 400, 1000, 23);
    const double ratio = devs[500] / devs4[500];
    CHECK(ratio >= 1.6);
    CHECK(ratio <= 2.4);
}

TEST_CASE("uniform deviations are sorted and below the uniform bound") {
    const KernelSpec k = KernelSpec::rbf(1.0);
    const GmmSpec Q = two_component(2);
    const double radius = 2.0;
    const int n_ref = 100;
    const auto maxima = empirical_uniform_deviation(Q, k, n_ref, 200, radius, 500, 31);
    CHECK(std::is_sorted(maxima.begin(), maxima.end()));
    const double delta = 0.05;
    const double bound = uniform_bound(lipschitz_L(k), lipschitz_Lprime(k), n_ref, delta, 2, radius);
    const auto q = static_cast<size_t>(std::ceil(0.95 * maxima.size())) - 1;
    CHECK(maxima[q] <= bound);
    // the probed max dominates any single-point deviation in distribution:
    // compare medians against the pointwise run at the same n_ref
    const auto pointwise =
        empirical_pointwise_deviation(Eigen::VectorXd::Zero(2), Q, k, n_ref, 500, 31);
    CHECK(maxima[250] >= pointwise[250] * 0.5);
}

TEST_CASE("grid runner") {
    const auto rows = run_concentration_grid({1.0}, {25, 100}, {0.05, 0.2}, {2}, 200, 5);
    CHECK(rows.size() == 4);
    for (const auto& r : rows) {
        CHECK(r.bound == doctest::Approx(rbf_pointwise_bound(r.sigma, r.n_ref, r.delta)));
        CHECK(r.pass);
        CHECK(r.quantile >= 0.0);
    }
    CHECK_THROWS_AS(empirical_pointwise_deviation(Eigen::VectorXd::Zero(2), two_component(2),
                                                  KernelSpec::rbf(1.0), 0, 10, 1),
                    std::invalid_argument);
}
