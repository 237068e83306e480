#include "mmdg/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mmdg/mmd.hpp"
#include "mmdg/rng.hpp"

namespace mmdg {

namespace {

void check_tail(int n_ref, double delta) {
    if (n_ref < 1) throw std::invalid_argument("n_ref must be >= 1");
    if (!(delta > 0.0) || !(delta < 1.0)) throw std::invalid_argument("delta must be in (0, 1)");
}

double tail_factor(double delta) { return 1.0 + std::sqrt(2.0 * std::log(1.0 / delta)); }

// Empirical (1-delta)-quantile of a sorted sample.
double upper_quantile(const std::vector<double>& sorted, double delta) {
    const auto n = static_cast<double>(sorted.size());
    const auto idx = static_cast<size_t>(std::ceil((1.0 - delta) * n)) - 1;
    return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

double pointwise_bound(double L, int n_ref, double delta) {
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    check_tail(n_ref, delta);
    return 4.0 * L / std::sqrt(static_cast<double>(n_ref)) * tail_factor(delta);
}

double rbf_pointwise_bound(double sigma, int n_ref, double delta) {
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    check_tail(n_ref, delta);
    return 3.0 / (sigma * std::sqrt(static_cast<double>(n_ref))) * tail_factor(delta);
}

double uniform_bound(double L, double Lprime, int n_ref, double delta, int dim, double radius) {
    if (!(L > 0.0) || !(Lprime > 0.0)) throw std::invalid_argument("constants must be positive");
    if (dim < 1 || !(radius > 0.0)) throw std::invalid_argument("need dim >= 1 and radius > 0");
    check_tail(n_ref, delta);
    const double rn = std::sqrt(static_cast<double>(n_ref));
    const double log_arg = 6.0 * radius * rn;
    if (!(log_arg > 1.0)) throw std::invalid_argument("covering term requires 6 R sqrt(n) > 1");
    return 4.0 * Lprime / rn +
           4.0 * L / rn *
               (1.0 + std::sqrt(2.0 * dim * std::log(log_arg) + 2.0 * std::log(1.0 / delta)));
}

double product_pointwise_bound(double L_z, int n_ref, double delta) {
    return pointwise_bound(L_z, n_ref, delta);
}

Eigen::VectorXd population_cross_term(const Eigen::VectorXd& z0, const GmmSpec& Q,
                                      const KernelSpec& kernel) {
    if (kernel.kind != KernelKind::Rbf) {
        throw std::invalid_argument("population cross term is implemented for the rbf kernel only");
    }
    Q.validate();
    const double s2 = kernel.sigma * kernel.sigma;
    const double d = static_cast<double>(Q.dim());
    Eigen::VectorXd g = Eigen::VectorXd::Zero(z0.size());
    // E_z[grad k(z0, z)] under each Gaussian component is again Gaussian in z0:
    // convolving the rbf with N(mu, v I) widens the bandwidth to s2 + v.
    for (Eigen::Index k = 0; k < Q.components(); ++k) {
        const double v = Q.variances[k];
        const double width = s2 + v;
        const double amp = std::pow(s2 / width, 0.5 * d);
        const Eigen::VectorXd diff = Q.means.row(k).transpose() - z0;
        const double e = std::exp(-diff.squaredNorm() / (2.0 * width));
        g += Q.weights[k] * amp * e / width * diff;
    }
    return -2.0 * g;
}

std::vector<double> empirical_pointwise_deviation(const Eigen::VectorXd& z0, const GmmSpec& Q,
                                                  const KernelSpec& kernel, int n_ref, int trials,
                                                  std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (n_ref < 1) throw std::invalid_argument("n_ref must be >= 1");
    const Eigen::VectorXd g_star = population_cross_term(z0, Q, kernel);

    std::vector<double> deviations(static_cast<size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(mix_key(seed, static_cast<std::uint64_t>(t)));
        ReferenceSet refs;
        refs.data = sample_gmm(Q, n_ref, rng).data;
        deviations[static_cast<size_t>(t)] = (cross_term_grad(z0, refs, kernel) - g_star).norm();
    }
    std::sort(deviations.begin(), deviations.end());
    return deviations;
}

std::vector<double> empirical_uniform_deviation(const GmmSpec& Q, const KernelSpec& kernel,
                                                int n_ref, int probe_points, double radius,
                                                int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (probe_points < 1) throw std::invalid_argument("probe_points must be >= 1");
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    const Eigen::Index d = Q.dim();

    // fixed probe set across trials: uniform in the radius ball via rejection
    std::mt19937_64 probe_rng(mix_key(seed, 0xFACEULL));
    std::uniform_real_distribution<double> unif(-radius, radius);
    Eigen::MatrixXd probes(probe_points, d);
    std::vector<Eigen::VectorXd> g_stars(static_cast<size_t>(probe_points));
    for (int p = 0; p < probe_points; ++p) {
        Eigen::VectorXd x(d);
        do {
            for (Eigen::Index c = 0; c < d; ++c) x[c] = unif(probe_rng);
        } while (x.norm() > radius);
        probes.row(p) = x.transpose();
        g_stars[static_cast<size_t>(p)] = population_cross_term(x, Q, kernel);
    }

    std::vector<double> maxima(static_cast<size_t>(trials));
    for (int t = 0; t < trials; ++t) {
        std::mt19937_64 rng(mix_key(seed, static_cast<std::uint64_t>(t)));
        ReferenceSet refs;
        refs.data = sample_gmm(Q, n_ref, rng).data;
        double worst = 0.0;
        for (int p = 0; p < probe_points; ++p) {
            const double dev =
                (cross_term_grad(probes.row(p), refs, kernel) - g_stars[static_cast<size_t>(p)])
                    .norm();
            worst = std::max(worst, dev);
        }
        maxima[static_cast<size_t>(t)] = worst;
    }
    std::sort(maxima.begin(), maxima.end());
    return maxima;
}

std::vector<ConcentrationRow> run_concentration_grid(const std::vector<double>& sigmas,
                                                     const std::vector<int>& n_refs,
                                                     const std::vector<double>& deltas,
                                                     const std::vector<int>& dims, int trials,
                                                     std::uint64_t seed) {
    std::vector<ConcentrationRow> rows;
    for (int dim : dims) {
        // an off-center two-component world so the cross term is nontrivial
        GmmSpec world;
        world.weights = Eigen::Vector2d(0.5, 0.5);
        world.variances = Eigen::Vector2d(1.0, 1.0);
        world.means = Eigen::MatrixXd::Zero(2, dim);
        world.means(0, 0) = 1.0;
        world.means(1, 0) = -1.0;
        const Eigen::VectorXd z0 = Eigen::VectorXd::Constant(dim, 0.5 / std::sqrt(dim));

        for (double sigma : sigmas) {
            const KernelSpec kernel = KernelSpec::rbf(sigma);
            for (int n_ref : n_refs) {
                const std::uint64_t cell_seed =
                    mix_key(mix_key(seed, static_cast<std::uint64_t>(n_ref)),
                            static_cast<std::uint64_t>(dim) ^
                                static_cast<std::uint64_t>(sigma * 1024.0));
                const auto devs =
                    empirical_pointwise_deviation(z0, world, kernel, n_ref, trials, cell_seed);
                for (double delta : deltas) {
                    ConcentrationRow row;
                    row.sigma = sigma;
                    row.n_ref = n_ref;
                    row.delta = delta;
                    row.dim = dim;
                    row.quantile = upper_quantile(devs, delta);
                    row.bound = rbf_pointwise_bound(sigma, n_ref, delta);
                    row.pass = row.quantile <= row.bound;
                    rows.push_back(row);
                }
            }
        }
    }
    return rows;
}

}  // namespace mmdg
