#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mmdg/gmm.hpp"
#include "mmdg/kernels.hpp"

namespace mmdg {

// (4L/sqrt(n)) (1 + sqrt(2 ln(1/delta))) for an L-bounded kernel gradient.
double pointwise_bound(double L, int n_ref, double delta);

// Specialization for rbf: (3/(sigma sqrt(n))) (1 + sqrt(2 ln(1/delta))).
double rbf_pointwise_bound(double sigma, int n_ref, double delta);

// Uniform version over the radius ball:
// 4 L' / sqrt(n) + (4L/sqrt(n)) (1 + sqrt(2 d ln(6 R sqrt(n)) + 2 ln(1/delta))).
double uniform_bound(double L, double Lprime, int n_ref, double delta, int dim, double radius);

// Weighted cross term in the product kernel obeys the same bound with the
// latent-kernel constant.
double product_pointwise_bound(double L_z, int n_ref, double delta);

// Population cross term -2 E_{z~Q}[grad_x k(z0, z)] in closed form for an
// isotropic-component GMM under the rbf kernel (Gaussian convolution).
Eigen::VectorXd population_cross_term(const Eigen::VectorXd& z0, const GmmSpec& Q,
                                      const KernelSpec& kernel);

// Per-trial ||empirical cross term - population cross term|| at z0, references
// resampled each trial; returns the deviations sorted ascending.
std::vector<double> empirical_pointwise_deviation(const Eigen::VectorXd& z0, const GmmSpec& Q,
                                                  const KernelSpec& kernel, int n_ref, int trials,
                                                  std::uint64_t seed);

// Per-trial max deviation over uniform probe points in the radius ball; a
// lower estimate of the true supremum. Sorted ascending.
std::vector<double> empirical_uniform_deviation(const GmmSpec& Q, const KernelSpec& kernel,
                                                int n_ref, int probe_points, double radius,
                                                int trials, std::uint64_t seed);

// One cell of the bound-verification grid.
struct ConcentrationRow {
    double sigma;
    int n_ref;
    double delta;
    int dim;
    double quantile;  // empirical (1-delta)-quantile of the deviation
    double bound;     // rbf pointwise bound
    bool pass;
};

// Runs the pointwise grid check against a fresh isotropic world per dimension.
std::vector<ConcentrationRow> run_concentration_grid(const std::vector<double>& sigmas,
                                                     const std::vector<int>& n_refs,
                                                     const std::vector<double>& deltas,
                                                     const std::vector<int>& dims, int trials,
                                                     std::uint64_t seed);

}  // namespace mmdg
