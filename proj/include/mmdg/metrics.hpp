#pragma once

#include <Eigen/Dense>
#include <utility>

#include "json.hpp"
#include "mmdg/batch.hpp"

namespace mmdg {

struct MetricsReport {
    double fd = 0.0;
    double kd = 0.0;
    double density = 0.0;
    double coverage = 0.0;
    int n_gen = 0;
    int n_ref = 0;
    int knn_k = 5;

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

// Frechet distance between empirical Gaussians fitted to each batch.
double frechet_distance(const Batch& A, const Batch& B);

// Unbiased MMD^2 under the cubic polynomial kernel (gamma = 1/d, offset 1).
double kernel_distance(const Batch& A, const Batch& B);

// k-NN density/coverage of gen against ref; returns (density, coverage).
std::pair<double, double> density_coverage(const Batch& gen, const Batch& ref, int k);

// Bundles all four metrics into one report.
MetricsReport compute_metrics(const Batch& gen, const Batch& ref, int k = 5);

}  // namespace mmdg
