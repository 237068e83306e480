#include "mmdg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mmdg/kernels.hpp"
#include "mmdg/mmd.hpp"

namespace mmdg {

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& X) {
    const Eigen::RowVectorXd mu = X.colwise().mean();
    const Eigen::MatrixXd C = X.rowwise() - mu;
    return C.transpose() * C / static_cast<double>(X.rows() - 1);
}

// Symmetric PSD square root via eigendecomposition, negative eigenvalues
// (numerical noise) clipped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

nlohmann::json MetricsReport::to_json() const {
    return {{"fd", fd},           {"kd", kd},       {"density", density}, {"coverage", coverage},
            {"n_gen", n_gen},     {"n_ref", n_ref}, {"knn_k", knn_k}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.fd = j.at("fd").get<double>();
    r.kd = j.at("kd").get<double>();
    r.density = j.at("density").get<double>();
    r.coverage = j.at("coverage").get<double>();
    r.n_gen = j.at("n_gen").get<int>();
    r.n_ref = j.at("n_ref").get<int>();
    r.knn_k = j.at("knn_k").get<int>();
    return r;
}

double frechet_distance(const Batch& A, const Batch& B) {
    if (A.size() < 2 || B.size() < 2) throw std::invalid_argument("need >= 2 samples per batch");
    if (A.dim() != B.dim()) throw std::invalid_argument("batch dimension mismatch");
    const Eigen::Index d = A.dim();

    const Eigen::RowVectorXd mu_a = A.data.colwise().mean();
    const Eigen::RowVectorXd mu_b = B.data.colwise().mean();
    Eigen::MatrixXd Sa = covariance(A.data);
    Eigen::MatrixXd Sb = covariance(B.data);

    // small-sample stabilization before the matrix square root
    if (std::min(A.size(), B.size()) < 2 * d) {
        Sa += 1e-6 * Eigen::MatrixXd::Identity(d, d);
        Sb += 1e-6 * Eigen::MatrixXd::Identity(d, d);
    }

    // tr((Sa Sb)^{1/2}) through the symmetrized product sqrt(Sa) Sb sqrt(Sa)
    const Eigen::MatrixXd root_a = psd_sqrt(Sa);
    const Eigen::MatrixXd inner = psd_sqrt(root_a * Sb * root_a);

    const double fd =
        (mu_a - mu_b).squaredNorm() + (Sa + Sb - 2.0 * inner).trace();
    return std::max(fd, 0.0);
}

double kernel_distance(const Batch& A, const Batch& B) {
    if (A.size() < 2 || B.size() < 2) throw std::invalid_argument("need >= 2 samples per batch");
    if (A.dim() != B.dim()) throw std::invalid_argument("batch dimension mismatch");
    const KernelSpec k = KernelSpec::polynomial(3, 1.0, 1.0 / static_cast<double>(A.dim()));
    ReferenceSet Q;
    Q.data = B.data;
    return mmd2_unbiased(A, Q, k);
}

std::pair<double, double> density_coverage(const Batch& gen, const Batch& ref, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (ref.size() <= k || gen.size() <= k) {
        throw std::invalid_argument("k must be smaller than both batch sizes");
    }
    if (gen.dim() != ref.dim()) throw std::invalid_argument("batch dimension mismatch");
    const Eigen::Index n_ref = ref.size();
    const Eigen::Index n_gen = gen.size();

    // radius of each reference point: distance to its k-th nearest neighbor
    // within the reference set (self excluded)
    Eigen::VectorXd radii(n_ref);
    std::vector<double> dists(static_cast<size_t>(n_ref) - 1);
    for (Eigen::Index j = 0; j < n_ref; ++j) {
        size_t idx = 0;
        for (Eigen::Index l = 0; l < n_ref; ++l) {
            if (l == j) continue;
            dists[idx++] = (ref.data.row(j) - ref.data.row(l)).norm();
        }
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        radii[j] = dists[static_cast<size_t>(k) - 1];
    }

    double density_hits = 0.0;
    std::vector<bool> covered(static_cast<size_t>(n_ref), false);
    for (Eigen::Index i = 0; i < n_gen; ++i) {
        for (Eigen::Index j = 0; j < n_ref; ++j) {
            if ((gen.data.row(i) - ref.data.row(j)).norm() <= radii[j]) {
                density_hits += 1.0;
                covered[static_cast<size_t>(j)] = true;
            }
        }
    }
    const double density = density_hits / (static_cast<double>(k) * static_cast<double>(n_gen));
    const double coverage =
        static_cast<double>(std::count(covered.begin(), covered.end(), true)) /
        static_cast<double>(n_ref);
    return {density, coverage};
}

MetricsReport compute_metrics(const Batch& gen, const Batch& ref, int k) {
    MetricsReport r;
    r.fd = frechet_distance(gen, ref);
    r.kd = kernel_distance(gen, ref);
    const auto dc = density_coverage(gen, ref, k);
    r.density = dc.first;
    r.coverage = dc.second;
    r.n_gen = static_cast<int>(gen.size());
    r.n_ref = static_cast<int>(ref.size());
    r.knn_k = k;
    return r;
}

}  // namespace mmdg
