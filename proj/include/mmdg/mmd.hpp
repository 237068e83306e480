#pragma once

#include <Eigen/Dense>

#include "mmdg/batch.hpp"
#include "mmdg/kernels.hpp"

namespace mmdg {

// Caches the reference self term (1/m^2) sum k(z_j, z_j') on Q for the given
// kernel (prompt-weighted when both prompts and a product kernel are present).
// mmd2_biased / mmd2_product use the cache when present.
double bind_self_term(const ReferenceSet& Q, const KernelSpec& k);

// Biased V-statistic estimate of MMD^2(P, Q). Diagonal terms included.
double mmd2_biased(const Batch& P, const ReferenceSet& Q, const KernelSpec& k);

// Unbiased U-statistic: diagonals excluded, denominators B(B-1) and m(m-1).
// May be negative. Requires at least two samples on each side.
double mmd2_unbiased(const Batch& P, const ReferenceSet& Q, const KernelSpec& k);

// Per-sample gradient of mmd2_biased: row i is
//   (2/B^2) sum_j grad k(z_i, z_j)  -  (2/(B m)) sum_j grad k(z_i, z_j^(r)).
Eigen::MatrixXd mmd2_grad(const Batch& P, const ReferenceSet& Q, const KernelSpec& k);

// Empirical cross term -(2/m) sum_j grad k(z0, z_j^(r)); rbf only.
Eigen::VectorXd cross_term_grad(const Eigen::VectorXd& z0, const ReferenceSet& Q,
                                const KernelSpec& k);

// Product-space V-statistic: each latent kernel entry weighted by the prompt
// kernel entry of the corresponding pair. Both P and Q must carry prompts.
double mmd2_product(const Batch& P, const ReferenceSet& Q, const KernelSpec& k);

// Gradient of mmd2_product with the cross-term prompt weights K_ref[i][j]
// precomputed (B x m).
Eigen::MatrixXd mmd2_product_grad(const Batch& P, const ReferenceSet& Q, const KernelSpec& k,
                                  const Eigen::MatrixXd& K_ref);

// B x m prompt-weight matrix K_ref[i][j] = k_p(p_i, p_j^(r)).
Eigen::MatrixXd prompt_weight_matrix(const Batch& P, const ReferenceSet& Q, const KernelSpec& k);

}  // namespace mmdg
