#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mmdg/batch.hpp"
#include "mmdg/diffusion.hpp"
#include "mmdg/gmm.hpp"

namespace mmdg {

// Logistic-regression classifier separating user references from unguided
// model samples.
struct LinearClassifier {
    Eigen::VectorXd weights;
    double bias = 0.0;

    double logit(const Eigen::VectorXd& x) const { return weights.dot(x) + bias; }
    double prob(const Eigen::VectorXd& x) const { return 1.0 / (1.0 + std::exp(-logit(x))); }
    // grad_x log p(user | x) for the positive class: (1 - p(x)) * w.
    Eigen::VectorXd grad_log_prob(const Eigen::VectorXd& x) const {
        return (1.0 - prob(x)) * weights;
    }
};

// Full-batch gradient-descent logistic regression; pos labeled 1, neg 0.
// Returns the fitted classifier; optionally reports the per-step loss.
LinearClassifier train_linear_classifier(const Batch& pos, const Batch& neg, int steps, double lr,
                                         std::vector<double>* loss_history = nullptr);

// Classifier guidance: the classifier gradient is evaluated at the clean-point
// prediction z0_hat and chained through d z0_hat / d z_t = 1/sqrt(abar_t).
Batch cg_guided_sample(const EpsOracle& denoiser, const LinearClassifier& clf, int B,
                       const NoiseSchedule& sched, const GuidanceConfig& cfg, double scale,
                       std::uint64_t seed);

// Classifier-free guidance over the user's component subset.
Batch cfg_guided_sample(const GmmSpec& spec, const std::vector<int>& user_components, int B,
                        const NoiseSchedule& sched, const GuidanceConfig& cfg, double w,
                        std::uint64_t seed);

}  // namespace mmdg
