#include "mmdg/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "mmdg/sampler_detail.hpp"

namespace mmdg {

LinearClassifier train_linear_classifier(const Batch& pos, const Batch& neg, int steps, double lr,
                                         std::vector<double>* loss_history) {
    if (pos.size() < 1 || neg.size() < 1) throw std::invalid_argument("both classes need samples");
    if (pos.dim() != neg.dim()) throw std::invalid_argument("class dimension mismatch");
    if (steps < 0 || !(lr > 0.0)) throw std::invalid_argument("invalid training parameters");

    const Eigen::Index d = pos.dim();
    const Eigen::Index n_pos = pos.size();
    const Eigen::Index n_neg = neg.size();
    const double n = static_cast<double>(n_pos + n_neg);

    LinearClassifier clf;
    clf.weights = Eigen::VectorXd::Zero(d);
    if (loss_history) loss_history->clear();

    for (int step = 0; step < steps; ++step) {
        Eigen::VectorXd gw = Eigen::VectorXd::Zero(d);
        double gb = 0.0;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < n_pos; ++i) {
            const double p = clf.prob(pos.data.row(i));
            gw += (p - 1.0) * pos.data.row(i).transpose();
            gb += p - 1.0;
            loss -= std::log(std::max(p, 1e-300));
        }
        for (Eigen::Index i = 0; i < n_neg; ++i) {
            const double p = clf.prob(neg.data.row(i));
            gw += p * neg.data.row(i).transpose();
            gb += p;
            loss -= std::log(std::max(1.0 - p, 1e-300));
        }
        clf.weights -= lr / n * gw;
        clf.bias -= lr / n * gb;
        if (loss_history) loss_history->push_back(loss / n);
    }
    return clf;
}

Batch cg_guided_sample(const EpsOracle& denoiser, const LinearClassifier& clf, int B,
                       const NoiseSchedule& sched, const GuidanceConfig& cfg, double scale,
                       std::uint64_t seed) {
    if (B < 1) throw std::invalid_argument("batch size must be >= 1");
    if (clf.weights.size() < 1) throw std::invalid_argument("classifier is untrained");
    const Eigen::Index d = clf.weights.size();
    Eigen::MatrixXd Z = detail::init_batch(B, d, seed);

    for (int t = sched.T(); t >= 1; --t) {
        const double abar = sched.abar(t);
        for (int i = 0; i < B; ++i) {
            const Eigen::VectorXd eps_hat = denoiser(Z.row(i), t);
            Eigen::VectorXd z_next = detail::sampler_step(cfg, Z.row(i), t, eps_hat, sched, seed, i);
            if (scale != 0.0) {
                // classifier looks at the clean-point prediction; chain through
                // d z0_hat / d z_t = 1/sqrt(abar_t)
                const Eigen::VectorXd z0_hat =
                    (Z.row(i).transpose() - std::sqrt(1.0 - abar) * eps_hat) / std::sqrt(abar);
                z_next += scale / std::sqrt(abar) * clf.grad_log_prob(z0_hat);
            }
            Z.row(i) = z_next.transpose();
        }
    }
    return Batch(std::move(Z));
}

Batch cfg_guided_sample(const GmmSpec& spec, const std::vector<int>& user_components, int B,
                        const NoiseSchedule& sched, const GuidanceConfig& cfg, double w,
                        std::uint64_t seed) {
    if (B < 1) throw std::invalid_argument("batch size must be >= 1");
    spec.validate();
    const Eigen::Index d = spec.dim();
    Eigen::MatrixXd Z = detail::init_batch(B, d, seed);

    for (int t = sched.T(); t >= 1; --t) {
        const double abar = sched.abar(t);
        for (int i = 0; i < B; ++i) {
            const Eigen::VectorXd eps_u = eps_pred(spec, Z.row(i), abar);
            // w == 0 is the exact unconditional sampler; skip the conditional branch
            const Eigen::VectorXd eps_hat =
                w == 0.0 ? eps_u
                         : cfg_eps(eps_u, conditional_eps_pred(spec, Z.row(i), abar, user_components),
                                   w);
            Z.row(i) = detail::sampler_step(cfg, Z.row(i), t, eps_hat, sched, seed, i).transpose();
        }
    }
    return Batch(std::move(Z));
}

}  // namespace mmdg
