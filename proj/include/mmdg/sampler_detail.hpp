#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "mmdg/diffusion.hpp"
#include "mmdg/rng.hpp"

// Shared internals of the reverse-sampling loops. Baselines reuse these so
// that at neutral strength they reproduce the unguided trajectory bitwise.
namespace mmdg::detail {

inline constexpr std::uint64_t kTagInit = 0x11;
inline constexpr std::uint64_t kTagStep = 0x22;
inline constexpr std::uint64_t kTagRef = 0x33;

inline Eigen::MatrixXd init_batch(int B, Eigen::Index d, std::uint64_t seed) {
    Eigen::MatrixXd Z(B, d);
    for (int i = 0; i < B; ++i) {
        auto rng = CounterRng::keyed(seed, kTagInit, static_cast<std::uint64_t>(i), 0);
        Z.row(i) = rng.normal_vector(static_cast<int>(d));
    }
    return Z;
}

inline Eigen::VectorXd sampler_step(const GuidanceConfig& cfg, const Eigen::VectorXd& z, int t,
                                    const Eigen::VectorXd& eps_hat, const NoiseSchedule& sched,
                                    std::uint64_t seed, int sample_index) {
    auto rng = CounterRng::keyed(seed, kTagStep, static_cast<std::uint64_t>(sample_index),
                                 static_cast<std::uint64_t>(t));
    if (cfg.sampler == SamplerKind::Ddpm) {
        const Eigen::VectorXd eta = t > 1 ? rng.normal_vector(static_cast<int>(z.size()))
                                          : Eigen::VectorXd::Zero(z.size());
        return ddpm_step(z, t, eps_hat, sched, eta);
    }
    const Eigen::VectorXd noise = t > 1 && cfg.ddim_eta > 0.0
                                      ? rng.normal_vector(static_cast<int>(z.size()))
                                      : Eigen::VectorXd::Zero(z.size());
    return ddim_step(z, t, eps_hat, sched, cfg.ddim_eta, noise);
}

}  // namespace mmdg::detail
