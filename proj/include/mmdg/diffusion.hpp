#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "mmdg/batch.hpp"
#include "mmdg/kernels.hpp"

namespace mmdg {

// DDPM noise schedule; timesteps run 1..T, abar(0) == 1.
struct NoiseSchedule {
    Eigen::VectorXd betas;
    Eigen::VectorXd alphas;
    Eigen::VectorXd abars;
    Eigen::VectorXd posterior_vars;  // beta_tilde_t = (1-abar_{t-1})/(1-abar_t) * beta_t

    int T() const { return static_cast<int>(betas.size()); }
    double beta(int t) const { return betas[check(t)]; }
    double alpha(int t) const { return alphas[check(t)]; }
    double abar(int t) const { return t == 0 ? 1.0 : abars[check(t)]; }
    double posterior_var(int t) const { return posterior_vars[check(t)]; }

    nlohmann::json to_json() const;

private:
    int check(int t) const;
};

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

enum class LambdaKind { Constant, SnrScaled };

struct LambdaSchedule {
    LambdaKind kind = LambdaKind::Constant;
    double value = 0.1;

    // lambda_t; snr_scaled uses value * (1 - abar_t).
    double at(double abar_t) const {
        return kind == LambdaKind::Constant ? value : value * (1.0 - abar_t);
    }
};

enum class ReferenceMode { Clean, NoisedAtT };
enum class SamplerKind { Ddpm, Ddim };

struct SeparateSteps {
    int inner = 5;  // gradient-descent updates per guidance block
    int every = 10; // diffusion steps between blocks
};

struct GuidanceConfig {
    LambdaSchedule lambda_schedule;
    ReferenceMode reference_mode = ReferenceMode::Clean;
    SamplerKind sampler = SamplerKind::Ddpm;
    double ddim_eta = 0.0;
    std::optional<SeparateSteps> separate_steps;
    KernelSpec kernel = KernelSpec::rbf(1.0);
    int batch_size = 8;  // samples guided jointly; the CLI chunks n_generate by this
    // Evaluate the MMD gradient at the post-sampler-step state instead of z_t.
    bool grad_at_post_step = false;

    nlohmann::json to_json() const;
    static GuidanceConfig from_json(const nlohmann::json& j);
};

// Optional per-timestep diagnostics.
struct TrajectoryPoint {
    int t;
    double mean_mmd2;
    double mean_grad_norm;
};
using Trajectory = std::vector<TrajectoryPoint>;

// eps-prediction oracle: (z, t) -> predicted noise.
using EpsOracle = std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;
// conditional oracle: (z, t, prompt) -> predicted noise.
using CondEpsOracle =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, int, const Eigen::VectorXd&)>;

// z_t = sqrt(abar_t) z0 + sqrt(1-abar_t) eps.
Eigen::VectorXd forward_noising(const Eigen::VectorXd& z0, int t, const NoiseSchedule& sched,
                                const Eigen::VectorXd& eps);

// One reverse DDPM step; eta_noise must be zero at t = 1.
Eigen::VectorXd ddpm_step(const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& eps_hat,
                          const NoiseSchedule& sched, const Eigen::VectorXd& eta_noise);

// One DDIM step with stochasticity eta in [0, 1].
Eigen::VectorXd ddim_step(const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& eps_hat,
                          const NoiseSchedule& sched, double eta, const Eigen::VectorXd& noise);

// Classifier-free interpolation (1-w) uncond + w cond.
Eigen::VectorXd cfg_eps(const Eigen::VectorXd& eps_uncond, const Eigen::VectorXd& eps_cond,
                        double w);

// MMD-guided reverse sampling: per timestep, a sampler step per sample plus a
// subtracted lambda_t * MMD^2 gradient computed on the time-t batch snapshot.
Batch guided_sample(const EpsOracle& denoiser, const ReferenceSet& Q, int B,
                    const NoiseSchedule& sched, const GuidanceConfig& cfg, std::uint64_t seed,
                    Trajectory* trajectory = nullptr);

// Prompt-aware variant: product kernel, per-sample prompts, prompt weights
// against the references precomputed once.
Batch prompt_guided_sample(const CondEpsOracle& denoiser, const ReferenceSet& Q,
                           const Eigen::MatrixXd& prompts, const NoiseSchedule& sched,
                           const GuidanceConfig& cfg, std::uint64_t seed,
                           Trajectory* trajectory = nullptr);

// Separate-steps variant: unguided sampler steps, with `inner` pure
// gradient-descent updates applied after every `every`-th diffusion step.
Batch guided_sample_separate(const EpsOracle& denoiser, const ReferenceSet& Q, int B,
                             const NoiseSchedule& sched, const GuidanceConfig& cfg, int inner,
                             int every, std::uint64_t seed, Trajectory* trajectory = nullptr);

}  // namespace mmdg
