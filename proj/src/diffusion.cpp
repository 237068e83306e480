#include "mmdg/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "mmdg/mmd.hpp"
#include "mmdg/rng.hpp"
#include "mmdg/sampler_detail.hpp"

namespace mmdg {

namespace {

using detail::init_batch;
using detail::kTagRef;
using detail::sampler_step;

void check_guidance_inputs(const ReferenceSet& Q, int B, const GuidanceConfig& cfg) {
    if (Q.size() < 1) throw std::invalid_argument("empty reference set");
    if (B < 1) throw std::invalid_argument("batch size must be >= 1");
    if (cfg.lambda_schedule.value < 0.0) throw std::invalid_argument("guidance scale must be >= 0");
}

ReferenceSet references_at(const ReferenceSet& Q, int t, const NoiseSchedule& sched,
                           const GuidanceConfig& cfg, std::uint64_t seed) {
    if (cfg.reference_mode == ReferenceMode::Clean) {
        ReferenceSet R;
        R.data = Q.data;
        R.prompts = Q.prompts;
        return R;
    }
    ReferenceSet R;
    R.data.resize(Q.size(), Q.dim());
    for (Eigen::Index j = 0; j < Q.size(); ++j) {
        auto rng = CounterRng::keyed(seed, kTagRef, static_cast<std::uint64_t>(j),
                                     static_cast<std::uint64_t>(t));
        R.data.row(j) = forward_noising(Q.data.row(j), t, sched,
                                        rng.normal_vector(static_cast<int>(Q.dim())));
    }
    R.prompts = Q.prompts;
    return R;
}

void record_trajectory(Trajectory* trajectory, int t, const Batch& snapshot,
                       const ReferenceSet& refs, const GuidanceConfig& cfg,
                       const Eigen::MatrixXd& grad) {
    if (!trajectory) return;
    const double value = cfg.kernel.kind == KernelKind::Product
                             ? mmd2_product(snapshot, refs, cfg.kernel)
                             : mmd2_biased(snapshot, refs, cfg.kernel);
    trajectory->push_back({t, value, grad.rowwise().norm().mean()});
}

}  // namespace

int NoiseSchedule::check(int t) const {
    if (t < 1 || t > T()) throw std::out_of_range("timestep out of range: " + std::to_string(t));
    return t - 1;
}

nlohmann::json NoiseSchedule::to_json() const {
    return {{"T", T()}, {"beta_start", betas[0]}, {"beta_end", betas[T() - 1]}};
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("schedule length must be >= 1");
    if (!(beta_start > 0.0) || beta_start > beta_end || !(beta_end < 1.0)) {
        throw std::invalid_argument("need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.betas.resize(T);
    if (T == 1) {
        s.betas[0] = beta_start;
    } else {
        for (int t = 0; t < T; ++t) {
            s.betas[t] = beta_start + (beta_end - beta_start) * t / (T - 1);
        }
    }
    s.alphas = (1.0 - s.betas.array()).matrix();
    s.abars.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        prod *= s.alphas[t];
        s.abars[t] = prod;
    }
    s.posterior_vars.resize(T);
    for (int t = 0; t < T; ++t) {
        const double abar_prev = t == 0 ? 1.0 : s.abars[t - 1];
        s.posterior_vars[t] = (1.0 - abar_prev) / (1.0 - s.abars[t]) * s.betas[t];
    }
    return s;
}

nlohmann::json GuidanceConfig::to_json() const {
    nlohmann::json j;
    j["lambda"] = {{"kind", lambda_schedule.kind == LambdaKind::Constant ? "constant" : "snr_scaled"},
                   {"value", lambda_schedule.value}};
    j["reference_mode"] = reference_mode == ReferenceMode::Clean ? "clean" : "noised_at_t";
    j["sampler"] = sampler == SamplerKind::Ddpm
                       ? nlohmann::json{{"kind", "ddpm"}}
                       : nlohmann::json{{"kind", "ddim"}, {"eta", ddim_eta}};
    if (separate_steps) {
        j["separate_steps"] = {{"inner", separate_steps->inner}, {"every", separate_steps->every}};
    }
    j["kernel"] = kernel.to_json();
    j["batch_size"] = batch_size;
    return j;
}

GuidanceConfig GuidanceConfig::from_json(const nlohmann::json& j) {
    GuidanceConfig cfg;
    if (j.contains("lambda")) {
        const auto& l = j.at("lambda");
        const std::string kind = l.value("kind", "constant");
        if (kind == "constant") {
            cfg.lambda_schedule.kind = LambdaKind::Constant;
        } else if (kind == "snr_scaled") {
            cfg.lambda_schedule.kind = LambdaKind::SnrScaled;
        } else {
            throw std::invalid_argument("unknown lambda schedule kind: " + kind);
        }
        cfg.lambda_schedule.value = l.at("value").get<double>();
        if (cfg.lambda_schedule.value < 0.0) throw std::invalid_argument("guidance scale must be >= 0");
    }
    const std::string ref = j.value("reference_mode", "clean");
    if (ref == "clean") {
        cfg.reference_mode = ReferenceMode::Clean;
    } else if (ref == "noised_at_t") {
        cfg.reference_mode = ReferenceMode::NoisedAtT;
    } else {
        throw std::invalid_argument("unknown reference mode: " + ref);
    }
    if (j.contains("sampler")) {
        const auto& s = j.at("sampler");
        const std::string kind = s.value("kind", "ddpm");
        if (kind == "ddpm") {
            cfg.sampler = SamplerKind::Ddpm;
        } else if (kind == "ddim") {
            cfg.sampler = SamplerKind::Ddim;
            cfg.ddim_eta = s.value("eta", 0.0);
            if (cfg.ddim_eta < 0.0 || cfg.ddim_eta > 1.0) {
                throw std::invalid_argument("ddim eta must be in [0, 1]");
            }
        } else {
            throw std::invalid_argument("unknown sampler kind: " + kind);
        }
    }
    if (j.contains("separate_steps")) {
        SeparateSteps sep;
        sep.inner = j.at("separate_steps").at("inner").get<int>();
        sep.every = j.at("separate_steps").at("every").get<int>();
        if (sep.inner < 0 || sep.every < 1) throw std::invalid_argument("invalid separate_steps");
        cfg.separate_steps = sep;
    }
    if (j.contains("kernel")) cfg.kernel = KernelSpec::from_json(j.at("kernel"));
    cfg.batch_size = j.value("batch_size", 8);
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    return cfg;
}

Eigen::VectorXd forward_noising(const Eigen::VectorXd& z0, int t, const NoiseSchedule& sched,
                                const Eigen::VectorXd& eps) {
    if (t == 0) return z0;
    const double abar = sched.abar(t);
    return std::sqrt(abar) * z0 + std::sqrt(1.0 - abar) * eps;
}

Eigen::VectorXd ddpm_step(const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& eps_hat,
                          const NoiseSchedule& sched, const Eigen::VectorXd& eta_noise) {
    const double alpha = sched.alpha(t);
    const double abar = sched.abar(t);
    const double sigma = std::sqrt(sched.posterior_var(t));
    return (z_t - (1.0 - alpha) / std::sqrt(1.0 - abar) * eps_hat) / std::sqrt(alpha) +
           sigma * eta_noise;
}

Eigen::VectorXd ddim_step(const Eigen::VectorXd& z_t, int t, const Eigen::VectorXd& eps_hat,
                          const NoiseSchedule& sched, double eta, const Eigen::VectorXd& noise) {
    if (eta < 0.0 || eta > 1.0) throw std::invalid_argument("ddim eta must be in [0, 1]");
    const double abar = sched.abar(t);
    const double abar_prev = sched.abar(t - 1);
    const double sigma = eta * std::sqrt(sched.posterior_var(t));
    const Eigen::VectorXd z0_hat = (z_t - std::sqrt(1.0 - abar) * eps_hat) / std::sqrt(abar);
    const double dir = std::sqrt(std::max(0.0, 1.0 - abar_prev - sigma * sigma));
    return std::sqrt(abar_prev) * z0_hat + dir * eps_hat + sigma * noise;
}

Eigen::VectorXd cfg_eps(const Eigen::VectorXd& eps_uncond, const Eigen::VectorXd& eps_cond,
                        double w) {
    return (1.0 - w) * eps_uncond + w * eps_cond;
}

Batch guided_sample(const EpsOracle& denoiser, const ReferenceSet& Q, int B,
                    const NoiseSchedule& sched, const GuidanceConfig& cfg, std::uint64_t seed,
                    Trajectory* trajectory) {
    check_guidance_inputs(Q, B, cfg);
    const Eigen::Index d = Q.dim();
    Eigen::MatrixXd Z = init_batch(B, d, seed);

    for (int t = sched.T(); t >= 1; --t) {
        Eigen::MatrixXd Zhat(B, d);
        for (int i = 0; i < B; ++i) {
            const Eigen::VectorXd eps_hat = denoiser(Z.row(i), t);
            Zhat.row(i) = sampler_step(cfg, Z.row(i), t, eps_hat, sched, seed, i);
        }
        const double lambda_t = cfg.lambda_schedule.at(sched.abar(t));
        if (lambda_t > 0.0) {
            const ReferenceSet refs = references_at(Q, t, sched, cfg, seed);
            const Batch snapshot(cfg.grad_at_post_step ? Zhat : Z);
            const Eigen::MatrixXd g = mmd2_grad(snapshot, refs, cfg.kernel);
            record_trajectory(trajectory, t, snapshot, refs, cfg, g);
            Z = Zhat - lambda_t * g;
        } else {
            Z = Zhat;
        }
    }
    return Batch(std::move(Z));
}

Batch prompt_guided_sample(const CondEpsOracle& denoiser, const ReferenceSet& Q,
                           const Eigen::MatrixXd& prompts, const NoiseSchedule& sched,
                           const GuidanceConfig& cfg, std::uint64_t seed, Trajectory* trajectory) {
    check_guidance_inputs(Q, static_cast<int>(prompts.rows()), cfg);
    if (cfg.kernel.kind != KernelKind::Product) {
        throw std::invalid_argument("prompt-guided sampling requires a product kernel");
    }
    if (!Q.prompts) throw std::invalid_argument("reference set must carry prompts");
    const int B = static_cast<int>(prompts.rows());
    const Eigen::Index d = Q.dim();
    Eigen::MatrixXd Z = init_batch(B, d, seed);

    // prompt weights against the references are fixed across timesteps
    Batch probe(Eigen::MatrixXd::Zero(B, d), prompts);
    const Eigen::MatrixXd K_ref = prompt_weight_matrix(probe, Q, cfg.kernel);

    for (int t = sched.T(); t >= 1; --t) {
        Eigen::MatrixXd Zhat(B, d);
        for (int i = 0; i < B; ++i) {
            const Eigen::VectorXd eps_hat = denoiser(Z.row(i), t, prompts.row(i));
            Zhat.row(i) = sampler_step(cfg, Z.row(i), t, eps_hat, sched, seed, i);
        }
        const double lambda_t = cfg.lambda_schedule.at(sched.abar(t));
        if (lambda_t > 0.0) {
            const ReferenceSet refs = references_at(Q, t, sched, cfg, seed);
            const Batch snapshot(cfg.grad_at_post_step ? Zhat : Z, prompts);
            const Eigen::MatrixXd g = mmd2_product_grad(snapshot, refs, cfg.kernel, K_ref);
            record_trajectory(trajectory, t, snapshot, refs, cfg, g);
            Z = Zhat - lambda_t * g;
        } else {
            Z = Zhat;
        }
    }
    return Batch(std::move(Z), prompts);
}

Batch guided_sample_separate(const EpsOracle& denoiser, const ReferenceSet& Q, int B,
                             const NoiseSchedule& sched, const GuidanceConfig& cfg, int inner,
                             int every, std::uint64_t seed, Trajectory* trajectory) {
    check_guidance_inputs(Q, B, cfg);
    if (inner < 0 || every < 1) throw std::invalid_argument("invalid separate-steps parameters");
    const Eigen::Index d = Q.dim();
    Eigen::MatrixXd Z = init_batch(B, d, seed);

    for (int t = sched.T(); t >= 1; --t) {
        for (int i = 0; i < B; ++i) {
            const Eigen::VectorXd eps_hat = denoiser(Z.row(i), t);
            Z.row(i) = sampler_step(cfg, Z.row(i), t, eps_hat, sched, seed, i).transpose();
        }
        const double lambda_t = cfg.lambda_schedule.at(sched.abar(t));
        if ((sched.T() - t + 1) % every == 0 && lambda_t > 0.0) {
            for (int step = 0; step < inner; ++step) {
                const ReferenceSet refs = references_at(Q, t, sched, cfg, seed);
                const Batch snapshot(Z);
                const Eigen::MatrixXd g = mmd2_grad(snapshot, refs, cfg.kernel);
                record_trajectory(trajectory, t, snapshot, refs, cfg, g);
                Z -= lambda_t * g;
            }
        }
    }
    return Batch(std::move(Z));
}

}  // namespace mmdg
