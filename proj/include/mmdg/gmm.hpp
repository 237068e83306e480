#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "json.hpp"
#include "mmdg/batch.hpp"

namespace mmdg {

// Isotropic Gaussian mixture. Serves both as data generator and as the exact
// score oracle for the noised marginal.
struct GmmSpec {
    Eigen::VectorXd weights;    // simplex, length K
    Eigen::MatrixXd means;      // K x d
    Eigen::VectorXd variances;  // K positive reals

    Eigen::Index components() const { return weights.size(); }
    Eigen::Index dim() const { return means.cols(); }

    void validate() const;

    nlohmann::json to_json() const;
    static GmmSpec from_json(const nlohmann::json& j);

    // 8 components on a ring in the first two coordinates, zero elsewhere.
    static GmmSpec ring(int K, double radius, double variance, int dim);
    // side x side grid in the first two coordinates.
    static GmmSpec grid(int side, double spacing, double variance, int dim);
};

// Prompt-conditioned mixture: one prompt embedding per component.
struct PromptedGmm {
    GmmSpec base;
    Eigen::MatrixXd prompt_of_component;  // K x d_p

    void validate() const;
    nlohmann::json to_json() const;
    static PromptedGmm from_json(const nlohmann::json& j);
};

// i.i.d. draws: component ~ weights, then N(mean_k, var_k I).
Batch sample_gmm(const GmmSpec& spec, int n, std::mt19937_64& rng);

// Forward-process marginal at signal level abar: means scaled by sqrt(abar),
// variances mapped to abar*var + (1 - abar).
GmmSpec noised_spec(const GmmSpec& spec, double abar);

// Log density of the noised marginal at z.
double log_density(const GmmSpec& spec, const Eigen::VectorXd& z, double abar);

// Exact score grad_z log p_abar(z), responsibilities via log-sum-exp.
Eigen::VectorXd score(const GmmSpec& spec, const Eigen::VectorXd& z, double abar);

// Noise prediction: -sqrt(1 - abar) * score. Throws for abar == 1.
Eigen::VectorXd eps_pred(const GmmSpec& spec, const Eigen::VectorXd& z, double abar);

// eps_pred restricted to a component subset with renormalized weights.
// The full set is routed to eps_pred unchanged.
Eigen::VectorXd conditional_eps_pred(const GmmSpec& spec, const Eigen::VectorXd& z, double abar,
                                     const std::vector<int>& components);

// Standard Gamma-ratio Dirichlet draw.
Eigen::VectorXd dirichlet_weights(const Eigen::VectorXd& alpha, std::mt19937_64& rng);

// Argmax-responsibility component per sample; ties break to the lowest index.
std::vector<int> assign_components(const Batch& batch, const GmmSpec& spec);

// Sub-mixture restricted to the given components, weights renormalized.
GmmSpec restrict_components(const GmmSpec& spec, const std::vector<int>& components);

}  // namespace mmdg
