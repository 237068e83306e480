#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "json.hpp"

namespace mmdg {

enum class KernelKind { Rbf, Polynomial, PromptDelta, PromptRbf, Product };

// Tagged kernel description. Latent kernels (rbf, polynomial) act on sample
// vectors; prompt kernels (prompt_delta, prompt_rbf) act on prompt embeddings;
// product nests exactly one of each.
struct KernelSpec {
    KernelKind kind = KernelKind::Rbf;
    double sigma = 1.0;   // rbf / prompt_rbf bandwidth
    int degree = 3;       // polynomial degree r
    double offset = 1.0;  // polynomial offset c
    double scale = 1.0;   // polynomial scale gamma
    std::shared_ptr<KernelSpec> prompt;  // product only
    std::shared_ptr<KernelSpec> latent;  // product only

    static KernelSpec rbf(double sigma);
    static KernelSpec polynomial(int degree, double offset, double scale);
    static KernelSpec prompt_delta();
    static KernelSpec prompt_rbf(double sigma);
    static KernelSpec product(KernelSpec prompt_kernel, KernelSpec latent_kernel);

    bool is_latent() const { return kind == KernelKind::Rbf || kind == KernelKind::Polynomial; }
    bool is_prompt() const { return kind == KernelKind::PromptDelta || kind == KernelKind::PromptRbf; }

    // Throws std::invalid_argument on parameter or nesting violations.
    void validate() const;

    nlohmann::json to_json() const;
    static KernelSpec from_json(const nlohmann::json& j);
};

// k(x, y) for a latent-type kernel.
double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Gradient of k(x, y) with respect to x.
Eigen::VectorXd kernel_grad_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y);

// k_p(p, p') for a prompt-type kernel; result in [0, 1].
double prompt_kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q);

// sup ||grad_x k|| for the rbf kernel: 1/(sigma*sqrt(e)). Other variants throw.
double lipschitz_L(const KernelSpec& spec);

// Upper bound on the Lipschitz constant of grad_x k for rbf: 2/(sigma^2*sqrt(e)).
double lipschitz_Lprime(const KernelSpec& spec);

}  // namespace mmdg
