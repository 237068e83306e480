#include "mmdg/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace mmdg {

namespace {

void check_dims(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("kernel arguments have mismatched dimensions: " +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
}

}  // namespace

KernelSpec KernelSpec::rbf(double sigma) {
    KernelSpec s;
    s.kind = KernelKind::Rbf;
    s.sigma = sigma;
    s.validate();
    return s;
}

KernelSpec KernelSpec::polynomial(int degree, double offset, double scale) {
    KernelSpec s;
    s.kind = KernelKind::Polynomial;
    s.degree = degree;
    s.offset = offset;
    s.scale = scale;
    s.validate();
    return s;
}

KernelSpec KernelSpec::prompt_delta() {
    KernelSpec s;
    s.kind = KernelKind::PromptDelta;
    return s;
}

KernelSpec KernelSpec::prompt_rbf(double sigma) {
    KernelSpec s;
    s.kind = KernelKind::PromptRbf;
    s.sigma = sigma;
    s.validate();
    return s;
}

KernelSpec KernelSpec::product(KernelSpec prompt_kernel, KernelSpec latent_kernel) {
    KernelSpec s;
    s.kind = KernelKind::Product;
    s.prompt = std::make_shared<KernelSpec>(std::move(prompt_kernel));
    s.latent = std::make_shared<KernelSpec>(std::move(latent_kernel));
    s.validate();
    return s;
}

void KernelSpec::validate() const {
    switch (kind) {
        case KernelKind::Rbf:
        case KernelKind::PromptRbf:
            if (!(sigma > 0.0)) throw std::invalid_argument("rbf bandwidth must be positive");
            break;
        case KernelKind::Polynomial:
            if (degree < 1) throw std::invalid_argument("polynomial degree must be >= 1");
            if (offset < 0.0) throw std::invalid_argument("polynomial offset must be >= 0");
            if (!(scale > 0.0)) throw std::invalid_argument("polynomial scale must be positive");
            break;
        case KernelKind::PromptDelta:
            break;
        case KernelKind::Product:
            if (!prompt || !latent) throw std::invalid_argument("product kernel needs both factors");
            if (!prompt->is_prompt()) throw std::invalid_argument("product prompt factor must be a prompt kernel");
            if (!latent->is_latent()) throw std::invalid_argument("product latent factor must be a latent kernel");
            prompt->validate();
            latent->validate();
            break;
    }
}

nlohmann::json KernelSpec::to_json() const {
    switch (kind) {
        case KernelKind::Rbf:
            return {{"kind", "rbf"}, {"sigma", sigma}};
        case KernelKind::Polynomial:
            return {{"kind", "polynomial"}, {"degree", degree}, {"offset", offset}, {"scale", scale}};
        case KernelKind::PromptDelta:
            return {{"kind", "prompt_delta"}};
        case KernelKind::PromptRbf:
            return {{"kind", "prompt_rbf"}, {"sigma", sigma}};
        case KernelKind::Product:
            return {{"kind", "product"}, {"prompt", prompt->to_json()}, {"latent", latent->to_json()}};
    }
    throw std::logic_error("unreachable");
}

KernelSpec KernelSpec::from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "rbf") return rbf(j.at("sigma").get<double>());
    if (kind == "polynomial") {
        return polynomial(j.at("degree").get<int>(), j.value("offset", 1.0), j.value("scale", 1.0));
    }
    if (kind == "prompt_delta") return prompt_delta();
    if (kind == "prompt_rbf") return prompt_rbf(j.at("sigma").get<double>());
    if (kind == "product") {
        return product(from_json(j.at("prompt")), from_json(j.at("latent")));
    }
    throw std::invalid_argument("unknown kernel kind: " + kind);
}

double kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_dims(x, y);
    switch (spec.kind) {
        case KernelKind::Rbf:
            return std::exp(-(x - y).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
        case KernelKind::Polynomial:
            return std::pow(spec.offset + spec.scale * x.dot(y), spec.degree);
        default:
            throw std::invalid_argument("kernel_eval requires a latent-type kernel");
    }
}

Eigen::VectorXd kernel_grad_x(const KernelSpec& spec, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y) {
    check_dims(x, y);
    switch (spec.kind) {
        case KernelKind::Rbf:
            return kernel_eval(spec, x, y) / (spec.sigma * spec.sigma) * (y - x);
        case KernelKind::Polynomial: {
            double base = spec.offset + spec.scale * x.dot(y);
            return spec.degree * spec.scale * std::pow(base, spec.degree - 1) * y;
        }
        default:
            throw std::invalid_argument("kernel_grad_x requires a latent-type kernel");
    }
}

double prompt_kernel_eval(const KernelSpec& spec, const Eigen::VectorXd& p,
                          const Eigen::VectorXd& q) {
    check_dims(p, q);
    switch (spec.kind) {
        case KernelKind::PromptDelta:
            return p == q ? 1.0 : 0.0;
        case KernelKind::PromptRbf:
            return std::exp(-(p - q).squaredNorm() / (2.0 * spec.sigma * spec.sigma));
        default:
            throw std::invalid_argument("prompt_kernel_eval requires a prompt-type kernel");
    }
}

double lipschitz_L(const KernelSpec& spec) {
    if (spec.kind != KernelKind::Rbf) {
        throw std::invalid_argument("lipschitz_L is only defined for the rbf kernel");
    }
    return 1.0 / (spec.sigma * std::sqrt(std::exp(1.0)));
}

double lipschitz_Lprime(const KernelSpec& spec) {
    if (spec.kind != KernelKind::Rbf) {
        throw std::invalid_argument("lipschitz_Lprime is only defined for the rbf kernel");
    }
    return 2.0 / (spec.sigma * spec.sigma * std::sqrt(std::exp(1.0)));
}

}  // namespace mmdg
