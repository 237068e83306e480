#include "mmdg/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mmdg {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// log w_k + log N(z; mu_k, v_k I) for every component.
Eigen::VectorXd component_log_joint(const GmmSpec& spec, const Eigen::VectorXd& z) {
    const Eigen::Index K = spec.components();
    const double d = static_cast<double>(spec.dim());
    Eigen::VectorXd lj(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double v = spec.variances[k];
        const double sq = (z - spec.means.row(k).transpose()).squaredNorm();
        const double logw = spec.weights[k] > 0.0
                                ? std::log(spec.weights[k])
                                : -std::numeric_limits<double>::infinity();
        lj[k] = logw - 0.5 * d * (kLog2Pi + std::log(v)) - 0.5 * sq / v;
    }
    return lj;
}

double log_sum_exp(const Eigen::VectorXd& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

void GmmSpec::validate() const {
    const Eigen::Index K = components();
    if (K < 1) throw std::invalid_argument("mixture needs at least one component");
    if (means.rows() != K || variances.size() != K) {
        throw std::invalid_argument("weights/means/variances length mismatch");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12) {
        throw std::invalid_argument("mixture weights must sum to 1");
    }
    if ((weights.array() < 0.0).any()) throw std::invalid_argument("mixture weights must be >= 0");
    if ((variances.array() <= 0.0).any()) throw std::invalid_argument("variances must be positive");
}

nlohmann::json GmmSpec::to_json() const {
    nlohmann::json j;
    j["weights"] = std::vector<double>(weights.data(), weights.data() + weights.size());
    nlohmann::json means_j = nlohmann::json::array();
    for (Eigen::Index k = 0; k < means.rows(); ++k) {
        const Eigen::RowVectorXd r = means.row(k);  // contiguous copy of the row
        means_j.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    }
    j["means"] = means_j;
    j["variances"] = std::vector<double>(variances.data(), variances.data() + variances.size());
    return j;
}

GmmSpec GmmSpec::from_json(const nlohmann::json& j) {
    GmmSpec spec;
    auto w = j.at("weights").get<std::vector<double>>();
    auto v = j.at("variances").get<std::vector<double>>();
    auto m = j.at("means").get<std::vector<std::vector<double>>>();
    const auto K = static_cast<Eigen::Index>(w.size());
    if (m.empty()) throw std::invalid_argument("means must be nonempty");
    const auto d = static_cast<Eigen::Index>(m[0].size());
    spec.weights = Eigen::Map<Eigen::VectorXd>(w.data(), K);
    spec.variances = Eigen::Map<Eigen::VectorXd>(v.data(), K);
    spec.means.resize(K, d);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (static_cast<Eigen::Index>(m[k].size()) != d) {
            throw std::invalid_argument("mean rows have inconsistent dimensions");
        }
        spec.means.row(k) = Eigen::Map<Eigen::VectorXd>(m[k].data(), d);
    }
    spec.validate();
    return spec;
}

GmmSpec GmmSpec::ring(int K, double radius, double variance, int dim) {
    if (dim < 2) throw std::invalid_argument("ring world needs dim >= 2");
    GmmSpec spec;
    spec.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
    spec.variances = Eigen::VectorXd::Constant(K, variance);
    spec.means = Eigen::MatrixXd::Zero(K, dim);
    for (int k = 0; k < K; ++k) {
        const double a = 2.0 * std::numbers::pi * k / K;
        spec.means(k, 0) = radius * std::cos(a);
        spec.means(k, 1) = radius * std::sin(a);
    }
    spec.validate();
    return spec;
}

GmmSpec GmmSpec::grid(int side, double spacing, double variance, int dim) {
    if (dim < 2) throw std::invalid_argument("grid world needs dim >= 2");
    const int K = side * side;
    GmmSpec spec;
    spec.weights = Eigen::VectorXd::Constant(K, 1.0 / K);
    spec.variances = Eigen::VectorXd::Constant(K, variance);
    spec.means = Eigen::MatrixXd::Zero(K, dim);
    const double off = 0.5 * spacing * (side - 1);
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            spec.means(i * side + j, 0) = spacing * i - off;
            spec.means(i * side + j, 1) = spacing * j - off;
        }
    }
    spec.validate();
    return spec;
}

void PromptedGmm::validate() const {
    base.validate();
    if (prompt_of_component.rows() != base.components()) {
        throw std::invalid_argument("every component needs exactly one prompt embedding");
    }
}

nlohmann::json PromptedGmm::to_json() const {
    nlohmann::json j = base.to_json();
    nlohmann::json p = nlohmann::json::array();
    for (Eigen::Index k = 0; k < prompt_of_component.rows(); ++k) {
        const Eigen::RowVectorXd r = prompt_of_component.row(k);
        p.push_back(std::vector<double>(r.data(), r.data() + r.size()));
    }
    j["prompts"] = p;
    return j;
}

PromptedGmm PromptedGmm::from_json(const nlohmann::json& j) {
    PromptedGmm pg;
    pg.base = GmmSpec::from_json(j);
    auto p = j.at("prompts").get<std::vector<std::vector<double>>>();
    if (p.empty()) throw std::invalid_argument("prompts must be nonempty");
    const auto dp = static_cast<Eigen::Index>(p[0].size());
    pg.prompt_of_component.resize(static_cast<Eigen::Index>(p.size()), dp);
    for (Eigen::Index k = 0; k < pg.prompt_of_component.rows(); ++k) {
        pg.prompt_of_component.row(k) = Eigen::Map<Eigen::VectorXd>(p[k].data(), dp);
    }
    pg.validate();
    return pg;
}

Batch sample_gmm(const GmmSpec& spec, int n, std::mt19937_64& rng) {
    spec.validate();
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    std::discrete_distribution<int> comp(spec.weights.data(), spec.weights.data() + spec.weights.size());
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd out(n, spec.dim());
    for (int i = 0; i < n; ++i) {
        const int k = comp(rng);
        const double sd = std::sqrt(spec.variances[k]);
        for (Eigen::Index c = 0; c < spec.dim(); ++c) {
            out(i, c) = spec.means(k, c) + sd * gauss(rng);
        }
    }
    return Batch(std::move(out));
}

GmmSpec noised_spec(const GmmSpec& spec, double abar) {
    if (!(abar > 0.0) || abar > 1.0) throw std::invalid_argument("abar must be in (0, 1]");
    GmmSpec out;
    out.weights = spec.weights;
    out.means = std::sqrt(abar) * spec.means;
    out.variances = (abar * spec.variances.array() + (1.0 - abar)).matrix();
    return out;
}

double log_density(const GmmSpec& spec, const Eigen::VectorXd& z, double abar) {
    const GmmSpec noised = noised_spec(spec, abar);
    return log_sum_exp(component_log_joint(noised, z));
}

Eigen::VectorXd score(const GmmSpec& spec, const Eigen::VectorXd& z, double abar) {
    const GmmSpec noised = noised_spec(spec, abar);
    const Eigen::VectorXd lj = component_log_joint(noised, z);
    const double lse = log_sum_exp(lj);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(z.size());
    for (Eigen::Index k = 0; k < noised.components(); ++k) {
        const double r = std::exp(lj[k] - lse);
        s += r / noised.variances[k] * (noised.means.row(k).transpose() - z);
    }
    return s;
}

Eigen::VectorXd eps_pred(const GmmSpec& spec, const Eigen::VectorXd& z, double abar) {
    if (abar >= 1.0) throw std::invalid_argument("eps_pred is degenerate at abar = 1");
    return -std::sqrt(1.0 - abar) * score(spec, z, abar);
}

GmmSpec restrict_components(const GmmSpec& spec, const std::vector<int>& components) {
    if (components.empty()) throw std::invalid_argument("component set must be nonempty");
    GmmSpec sub;
    const auto n = static_cast<Eigen::Index>(components.size());
    sub.weights.resize(n);
    sub.variances.resize(n);
    sub.means.resize(n, spec.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = components[static_cast<size_t>(i)];
        if (k < 0 || k >= spec.components()) throw std::invalid_argument("component index out of range");
        sub.weights[i] = spec.weights[k];
        sub.variances[i] = spec.variances[k];
        sub.means.row(i) = spec.means.row(k);
    }
    const double total = sub.weights.sum();
    if (total <= 0.0) throw std::invalid_argument("restricted components carry zero weight");
    sub.weights /= total;
    return sub;
}

Eigen::VectorXd conditional_eps_pred(const GmmSpec& spec, const Eigen::VectorXd& z, double abar,
                                     const std::vector<int>& components) {
    if (components.empty()) throw std::invalid_argument("component set must be nonempty");
    if (static_cast<Eigen::Index>(components.size()) == spec.components()) {
        std::vector<int> sorted = components;
        std::sort(sorted.begin(), sorted.end());
        bool full = true;
        for (Eigen::Index k = 0; k < spec.components(); ++k) {
            if (sorted[static_cast<size_t>(k)] != k) { full = false; break; }
        }
        if (full) return eps_pred(spec, z, abar);
    }
    return eps_pred(restrict_components(spec, components), z, abar);
}

Eigen::VectorXd dirichlet_weights(const Eigen::VectorXd& alpha, std::mt19937_64& rng) {
    if ((alpha.array() <= 0.0).any()) throw std::invalid_argument("Dirichlet alpha must be positive");
    Eigen::VectorXd w(alpha.size());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        std::gamma_distribution<double> gamma(alpha[i], 1.0);
        w[i] = gamma(rng);
    }
    const double total = w.sum();
    if (total <= 0.0) return Eigen::VectorXd::Constant(alpha.size(), 1.0 / alpha.size());
    return w / total;
}

std::vector<int> assign_components(const Batch& batch, const GmmSpec& spec) {
    std::vector<int> out(static_cast<size_t>(batch.size()));
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const Eigen::VectorXd lj = component_log_joint(spec, batch.data.row(i));
        int best = 0;
        for (Eigen::Index k = 1; k < lj.size(); ++k) {
            if (lj[k] > lj[best]) best = static_cast<int>(k);
        }
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

}  // namespace mmdg
