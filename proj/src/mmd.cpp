#include "mmdg/mmd.hpp"

#include <stdexcept>

namespace mmdg {

namespace {

void require_nonempty(const Batch& P, const ReferenceSet& Q) {
    if (P.size() < 1) throw std::invalid_argument("empty batch");
    if (Q.size() < 1) throw std::invalid_argument("empty reference set");
    if (P.dim() != Q.dim()) {
        throw std::invalid_argument("batch/reference dimension mismatch");
    }
}

void require_product_inputs(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    if (k.kind != KernelKind::Product) {
        throw std::invalid_argument("product kernel required");
    }
    if (!P.prompts || !Q.prompts) {
        throw std::invalid_argument("both batch and reference set must carry prompts");
    }
}

double self_term_value(const ReferenceSet& Q, const KernelSpec& k) {
    const Eigen::Index m = Q.size();
    double acc = 0.0;
    if (k.kind == KernelKind::Product) {
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index j2 = 0; j2 < m; ++j2) {
                acc += prompt_kernel_eval(*k.prompt, Q.prompts->row(j), Q.prompts->row(j2)) *
                       kernel_eval(*k.latent, Q.data.row(j), Q.data.row(j2));
            }
        }
    } else {
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index j2 = 0; j2 < m; ++j2) {
                acc += kernel_eval(k, Q.data.row(j), Q.data.row(j2));
            }
        }
    }
    return acc / (static_cast<double>(m) * static_cast<double>(m));
}

}  // namespace

double bind_self_term(const ReferenceSet& Q, const KernelSpec& k) {
    Q.self_term = self_term_value(Q, k);
    return *Q.self_term;
}

double mmd2_biased(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    require_nonempty(P, Q);
    if (!k.is_latent()) throw std::invalid_argument("mmd2_biased requires a latent-type kernel");
    const Eigen::Index B = P.size();
    const Eigen::Index m = Q.size();

    double intra = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index i2 = 0; i2 < B; ++i2) {
            intra += kernel_eval(k, P.data.row(i), P.data.row(i2));
        }
    }
    intra /= static_cast<double>(B) * static_cast<double>(B);

    double self = Q.self_term ? *Q.self_term : self_term_value(Q, k);

    double cross = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            cross += kernel_eval(k, P.data.row(i), Q.data.row(j));
        }
    }
    cross *= 2.0 / (static_cast<double>(B) * static_cast<double>(m));

    return intra + self - cross;
}

double mmd2_unbiased(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    if (P.size() < 2 || Q.size() < 2) {
        throw std::invalid_argument("mmd2_unbiased requires at least two samples per side");
    }
    if (P.dim() != Q.dim()) throw std::invalid_argument("batch/reference dimension mismatch");
    const Eigen::Index B = P.size();
    const Eigen::Index m = Q.size();

    double intra = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index i2 = 0; i2 < B; ++i2) {
            if (i == i2) continue;
            intra += kernel_eval(k, P.data.row(i), P.data.row(i2));
        }
    }
    intra /= static_cast<double>(B) * static_cast<double>(B - 1);

    double self = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index j2 = 0; j2 < m; ++j2) {
            if (j == j2) continue;
            self += kernel_eval(k, Q.data.row(j), Q.data.row(j2));
        }
    }
    self /= static_cast<double>(m) * static_cast<double>(m - 1);

    double cross = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            cross += kernel_eval(k, P.data.row(i), Q.data.row(j));
        }
    }
    cross *= 2.0 / (static_cast<double>(B) * static_cast<double>(m));

    return intra + self - cross;
}

Eigen::MatrixXd mmd2_grad(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    require_nonempty(P, Q);
    if (!k.is_latent()) throw std::invalid_argument("mmd2_grad requires a latent-type kernel");
    const Eigen::Index B = P.size();
    const Eigen::Index m = Q.size();
    const double intra_w = 2.0 / (static_cast<double>(B) * static_cast<double>(B));
    const double cross_w = 2.0 / (static_cast<double>(B) * static_cast<double>(m));

    Eigen::MatrixXd grad(B, P.dim());
    for (Eigen::Index i = 0; i < B; ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(P.dim());
        for (Eigen::Index j = 0; j < B; ++j) {
            row += kernel_grad_x(k, P.data.row(i), P.data.row(j));
        }
        row *= intra_w;
        Eigen::VectorXd cross = Eigen::VectorXd::Zero(P.dim());
        for (Eigen::Index j = 0; j < m; ++j) {
            cross += kernel_grad_x(k, P.data.row(i), Q.data.row(j));
        }
        grad.row(i) = row - cross_w * cross;
    }
    return grad;
}

Eigen::VectorXd cross_term_grad(const Eigen::VectorXd& z0, const ReferenceSet& Q,
                                const KernelSpec& k) {
    if (k.kind != KernelKind::Rbf) {
        throw std::invalid_argument("cross_term_grad requires the rbf kernel");
    }
    if (Q.size() < 1) throw std::invalid_argument("empty reference set");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(z0.size());
    for (Eigen::Index j = 0; j < Q.size(); ++j) {
        acc += kernel_grad_x(k, z0, Q.data.row(j));
    }
    return -2.0 / static_cast<double>(Q.size()) * acc;
}

double mmd2_product(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    require_nonempty(P, Q);
    require_product_inputs(P, Q, k);
    const Eigen::Index B = P.size();
    const Eigen::Index m = Q.size();

    double intra = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index i2 = 0; i2 < B; ++i2) {
            intra += prompt_kernel_eval(*k.prompt, P.prompts->row(i), P.prompts->row(i2)) *
                     kernel_eval(*k.latent, P.data.row(i), P.data.row(i2));
        }
    }
    intra /= static_cast<double>(B) * static_cast<double>(B);

    double self = Q.self_term ? *Q.self_term : self_term_value(Q, k);

    double cross = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            cross += prompt_kernel_eval(*k.prompt, P.prompts->row(i), Q.prompts->row(j)) *
                     kernel_eval(*k.latent, P.data.row(i), Q.data.row(j));
        }
    }
    cross *= 2.0 / (static_cast<double>(B) * static_cast<double>(m));

    return intra + self - cross;
}

Eigen::MatrixXd prompt_weight_matrix(const Batch& P, const ReferenceSet& Q, const KernelSpec& k) {
    require_product_inputs(P, Q, k);
    Eigen::MatrixXd K(P.size(), Q.size());
    for (Eigen::Index i = 0; i < P.size(); ++i) {
        for (Eigen::Index j = 0; j < Q.size(); ++j) {
            K(i, j) = prompt_kernel_eval(*k.prompt, P.prompts->row(i), Q.prompts->row(j));
        }
    }
    return K;
}

Eigen::MatrixXd mmd2_product_grad(const Batch& P, const ReferenceSet& Q, const KernelSpec& k,
                                  const Eigen::MatrixXd& K_ref) {
    require_nonempty(P, Q);
    if (k.kind != KernelKind::Product) throw std::invalid_argument("product kernel required");
    if (!P.prompts) throw std::invalid_argument("batch must carry prompts");
    if (K_ref.rows() != P.size() || K_ref.cols() != Q.size()) {
        throw std::invalid_argument("K_ref shape mismatch");
    }
    const Eigen::Index B = P.size();
    const Eigen::Index m = Q.size();
    const KernelSpec& kz = *k.latent;
    const double intra_w = 2.0 / (static_cast<double>(B) * static_cast<double>(B));
    const double cross_w = 2.0 / (static_cast<double>(B) * static_cast<double>(m));

    Eigen::MatrixXd grad(B, P.dim());
    for (Eigen::Index i = 0; i < B; ++i) {
        Eigen::VectorXd row = Eigen::VectorXd::Zero(P.dim());
        for (Eigen::Index j = 0; j < B; ++j) {
            double w = prompt_kernel_eval(*k.prompt, P.prompts->row(i), P.prompts->row(j));
            row += w * kernel_grad_x(kz, P.data.row(i), P.data.row(j));
        }
        row *= intra_w;
        Eigen::VectorXd cross = Eigen::VectorXd::Zero(P.dim());
        for (Eigen::Index j = 0; j < m; ++j) {
            cross += K_ref(i, j) * kernel_grad_x(kz, P.data.row(i), Q.data.row(j));
        }
        grad.row(i) = row - cross_w * cross;
    }
    return grad;
}

}  // namespace mmdg
