#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>

namespace mmdg {

// A batch of latent samples, one per row, with optional per-sample prompt
// embeddings (also one per row).
struct Batch {
    Eigen::MatrixXd data;
    std::optional<Eigen::MatrixXd> prompts;

    Batch() = default;
    explicit Batch(Eigen::MatrixXd d) : data(std::move(d)) {}
    Batch(Eigen::MatrixXd d, Eigen::MatrixXd p) : data(std::move(d)), prompts(std::move(p)) {
        if (prompts->rows() != data.rows()) {
            throw std::invalid_argument("prompt count does not match sample count");
        }
    }

    Eigen::Index size() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }
};

struct KernelSpec;

// Reference samples defining the guidance target. The self term
// (1/m^2) sum_{j,j'} k(z_j, z_j') is a constant per experiment; it is cached
// lazily by mmd2_* against the kernel it was computed with.
struct ReferenceSet {
    Eigen::MatrixXd data;
    std::optional<Eigen::MatrixXd> prompts;

    ReferenceSet() = default;
    explicit ReferenceSet(Eigen::MatrixXd d) : data(std::move(d)) {}
    ReferenceSet(Eigen::MatrixXd d, Eigen::MatrixXd p)
        : data(std::move(d)), prompts(std::move(p)) {
        if (prompts->rows() != data.rows()) {
            throw std::invalid_argument("prompt count does not match reference count");
        }
    }

    Eigen::Index size() const { return data.rows(); }
    Eigen::Index dim() const { return data.cols(); }

    Batch as_batch() const {
        return prompts ? Batch(data, *prompts) : Batch(data);
    }

    // cached self term; mutable state managed by the mmd module
    mutable std::optional<double> self_term;
};

}  // namespace mmdg
