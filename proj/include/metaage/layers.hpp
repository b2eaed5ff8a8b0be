#pragma once

#include "metaage/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace metaage {

using Rng = std::mt19937_64;

/// Fills `m` with Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline void xavier_uniform(Matrix& m, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = dist(rng);
        }
    }
}

// ---------------------------------------------------------------------------
// Affine
// ---------------------------------------------------------------------------

struct AffineLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
    Matrix grad_weight;  // sized lazily by zero_grad()
    Vector grad_bias;

    AffineLayer() = default;
    AffineLayer(Eigen::Index in, Eigen::Index out)
        : weight(Matrix::Zero(out, in)), bias(Vector::Zero(out)) {}

    Eigen::Index in() const { return weight.cols(); }
    Eigen::Index out() const { return weight.rows(); }

    void zero_grad() {
        grad_weight.setZero(weight.rows(), weight.cols());
        grad_bias.setZero(bias.size());
    }

    void init(Rng& rng) {
        xavier_uniform(weight, rng);
        bias.setZero();
    }
};

/// out[b] = weight * x[b] + bias
inline Matrix affine_forward(const Matrix& x, const AffineLayer& layer) {
    require_cols(x, layer.in(), "affine_forward input");
    Matrix out = x * layer.weight.transpose();
    out.rowwise() += layer.bias.transpose();
    return out;
}

/// Accumulates parameter gradients into the layer and returns dL/dx.
inline Matrix affine_backward(const Matrix& grad_out, const Matrix& cached_x, AffineLayer& layer) {
    require_cols(cached_x, layer.in(), "affine_backward cached input");
    require_shape(grad_out, cached_x.rows(), layer.out(), "affine_backward grad_out");
    if (layer.grad_weight.rows() != layer.out() || layer.grad_weight.cols() != layer.in()) {
        layer.zero_grad();
    }
    layer.grad_weight.noalias() += grad_out.transpose() * cached_x;
    layer.grad_bias += grad_out.colwise().sum().transpose();
    return grad_out * layer.weight;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

enum class Mode { train, eval };

struct BatchNormLayer {
    Vector gamma;
    Vector beta;
    Vector running_mean;
    Vector running_var;
    Vector grad_gamma;
    Vector grad_beta;
    double momentum = 0.1;
    double epsilon = 1e-5;
    Mode mode = Mode::train;

    BatchNormLayer() = default;
    explicit BatchNormLayer(Eigen::Index width)
        : gamma(Vector::Ones(width)),
          beta(Vector::Zero(width)),
          running_mean(Vector::Zero(width)),
          running_var(Vector::Ones(width)),
          grad_gamma(Vector::Zero(width)),
          grad_beta(Vector::Zero(width)) {}

    Eigen::Index width() const { return gamma.size(); }

    void zero_grad() {
        grad_gamma.setZero(gamma.size());
        grad_beta.setZero(beta.size());
    }
};

struct BatchNormCache {
    Matrix x_hat;    // normalized input, batch x width
    Vector inv_std;  // 1 / sqrt(var + eps)

    bool empty() const { return x_hat.size() == 0; }
};

/// Running-statistics transform; never mutates the layer.
inline Matrix batchnorm_eval(const Matrix& x, const BatchNormLayer& layer) {
    require_cols(x, layer.width(), "batchnorm_eval input");
    const Vector inv_std = (layer.running_var.array() + layer.epsilon).rsqrt();
    Matrix out = (x.rowwise() - layer.running_mean.transpose()).array().rowwise() *
                 (inv_std.array() * layer.gamma.array()).transpose();
    out.rowwise() += layer.beta.transpose();
    return out;
}

/// Train mode normalizes with biased batch statistics and folds the unbiased
/// batch variance into the running estimate; eval mode uses running stats.
/// `cache` is filled in train mode when non-null.
inline Matrix batchnorm_forward(const Matrix& x, BatchNormLayer& layer, BatchNormCache* cache = nullptr) {
    require_cols(x, layer.width(), "batchnorm_forward input");
    if (layer.epsilon <= 0.0) {
        throw std::invalid_argument("batchnorm epsilon must be positive");
    }
    if (layer.mode == Mode::eval) {
        return batchnorm_eval(x, layer);
    }

    const Eigen::Index n = x.rows();
    if (n < 2) {
        throw std::invalid_argument("batchnorm_forward: train mode needs a batch of at least 2 rows, got " +
                                    std::to_string(n));
    }
    const Vector mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    const Vector var = centered.array().square().colwise().sum().transpose() / static_cast<double>(n);
    const Vector inv_std = (var.array() + layer.epsilon).rsqrt();
    Matrix x_hat = centered.array().rowwise() * inv_std.array().transpose();

    const double m = layer.momentum;
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    layer.running_mean = (1.0 - m) * layer.running_mean + m * mean;
    layer.running_var = (1.0 - m) * layer.running_var + (m * unbias) * var;

    Matrix out = x_hat.array().rowwise() * layer.gamma.array().transpose();
    out.rowwise() += layer.beta.transpose();
    if (cache != nullptr) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = inv_std;
    }
    return out;
}

/// Exact gradient of the train-mode transform; accumulates dgamma/dbeta.
inline Matrix batchnorm_backward(const Matrix& grad_out, const BatchNormCache& cache, BatchNormLayer& layer) {
    if (cache.empty()) {
        throw std::invalid_argument("batchnorm_backward: missing forward cache");
    }
    require_shape(grad_out, cache.x_hat.rows(), cache.x_hat.cols(), "batchnorm_backward grad_out");
    const double n = static_cast<double>(grad_out.rows());

    layer.grad_beta += grad_out.colwise().sum().transpose();
    const RowVector dot = (grad_out.array() * cache.x_hat.array()).colwise().sum();
    layer.grad_gamma += dot.transpose();

    // dx = gamma * inv_std / n * (n * dy - sum(dy) - x_hat * sum(dy * x_hat))
    const RowVector sum_dy = grad_out.colwise().sum();
    Matrix dx = (grad_out * n).rowwise() - sum_dy;
    dx.array() -= cache.x_hat.array().rowwise() * dot.array();
    const RowVector scale = (layer.gamma.array() * cache.inv_std.array() / n).transpose();
    dx.array().rowwise() *= scale.array();
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

inline Matrix relu_forward(const Matrix& x) { return x.cwiseMax(0.0); }

/// Subgradient at exactly 0 is 0.
inline Matrix relu_backward(const Matrix& grad_out, const Matrix& cached_x) {
    require_shape(grad_out, cached_x.rows(), cached_x.cols(), "relu_backward grad_out");
    return (cached_x.array() > 0.0).select(grad_out, 0.0);
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

inline Vector softmax(const Vector& scores) {
    if (scores.size() == 0) {
        throw std::invalid_argument("softmax of empty vector");
    }
    if (!scores.allFinite()) {
        throw std::domain_error("softmax: non-finite score");
    }
    const double top = scores.maxCoeff();
    Vector probs = (scores.array() - top).exp();
    probs /= probs.sum();
    return probs;
}

}  // namespace metaage
