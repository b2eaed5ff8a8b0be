#pragma once

#include "metaage/head.hpp"
#include "metaage/layers.hpp"
#include "metaage/mlp.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace metaage {

struct Dims {
    Eigen::Index K = 101;  // age classes
    Eigen::Index D = 64;   // age feature width
    Eigen::Index F = 32;   // identity feature width
    Eigen::Index H = 128;  // residual hidden width

    Eigen::Index residual_input() const { return F + D + K; }

    friend bool operator==(const Dims&, const Dims&) = default;
};

inline void validate_dims(const Dims& d) {
    if (d.K < 1 || d.D < 1 || d.F < 1 || d.H < 1) {
        throw std::invalid_argument("dims must all be >= 1 (K=" + std::to_string(d.K) + " D=" + std::to_string(d.D) +
                                    " F=" + std::to_string(d.F) + " H=" + std::to_string(d.H) + ")");
    }
}

/// Common weights plus the residual generator r(h, w_i^c, i).
struct MetaLearnerParams {
    Dims dims;
    Matrix W_common;  // K x D
    Matrix grad_W_common;
    TwoLayerMlp residual;  // (F + D + K) -> H -> D

    void zero_grad() {
        grad_W_common.setZero(W_common.rows(), W_common.cols());
        residual.zero_grad();
    }
};

/// Seeded initialization: Xavier-uniform for W_common and both affine
/// weights, zero biases, unit BN scale.
inline MetaLearnerParams init_params(const Dims& dims, std::uint64_t seed) {
    validate_dims(dims);
    MetaLearnerParams p;
    p.dims = dims;
    Rng rng(seed);
    p.W_common = Matrix::Zero(dims.K, dims.D);
    xavier_uniform(p.W_common, rng);
    p.residual = TwoLayerMlp(dims.residual_input(), dims.H, dims.D);
    p.residual.init(rng);
    return p;
}

/// Zeroes the residual output layer; generated weights collapse to W_common.
inline void zero_residual_output(MetaLearnerParams& p) {
    p.residual.output.weight.setZero();
    p.residual.output.bias.setZero();
}

namespace detail {

inline Eigen::Index check_class(Eigen::Index i, Eigen::Index K) {
    if (i < 0 || i >= K) {
        throw std::out_of_range("class " + std::to_string(i) + " outside [0, " + std::to_string(K - 1) + "]");
    }
    return i;
}

}  // namespace detail

inline Vector one_hot(Eigen::Index i, Eigen::Index K) {
    detail::check_class(i, K);
    Vector e = Vector::Zero(K);
    e(i) = 1.0;
    return e;
}

/// [h | w_i^c | onehot(i)]
inline Vector build_residual_input(const Vector& h, const Vector& w_common_row, Eigen::Index i, Eigen::Index K) {
    Vector out(h.size() + w_common_row.size() + K);
    out << h, w_common_row, one_hot(i, K);
    return out;
}

namespace detail {

inline void check_identity(const MetaLearnerParams& p, Eigen::Index f, const char* what) {
    if (f != p.dims.F) {
        throw ShapeError(std::string(what) + ": identity features have width " + std::to_string(f) + ", params expect " +
                         std::to_string(p.dims.F));
    }
}

}  // namespace detail

/// Residual-net input for a batch: row b*K + i = [h_b | w_i^c | e_i].
inline Matrix conditioning_rows(const MetaLearnerParams& p, const Matrix& identity) {
    detail::check_identity(p, identity.cols(), "conditioning_rows");
    const Eigen::Index K = p.dims.K, D = p.dims.D, F = p.dims.F;
    const Eigen::Index B = identity.rows();
    Matrix X = Matrix::Zero(B * K, F + D + K);
    for (Eigen::Index b = 0; b < B; ++b) {
        X.block(b * K, 0, K, F).rowwise() = identity.row(b);
        X.block(b * K, F, K, D) = p.W_common;
        X.block(b * K, F + D, K, K).setIdentity();
    }
    return X;
}

/// Row i of a single sample's generated weights, via an explicit one-row pass.
/// Train mode needs a batch of at least two rows, so a single row must use eval.
inline Vector generate_class_weight(const MetaLearnerParams& p, const Vector& h, Eigen::Index i) {
    detail::check_identity(p, h.size(), "generate_class_weight");
    const Vector w_row = p.W_common.row(detail::check_class(i, p.dims.K)).transpose();
    const Matrix x = build_residual_input(h, w_row, i, p.dims.K).transpose();
    const Vector r = mlp_eval(x, p.residual).row(0).transpose();
    return w_row + r;
}

inline Vector generate_class_weight(MetaLearnerParams& p, const Vector& h, Eigen::Index i, Mode mode) {
    if (mode == Mode::eval) {
        return generate_class_weight(std::as_const(p), h, i);
    }
    detail::check_identity(p, h.size(), "generate_class_weight");
    const Vector w_row = p.W_common.row(detail::check_class(i, p.dims.K)).transpose();
    const Matrix x = build_residual_input(h, w_row, i, p.dims.K).transpose();
    const Vector r = mlp_forward(x, p.residual, Mode::train).row(0).transpose();
    return w_row + r;
}

namespace detail {

/// Hidden pre-activations for every conditioning row without materializing
/// the (B*K) x (F+D+K) input: the first layer splits into an identity term
/// (per sample), a common-weight term and a one-hot column (per class).
inline Matrix hidden_preactivation(const MetaLearnerParams& p, const Matrix& identity) {
    check_identity(p, identity.cols(), "generate_rows");
    const Eigen::Index K = p.dims.K, D = p.dims.D, F = p.dims.F, H = p.dims.H;
    const Matrix& W1 = p.residual.hidden.weight;
    const Matrix per_sample = identity * W1.leftCols(F).transpose();  // B x H
    Matrix per_class = p.W_common * W1.middleCols(F, D).transpose();  // K x H
    per_class += W1.rightCols(K).transpose();
    per_class.rowwise() += p.residual.hidden.bias.transpose();
    Matrix pre(identity.rows() * K, H);
    for (Eigen::Index b = 0; b < identity.rows(); ++b) {
        pre.block(b * K, 0, K, H) = per_class.rowwise() + per_sample.row(b);
    }
    return pre;
}

inline Matrix add_common(const MetaLearnerParams& p, Matrix rows) {
    for (Eigen::Index b = 0; b < rows.rows() / p.dims.K; ++b) {
        rows.block(b * p.dims.K, 0, p.dims.K, p.dims.D) += p.W_common;
    }
    return rows;
}

}  // namespace detail

/// Cached intermediates of a train-mode generate_rows call.
struct GenerationCache {
    Matrix identity;    // B x F
    BatchNormCache bn;
    Matrix bn_out;      // ReLU input
    Matrix activation;  // ReLU output
};

/// All B*K generated rows, stacked sample-major (row b*K + i is w_i^p of
/// sample b). In train mode the whole B*K block is one batch-norm batch.
inline Matrix generate_rows(const MetaLearnerParams& p, const Matrix& identity) {
    const Matrix pre = detail::hidden_preactivation(p, identity);
    const Matrix act = relu_forward(batchnorm_eval(pre, p.residual.bn));
    return detail::add_common(p, affine_forward(act, p.residual.output));
}

inline Matrix generate_rows(MetaLearnerParams& p, const Matrix& identity, Mode mode, GenerationCache* cache = nullptr) {
    if (mode == Mode::eval) {
        return generate_rows(std::as_const(p), identity);
    }
    p.residual.bn.mode = Mode::train;
    const Matrix pre = detail::hidden_preactivation(p, identity);
    BatchNormCache bn_cache;
    Matrix normed = batchnorm_forward(pre, p.residual.bn, &bn_cache);
    Matrix act = relu_forward(normed);
    Matrix rows = detail::add_common(p, affine_forward(act, p.residual.output));
    if (cache != nullptr) {
        cache->identity = identity;
        cache->bn = std::move(bn_cache);
        cache->bn_out = std::move(normed);
        cache->activation = std::move(act);
    }
    return rows;
}

inline std::vector<PersonalizedWeights> split_rows(const Matrix& rows, Eigen::Index K) {
    std::vector<PersonalizedWeights> out;
    out.reserve(static_cast<std::size_t>(rows.rows() / K));
    for (Eigen::Index b = 0; b < rows.rows() / K; ++b) {
        out.push_back(PersonalizedWeights{rows.block(b * K, 0, K, rows.cols())});
    }
    return out;
}

inline std::vector<PersonalizedWeights> generate_weights_batch(const MetaLearnerParams& p, const Matrix& identity) {
    if (identity.rows() < 1) {
        throw std::invalid_argument("generate_weights_batch: empty batch");
    }
    return split_rows(generate_rows(p, identity), p.dims.K);
}

inline std::vector<PersonalizedWeights> generate_weights_batch(MetaLearnerParams& p, const Matrix& identity, Mode mode) {
    if (identity.rows() < 1) {
        throw std::invalid_argument("generate_weights_batch: empty batch");
    }
    return split_rows(generate_rows(p, identity, mode), p.dims.K);
}

/// One sample's K x D estimator, as a single K-row pass.
inline PersonalizedWeights generate_weights(const MetaLearnerParams& p, const Vector& h) {
    detail::check_identity(p, h.size(), "generate_weights");
    return PersonalizedWeights{generate_rows(p, Matrix(h.transpose()))};
}

inline PersonalizedWeights generate_weights(MetaLearnerParams& p, const Vector& h, Mode mode) {
    detail::check_identity(p, h.size(), "generate_weights");
    return PersonalizedWeights{generate_rows(p, Matrix(h.transpose()), mode)};
}

/// Backward through a train-mode generate_rows. `grad_rows` is dL/dW^p for
/// every generated row. W_common receives both its direct path and the path
/// through the conditioning input.
inline void generate_rows_backward(const Matrix& grad_rows, const GenerationCache& cache, MetaLearnerParams& p) {
    const Eigen::Index K = p.dims.K, D = p.dims.D, F = p.dims.F, H = p.dims.H;
    const Eigen::Index B = cache.identity.rows();
    require_shape(grad_rows, B * K, D, "generate_rows_backward");
    if (p.grad_W_common.rows() != K || p.grad_W_common.cols() != D) {
        p.grad_W_common.setZero(K, D);
    }
    TwoLayerMlp& net = p.residual;
    if (net.hidden.grad_weight.rows() != net.hidden.out() || net.hidden.grad_weight.cols() != net.hidden.in()) {
        net.hidden.zero_grad();
    }
    if (net.bn.grad_gamma.size() != H) {
        net.bn.zero_grad();
    }

    Matrix g = affine_backward(grad_rows, cache.activation, net.output);
    g = relu_backward(g, cache.bn_out);
    const Matrix grad_pre = batchnorm_backward(g, cache.bn, net.bn);  // B*K x H

    Matrix per_sample(B, H);      // sum over classes of each sample's block
    Matrix per_class = Matrix::Zero(K, H);  // sum over samples
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto block = grad_pre.block(b * K, 0, K, H);
        per_sample.row(b) = block.colwise().sum();
        per_class += block;
        p.grad_W_common += grad_rows.block(b * K, 0, K, D);
    }
    net.hidden.grad_weight.leftCols(F).noalias() += per_sample.transpose() * cache.identity;
    net.hidden.grad_weight.middleCols(F, D).noalias() += per_class.transpose() * p.W_common;
    net.hidden.grad_weight.rightCols(K) += per_class.transpose();
    net.hidden.grad_bias += per_class.colwise().sum().transpose();
    p.grad_W_common.noalias() += per_class * net.hidden.weight.middleCols(F, D);
}

}  // namespace metaage
