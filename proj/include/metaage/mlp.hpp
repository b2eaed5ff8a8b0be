#pragma once

#include "metaage/layers.hpp"

namespace metaage {

/// affine -> batch norm -> ReLU -> affine. The output layer is linear.
struct TwoLayerMlp {
    AffineLayer hidden;
    BatchNormLayer bn;
    AffineLayer output;

    TwoLayerMlp() = default;
    TwoLayerMlp(Eigen::Index in, Eigen::Index width, Eigen::Index out) : hidden(in, width), bn(width), output(width, out) {}

    Eigen::Index in() const { return hidden.in(); }
    Eigen::Index width() const { return hidden.out(); }
    Eigen::Index out() const { return output.out(); }

    void init(Rng& rng) {
        hidden.init(rng);
        output.init(rng);
    }

    void zero_grad() {
        hidden.zero_grad();
        bn.zero_grad();
        output.zero_grad();
    }
};

struct MlpCache {
    Matrix input;
    Matrix hidden_pre;  // affine output, BN input
    BatchNormCache bn;
    Matrix bn_out;      // ReLU input
    Matrix activation;  // ReLU output
};

inline Matrix mlp_eval(const Matrix& x, const TwoLayerMlp& net) {
    return affine_forward(relu_forward(batchnorm_eval(affine_forward(x, net.hidden), net.bn)), net.output);
}

/// Train mode uses batch statistics (and updates running stats); eval mode
/// never touches the layer state.
inline Matrix mlp_forward(const Matrix& x, TwoLayerMlp& net, Mode mode, MlpCache* cache = nullptr) {
    if (mode == Mode::eval) {
        return mlp_eval(x, net);
    }
    net.bn.mode = Mode::train;
    Matrix pre = affine_forward(x, net.hidden);
    BatchNormCache bn_cache;
    Matrix normed = batchnorm_forward(pre, net.bn, &bn_cache);
    Matrix act = relu_forward(normed);
    Matrix out = affine_forward(act, net.output);
    if (cache != nullptr) {
        cache->input = x;
        cache->hidden_pre = std::move(pre);
        cache->bn = std::move(bn_cache);
        cache->bn_out = std::move(normed);
        cache->activation = std::move(act);
    }
    return out;
}

/// Backward through a train-mode forward; accumulates every parameter
/// gradient and returns dL/dx.
inline Matrix mlp_backward(const Matrix& grad_out, const MlpCache& cache, TwoLayerMlp& net) {
    if (net.bn.grad_gamma.size() != net.bn.width()) {
        net.bn.zero_grad();
    }
    Matrix g = affine_backward(grad_out, cache.activation, net.output);
    g = relu_backward(g, cache.bn_out);
    g = batchnorm_backward(g, cache.bn, net.bn);
    return affine_backward(g, cache.input, net.hidden);
}

}  // namespace metaage
