#pragma once

#include "metaage/layers.hpp"
#include "metaage/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace metaage {

enum class TargetMode { hard_onehot, label_distribution };

struct LossConfig {
    double lambda = 0.2;  // weight of the ordinal term
    double delta = 2.0;   // hinge margin
    TargetMode target_mode = TargetMode::hard_onehot;

    void validate() const {
        if (!std::isfinite(lambda) || lambda < 0.0) {
            throw std::invalid_argument("lambda must be finite and >= 0");
        }
        if (!std::isfinite(delta) || delta < 0.0) {
            throw std::invalid_argument("delta must be finite and >= 0");
        }
    }
};

struct LossValue {
    double loss = 0.0;
    Vector grad;  // dL/dscores
};

namespace detail {

inline Vector log_softmax(const Vector& scores) {
    if (!scores.allFinite()) {
        throw std::domain_error("log_softmax: non-finite score");
    }
    const double top = scores.maxCoeff();
    const double lse = top + std::log((scores.array() - top).exp().sum());
    return scores.array() - lse;
}

inline Eigen::Index check_label(Eigen::Index y, Eigen::Index K) {
    if (y < 0 || y >= K) {
        throw std::out_of_range("label " + std::to_string(y) + " outside [0, " + std::to_string(K - 1) + "]");
    }
    return y;
}

}  // namespace detail

/// -log softmax(scores)[y]
inline LossValue cls_loss(const Vector& scores, Eigen::Index y) {
    detail::check_label(y, scores.size());
    const Vector logp = detail::log_softmax(scores);
    LossValue out;
    out.loss = -logp(y);
    out.grad = logp.array().exp();
    out.grad(y) -= 1.0;
    return out;
}

/// -sum_k t_k log softmax(scores)[k]
inline LossValue cls_loss(const Vector& scores, const Vector& target) {
    if (target.size() != scores.size()) {
        throw ShapeError("cls_loss: target length " + std::to_string(target.size()) + " vs " +
                         std::to_string(scores.size()) + " scores");
    }
    if (!target.allFinite() || (target.array() < 0.0).any() || std::abs(target.sum() - 1.0) > 1e-6) {
        throw std::invalid_argument("cls_loss: soft target must be a probability vector");
    }
    const Vector logp = detail::log_softmax(scores);
    LossValue out;
    out.loss = -target.dot(logp);
    out.grad = logp.array().exp().matrix() - target;
    return out;
}

/// max(0, delta - (z - z'))
inline double hinge(double z, double z_prime, double delta) { return std::max(0.0, delta - (z - z_prime)); }

/// Scores must rise by at least delta up to the label and fall by at least
/// delta after it. Subgradient at the kink is 0.
inline LossValue ord_loss(const Vector& scores, Eigen::Index y, double delta) {
    const Eigen::Index K = scores.size();
    detail::check_label(y, K);
    LossValue out;
    out.grad = Vector::Zero(K);
    for (Eigen::Index k = 0; k < y; ++k) {
        // H(s_{k+1}, s_k)
        const double v = delta - (scores(k + 1) - scores(k));
        if (v > 0.0) {
            out.loss += v;
            out.grad(k + 1) -= 1.0;
            out.grad(k) += 1.0;
        }
    }
    for (Eigen::Index k = y; k + 1 < K; ++k) {
        // H(s_k, s_{k+1})
        const double v = delta - (scores(k) - scores(k + 1));
        if (v > 0.0) {
            out.loss += v;
            out.grad(k) -= 1.0;
            out.grad(k + 1) += 1.0;
        }
    }
    return out;
}

/// Hard class used by the ordinal term for a (possibly fractional) label.
inline Eigen::Index hard_label(double label, Eigen::Index K) {
    const double r = std::round(label);
    return static_cast<Eigen::Index>(std::clamp(r, 0.0, static_cast<double>(K - 1)));
}

/// t_k proportional to exp(-(k - mean)^2 / (2 sigma^2)) over k = 0..K-1.
inline Vector encode_label_distribution(double mean, double sigma, Eigen::Index K) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw std::invalid_argument("encode_label_distribution: sigma must be > 0");
    }
    if (K < 1) {
        throw std::invalid_argument("encode_label_distribution: K must be >= 1");
    }
    Vector logits(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double d = static_cast<double>(k) - mean;
        logits(k) = -d * d / (2.0 * sigma * sigma);
    }
    // Normalize in log space so tiny sigmas do not underflow to 0/0.
    return softmax(logits);
}

/// cls + lambda * ord. `target` is either empty (hard mode) or a distribution.
inline LossValue total_loss(const Vector& scores, const Vector& target, Eigen::Index y_hard, const LossConfig& config) {
    LossValue cls = target.size() == 0 ? cls_loss(scores, y_hard) : cls_loss(scores, target);
    if (config.lambda == 0.0) {
        return cls;
    }
    const LossValue ord = ord_loss(scores, y_hard, config.delta);
    cls.loss += config.lambda * ord.loss;
    cls.grad += config.lambda * ord.grad;
    return cls;
}

}  // namespace metaage
