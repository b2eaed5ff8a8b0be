#pragma once

#include "metaage/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaage {

/// A trainable tensor viewed as flat storage plus its gradient buffer.
struct ParamBlock {
    std::string name;
    std::span<double> values;
    std::span<const double> grads;
};

template <typename Derived>
std::span<double> flat(Eigen::PlainObjectBase<Derived>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename Derived>
std::span<const double> flat(const Eigen::PlainObjectBase<Derived>& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(lr > 0.0) || !std::isfinite(lr)) {
            throw std::invalid_argument("learning rate must be > 0");
        }
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
            throw std::invalid_argument("Adam betas must lie in (0, 1)");
        }
        if (!(epsilon > 0.0)) {
            throw std::invalid_argument("Adam epsilon must be > 0");
        }
    }
};

struct AdamState {
    std::vector<std::vector<double>> first;   // m, one buffer per block
    std::vector<std::vector<double>> second;  // v
    std::uint64_t step = 0;
};

/// One bias-corrected Adam update over every block. Moment buffers are
/// created on the first call and must keep their shapes afterwards.
inline void adam_step(std::span<const ParamBlock> blocks, AdamState& state, const AdamConfig& cfg) {
    if (state.step == 0 && state.first.empty()) {
        for (const ParamBlock& b : blocks) {
            state.first.emplace_back(b.values.size(), 0.0);
            state.second.emplace_back(b.values.size(), 0.0);
        }
    }
    if (state.first.size() != blocks.size()) {
        throw ShapeError("adam_step: " + std::to_string(blocks.size()) + " parameter blocks, state has " +
                         std::to_string(state.first.size()));
    }
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const ParamBlock& b = blocks[k];
        if (b.values.size() != b.grads.size() || state.first[k].size() != b.values.size()) {
            throw ShapeError("adam_step: shape mismatch in block " + b.name);
        }
        for (double g : b.grads) {
            if (!std::isfinite(g)) {
                throw std::domain_error("adam_step: non-finite gradient in block " + b.name);
            }
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        const ParamBlock& b = blocks[k];
        std::vector<double>& m = state.first[k];
        std::vector<double>& v = state.second[k];
        for (std::size_t i = 0; i < b.values.size(); ++i) {
            const double g = b.grads[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            b.values[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace metaage
