#pragma once

// Shared fixtures for the unit tests and the acceptance binary.

#include "metaage/grad_check.hpp"
#include "metaage/synth.hpp"
#include "metaage/training.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace metaage::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = n(rng);
    }
    return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
    return random_matrix(n, 1, rng, scale).col(0);
}

inline Dims tiny_dims() { return {5, 8, 6, 16}; }

/// A small model plus one batch, with every parameter moved off its
/// initialization so no gradient path is trivially zero.
struct TinyProblem {
    TrainedModel model;
    Matrix identity;
    Matrix age;
    std::vector<double> labels;
    Targets targets;
    LossConfig loss;
};

inline void jitter(Matrix& m, Rng& rng, double scale) { m += random_matrix(m.rows(), m.cols(), rng, scale); }
inline void jitter(Vector& v, Rng& rng, double scale) { v += random_vector(v.size(), rng, scale); }

inline void jitter_mlp(TwoLayerMlp& net, Rng& rng) {
    jitter(net.hidden.bias, rng, 0.3);
    jitter(net.bn.gamma, rng, 0.3);
    jitter(net.bn.beta, rng, 0.3);
    jitter(net.output.bias, rng, 0.3);
}

inline TinyProblem make_tiny_problem(ModelKind kind, std::uint64_t seed, bool adapter, TargetMode mode,
                                     Eigen::Index batch = 3, Dims dims = tiny_dims()) {
    TrainConfig cfg;
    cfg.dims = dims;
    cfg.model_kind = kind;
    cfg.use_adapter = adapter;
    cfg.seed = seed;
    cfg.loss.target_mode = mode;
    TinyProblem p;
    p.model = init_model(cfg);
    p.loss = cfg.loss;

    Rng rng(seed ^ 0x9E3779B97F4A7C15ULL);
    if (kind == ModelKind::metaage) {
        jitter_mlp(p.model.meta.residual, rng);
    }
    if (kind == ModelKind::concat) {
        jitter_mlp(p.model.concat, rng);
    }
    if (adapter) {
        jitter(p.model.adapter->weight, rng, 0.2);
        jitter(p.model.adapter->bias, rng, 0.2);
    }
    p.identity = random_matrix(batch, dims.F, rng);
    p.age = random_matrix(batch, dims.D, rng);
    std::uniform_real_distribution<double> label(0.0, static_cast<double>(dims.K - 1));
    std::uniform_real_distribution<double> sig(0.5, 2.0);
    std::vector<std::optional<double>> sigmas;
    for (Eigen::Index b = 0; b < batch; ++b) {
        p.labels.push_back(label(rng));
        sigmas.emplace_back(sig(rng));
    }
    p.targets = make_targets(p.labels, sigmas, dims.K, mode);
    return p;
}

/// Smallest distance of any ReLU input or ordinal-hinge argument to its kink.
/// Finite differences are meaningless when a probe straddles one.
inline double kink_margin(TinyProblem& p) {
    TrainedModel& m = p.model;
    double margin = std::numeric_limits<double>::infinity();
    if (m.kind == ModelKind::metaage) {
        GenerationCache cache;
        generate_rows(m.meta, p.identity, Mode::train, &cache);
        margin = std::min(margin, cache.bn_out.cwiseAbs().minCoeff());
    } else if (m.kind == ModelKind::concat) {
        const Matrix feats = m.adapter ? affine_forward(p.age, *m.adapter) : p.age;
        Matrix x(p.age.rows(), m.dims.D + m.dims.F);
        x << feats, p.identity;
        MlpCache cache;
        mlp_forward(x, m.concat, Mode::train, &cache);
        margin = std::min(margin, cache.bn_out.cwiseAbs().minCoeff());
    }
    if (p.loss.lambda != 0.0) {
        const BatchResult r = batch_loss(m, p.identity, p.age, p.targets, p.loss, false);
        for (Eigen::Index b = 0; b < r.scores.rows(); ++b) {
            const Eigen::Index y = p.targets.hard[static_cast<std::size_t>(b)];
            for (Eigen::Index k = 0; k + 1 < r.scores.cols(); ++k) {
                const double rise = k < y ? r.scores(b, k + 1) - r.scores(b, k) : r.scores(b, k) - r.scores(b, k + 1);
                margin = std::min(margin, std::abs(p.loss.delta - rise));
            }
        }
    }
    return margin;
}

/// Analytic gradients of the mean batch loss against central differences
/// over every parameter block of the model.
inline GradCheckReport full_grad_check(TinyProblem& p, double tolerance) {
    TrainedModel& m = p.model;
    batch_loss(m, p.identity, p.age, p.targets, p.loss, true);
    const std::vector<ParamBlock> blocks = param_blocks(m);
    std::vector<std::vector<double>> analytic;
    for (const ParamBlock& b : blocks) {
        analytic.emplace_back(b.grads.begin(), b.grads.end());
    }
    std::vector<GradCheckParam> params;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        params.push_back({blocks[k].name, blocks[k].values, analytic[k]});
    }
    auto loss = [&] { return batch_loss(m, p.identity, p.age, p.targets, p.loss, false).loss; };
    return grad_check(loss, params, tolerance);
}

/// Benchmark used by the personalization criteria: identity-disjoint split
/// of the default synthetic generator.
struct Benchmark {
    SynthConfig synth;
    Split data;
    SynthOracle train_oracle;
    SynthOracle test_oracle;
    std::vector<double> offsets;
};

inline Benchmark make_benchmark(const SynthConfig& cfg = {}) {
    Benchmark b;
    b.synth = cfg;
    const SynthData raw = synth_generate_raw(cfg);
    b.offsets = raw.offsets;
    b.data = split(raw.dataset, 0.8, cfg.seed, true);
    b.train_oracle = compute_oracle(b.data.train, raw.offsets, cfg);
    b.test_oracle = compute_oracle(b.data.test, raw.offsets, cfg);
    return b;
}

/// Settings used for the synthetic benchmark runs.
inline TrainConfig benchmark_config(const Dataset& ds, ModelKind kind) {
    TrainConfig c;
    c.dims = {ds.K, ds.D, ds.F, 128};
    c.model_kind = kind;
    c.epochs = 20;
    c.batch_size = 32;
    c.adam.lr = 1e-3;
    c.use_adapter = true;
    c.seed = 7;
    return c;
}

}  // namespace metaage::testing
