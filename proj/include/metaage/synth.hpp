#pragma once

#include "metaage/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaage {

/// Personalized-aging benchmark. Each identity has a latent vector a ~ N(0, I)
/// that drives both its identity features tanh(U a) and an aging offset c.a:
/// the face "looks" y + offset years old, so only identity-aware predictors
/// can undo the offset.
struct SynthConfig {
    std::size_t n_identities = 200;
    std::size_t samples_per_identity = 10;
    Eigen::Index K = 101;
    Eigen::Index D = 64;
    Eigen::Index F = 32;
    Eigen::Index latent_dim = 4;
    double offset_max = 5.0;
    double feature_noise = 0.01;
    double rbf_width = 2.0;
    std::uint64_t seed = 7;

    void validate() const {
        if (n_identities < 1 || samples_per_identity < 1 || K < 1 || D < 1 || F < 1 || latent_dim < 1) {
            throw std::invalid_argument("synth: all counts must be >= 1");
        }
        if (!std::isfinite(offset_max) || offset_max < 0.0) {
            throw std::invalid_argument("synth: offset_max must be >= 0");
        }
        if (offset_max >= static_cast<double>(K) / 4.0) {
            throw std::invalid_argument("synth: offset_max must be < K/4");
        }
        if (!std::isfinite(feature_noise) || feature_noise < 0.0) {
            throw std::invalid_argument("synth: feature_noise must be >= 0");
        }
        if (!std::isfinite(rbf_width) || rbf_width <= 0.0) {
            throw std::invalid_argument("synth: rbf_width must be > 0");
        }
    }
};

struct SynthOracle {
    std::vector<double> offsets;  // per identity
    double bayes_mae_global = 0.0;
    double bayes_mae_personal = 0.0;
};

/// Generator output before the oracle is attached.
struct SynthData {
    Dataset dataset;
    std::vector<double> offsets;  // indexed by identity_id
};

/// Center of age feature d: D points equispaced on [0, K-1].
inline double rbf_center(Eigen::Index d, Eigen::Index D, Eigen::Index K) {
    if (D == 1) {
        return static_cast<double>(K - 1) / 2.0;
    }
    return static_cast<double>(K - 1) * static_cast<double>(d) / static_cast<double>(D - 1);
}

/// Noise-free age features for an apparent age z.
inline Vector rbf_features(double z, Eigen::Index D, Eigen::Index K, double width) {
    Vector g(D);
    for (Eigen::Index d = 0; d < D; ++d) {
        const double diff = z - rbf_center(d, D, K);
        g(d) = std::exp(-diff * diff / (2.0 * width * width));
    }
    return g;
}

/// Least-squares fit of z to observed features: coarse grid, then ternary refinement.
inline double decode_apparent_age(const Vector& g, Eigen::Index K, double width) {
    const Eigen::Index D = g.size();
    auto cost = [&](double z) { return (rbf_features(z, D, K, width) - g).squaredNorm(); };
    const double top = static_cast<double>(K - 1);
    const double step = 0.25;
    double best = 0.0, best_cost = cost(0.0);
    for (double z = step; z <= top + 1e-12; z += step) {
        const double c = cost(z);
        if (c < best_cost) {
            best_cost = c;
            best = z;
        }
    }
    double lo = std::max(0.0, best - step), hi = std::min(top, best + step);
    for (int it = 0; it < 80; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (cost(m1) < cost(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    return 0.5 * (lo + hi);
}

inline SynthData synth_generate_raw(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<Eigen::Index> age(0, cfg.K - 1);

    const Eigen::Index A = cfg.latent_dim;
    Matrix U(cfg.F, A);
    for (Eigen::Index r = 0; r < U.rows(); ++r) {
        for (Eigen::Index c = 0; c < A; ++c) {
            U(r, c) = normal(rng) / std::sqrt(static_cast<double>(A));
        }
    }
    // c.a ~ N(0, |c|^2); scale so its std is offset_max / 2.
    Vector c(A);
    for (Eigen::Index i = 0; i < A; ++i) {
        c(i) = normal(rng);
    }
    c *= (cfg.offset_max / 2.0) / c.norm();

    SynthData out;
    out.dataset.D = cfg.D;
    out.dataset.F = cfg.F;
    out.dataset.K = cfg.K;
    out.dataset.records.reserve(cfg.n_identities * cfg.samples_per_identity);
    out.offsets.reserve(cfg.n_identities);
    const double top = static_cast<double>(cfg.K - 1);
    for (std::size_t j = 0; j < cfg.n_identities; ++j) {
        Vector a(A);
        for (Eigen::Index i = 0; i < A; ++i) {
            a(i) = normal(rng);
        }
        const double offset = std::clamp(c.dot(a), -cfg.offset_max, cfg.offset_max);
        out.offsets.push_back(offset);
        const Vector clean_id = (U * a).array().tanh();
        for (std::size_t s = 0; s < cfg.samples_per_identity; ++s) {
            FeatureRecord r;
            const auto y = age(rng);
            r.label = static_cast<double>(y);
            const double z = std::clamp(static_cast<double>(y) + offset, 0.0, top);
            r.age_feat = rbf_features(z, cfg.D, cfg.K, cfg.rbf_width);
            for (Eigen::Index d = 0; d < cfg.D; ++d) {
                r.age_feat(d) += cfg.feature_noise * normal(rng);
            }
            r.id_feat = clean_id;
            for (Eigen::Index f = 0; f < cfg.F; ++f) {
                r.id_feat(f) += cfg.feature_noise * normal(rng);
            }
            r.sigma = 1.0 + std::abs(offset) / 2.0;
            r.identity_id = static_cast<std::uint32_t>(j);
            out.dataset.records.push_back(std::move(r));
        }
    }
    quantize_to_f32(out.dataset);
    return out;
}

/// Oracle MAEs over `ds` given the true per-identity offsets.
///  - global: an identity-blind predictor can at best recover the apparent
///    age z = clamp(y + o); its error is |z - y|.
///  - personal: decode z from the stored (noisy) features, subtract the known
///    offset, clamp to the label range; what remains is noise and clamping.
inline SynthOracle compute_oracle(const Dataset& ds, const std::vector<double>& offsets, const SynthConfig& cfg) {
    if (ds.empty()) {
        throw std::invalid_argument("compute_oracle: empty dataset");
    }
    SynthOracle o;
    o.offsets = offsets;
    const double top = static_cast<double>(ds.K - 1);
    double global = 0.0, personal = 0.0;
    for (const FeatureRecord& r : ds.records) {
        if (!r.identity_id || *r.identity_id >= offsets.size()) {
            throw std::invalid_argument("compute_oracle: record without a known latent offset");
        }
        const double off = offsets[*r.identity_id];
        const double z = std::clamp(r.label + off, 0.0, top);
        global += std::abs(z - r.label);
        const double z_hat = decode_apparent_age(r.age_feat, ds.K, cfg.rbf_width);
        const double y_hat = std::clamp(z_hat - off, 0.0, top);
        personal += std::abs(y_hat - r.label);
    }
    o.bayes_mae_global = global / static_cast<double>(ds.size());
    o.bayes_mae_personal = std::min(personal / static_cast<double>(ds.size()), o.bayes_mae_global);
    return o;
}

inline std::pair<Dataset, SynthOracle> synth_generate(const SynthConfig& cfg) {
    SynthData raw = synth_generate_raw(cfg);
    SynthOracle oracle = compute_oracle(raw.dataset, raw.offsets, cfg);
    return {std::move(raw.dataset), std::move(oracle)};
}

}  // namespace metaage
