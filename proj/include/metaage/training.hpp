#pragma once

#include "metaage/data.hpp"
#include "metaage/estimator.hpp"
#include "metaage/losses.hpp"
#include "metaage/metalearner.hpp"
#include "metaage/metrics.hpp"
#include "metaage/optim.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace metaage {

enum class ModelKind { metaage, global, concat };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::metaage: return "metaage";
        case ModelKind::global: return "global";
        case ModelKind::concat: return "concat";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "metaage") return ModelKind::metaage;
    if (s == "global") return ModelKind::global;
    if (s == "concat") return ModelKind::concat;
    throw std::invalid_argument("unknown model kind '" + s + "' (expected metaage, global or concat)");
}

struct TrainConfig {
    Dims dims;
    LossConfig loss;
    AdamConfig adam;
    std::size_t batch_size = 64;
    int epochs = 60;
    std::uint64_t seed = 7;
    ModelKind model_kind = ModelKind::metaage;
    bool use_adapter = false;
    // Keeps the residual output layer at zero (metaage only): the model is
    // then exactly the global estimator.
    bool freeze_residual_output = false;

    void validate() const {
        validate_dims(dims);
        loss.validate();
        adam.validate();
        if (batch_size < 2) {
            throw std::invalid_argument("batch size must be >= 2 (train-mode batch norm), got " +
                                        std::to_string(batch_size));
        }
        if (epochs < 1) {
            throw std::invalid_argument("epochs must be >= 1");
        }
    }
};

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double train_mae = 0.0;
};

/// Parameters for one of the three model kinds. `meta.W_common` is the
/// classifier of the global model; `concat` is used only by the concat kind.
struct TrainedModel {
    ModelKind kind = ModelKind::metaage;
    Dims dims;
    MetaLearnerParams meta;
    TwoLayerMlp concat;  // (D + F) -> H -> K
    std::optional<AffineLayer> adapter;  // D -> D on age features
    std::vector<EpochStats> history;
};

inline TrainedModel init_model(const TrainConfig& cfg) {
    validate_dims(cfg.dims);
    TrainedModel m;
    m.kind = cfg.model_kind;
    m.dims = cfg.dims;
    Rng rng(cfg.seed);
    switch (cfg.model_kind) {
        case ModelKind::metaage:
            m.meta = init_params(cfg.dims, cfg.seed);
            if (cfg.freeze_residual_output) {
                zero_residual_output(m.meta);
            }
            break;
        case ModelKind::global:
            // Same draw as the metaage W_common, so the two kinds start identical.
            m.meta.dims = cfg.dims;
            m.meta.W_common = Matrix::Zero(cfg.dims.K, cfg.dims.D);
            xavier_uniform(m.meta.W_common, rng);
            break;
        case ModelKind::concat:
            m.concat = TwoLayerMlp(cfg.dims.D + cfg.dims.F, cfg.dims.H, cfg.dims.K);
            m.concat.init(rng);
            break;
    }
    if (cfg.use_adapter) {
        AffineLayer a(cfg.dims.D, cfg.dims.D);
        a.weight.setIdentity();
        m.adapter = std::move(a);
    }
    return m;
}

/// Every trainable block, in a fixed order shared by the optimizer, the
/// gradient checker and the checkpoint writer.
inline std::vector<ParamBlock> param_blocks(TrainedModel& m) {
    std::vector<ParamBlock> out;
    auto add = [&](const char* name, auto& values, auto& grads) {
        if (grads.size() != values.size()) {
            grads.setZero(values.rows(), values.cols());
        }
        out.push_back({name, flat(values), flat(grads)});
    };
    switch (m.kind) {
        case ModelKind::metaage:
            add("W_common", m.meta.W_common, m.meta.grad_W_common);
            add("hidden.weight", m.meta.residual.hidden.weight, m.meta.residual.hidden.grad_weight);
            add("hidden.bias", m.meta.residual.hidden.bias, m.meta.residual.hidden.grad_bias);
            add("bn.gamma", m.meta.residual.bn.gamma, m.meta.residual.bn.grad_gamma);
            add("bn.beta", m.meta.residual.bn.beta, m.meta.residual.bn.grad_beta);
            add("output.weight", m.meta.residual.output.weight, m.meta.residual.output.grad_weight);
            add("output.bias", m.meta.residual.output.bias, m.meta.residual.output.grad_bias);
            break;
        case ModelKind::global:
            add("W_common", m.meta.W_common, m.meta.grad_W_common);
            break;
        case ModelKind::concat:
            add("hidden.weight", m.concat.hidden.weight, m.concat.hidden.grad_weight);
            add("hidden.bias", m.concat.hidden.bias, m.concat.hidden.grad_bias);
            add("bn.gamma", m.concat.bn.gamma, m.concat.bn.grad_gamma);
            add("bn.beta", m.concat.bn.beta, m.concat.bn.grad_beta);
            add("output.weight", m.concat.output.weight, m.concat.output.grad_weight);
            add("output.bias", m.concat.output.bias, m.concat.output.grad_bias);
            break;
    }
    if (m.adapter) {
        add("adapter.weight", m.adapter->weight, m.adapter->grad_weight);
        add("adapter.bias", m.adapter->bias, m.adapter->grad_bias);
    }
    return out;
}

inline void zero_grads(TrainedModel& m) {
    switch (m.kind) {
        case ModelKind::metaage: m.meta.zero_grad(); break;
        case ModelKind::global: m.meta.grad_W_common.setZero(m.meta.W_common.rows(), m.meta.W_common.cols()); break;
        case ModelKind::concat: m.concat.zero_grad(); break;
    }
    if (m.adapter) {
        m.adapter->zero_grad();
    }
}

/// Per-sample supervision derived from a record: the hard class for the
/// ordinal term and, in label-distribution mode, the soft target.
struct Targets {
    std::vector<Eigen::Index> hard;
    std::vector<Vector> soft;  // empty entries in hard mode
};

inline Targets make_targets(const std::vector<double>& labels, const std::vector<std::optional<double>>& sigmas,
                            Eigen::Index K, TargetMode mode) {
    Targets t;
    t.hard.reserve(labels.size());
    t.soft.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        t.hard.push_back(hard_label(labels[i], K));
        if (mode == TargetMode::label_distribution) {
            if (!sigmas[i]) {
                throw std::invalid_argument("label-distribution targets need a sigma on every record (sample " +
                                            std::to_string(i) + " has none)");
            }
            t.soft[i] = encode_label_distribution(labels[i], *sigmas[i], K);
        }
    }
    return t;
}

struct BatchResult {
    double loss = 0.0;  // mean over the batch
    Matrix scores;      // B x K
};

/// Train-mode forward pass of the mean total loss over one batch; with
/// `backward`, gradients of every parameter block are (re)computed.
/// Identity features only ever enter as constant inputs.
inline BatchResult batch_loss(TrainedModel& m, const Matrix& identity, const Matrix& age, const Targets& targets,
                              const LossConfig& loss_cfg, bool backward) {
    const Eigen::Index B = age.rows();
    const Eigen::Index K = m.dims.K, D = m.dims.D;
    if (backward) {
        zero_grads(m);
    }
    const Matrix feats = m.adapter ? affine_forward(age, *m.adapter) : age;

    BatchResult r;
    Matrix rows;  // metaage: B*K x D generated weights
    GenerationCache gen_cache;
    MlpCache cache;
    switch (m.kind) {
        case ModelKind::metaage:
            rows = generate_rows(m.meta, identity, Mode::train, &gen_cache);
            r.scores.resize(B, K);
            for (Eigen::Index b = 0; b < B; ++b) {
                r.scores.row(b) = (rows.block(b * K, 0, K, D) * feats.row(b).transpose()).transpose();
            }
            break;
        case ModelKind::global:
            r.scores = feats * m.meta.W_common.transpose();
            break;
        case ModelKind::concat: {
            Matrix x(B, D + m.dims.F);
            x << feats, identity;
            r.scores = mlp_forward(x, m.concat, Mode::train, &cache);
            break;
        }
    }

    Matrix grad_scores(B, K);
    for (Eigen::Index b = 0; b < B; ++b) {
        const auto i = static_cast<std::size_t>(b);
        const LossValue lv = total_loss(r.scores.row(b).transpose(), targets.soft[i], targets.hard[i], loss_cfg);
        r.loss += lv.loss;
        grad_scores.row(b) = lv.grad.transpose();
    }
    r.loss /= static_cast<double>(B);
    if (!backward) {
        return r;
    }
    grad_scores /= static_cast<double>(B);

    Matrix grad_feats(B, D);
    switch (m.kind) {
        case ModelKind::metaage: {
            Matrix grad_rows(B * K, D);
            for (Eigen::Index b = 0; b < B; ++b) {
                grad_rows.block(b * K, 0, K, D) = grad_scores.row(b).transpose() * feats.row(b);
                grad_feats.row(b) = grad_scores.row(b) * rows.block(b * K, 0, K, D);
            }
            generate_rows_backward(grad_rows, gen_cache, m.meta);
            break;
        }
        case ModelKind::global:
            m.meta.grad_W_common.noalias() += grad_scores.transpose() * feats;
            grad_feats = grad_scores * m.meta.W_common;
            break;
        case ModelKind::concat:
            grad_feats = mlp_backward(grad_scores, cache, m.concat).leftCols(D);
            break;
    }
    if (m.adapter) {
        affine_backward(grad_feats, age, *m.adapter);
    }
    return r;
}

inline double expected_age(const Vector& scores) { return age_distribution(scores).expected_age; }

/// Eval-mode expected ages for every record, computed in chunks.
inline std::vector<double> predict_dataset(const TrainedModel& m, const Dataset& ds, std::size_t chunk = 256) {
    if (ds.D != m.dims.D || ds.F != m.dims.F || ds.K != m.dims.K) {
        throw ShapeError("dataset dims (D=" + std::to_string(ds.D) + " F=" + std::to_string(ds.F) +
                         " K=" + std::to_string(ds.K) + ") do not match model dims (D=" + std::to_string(m.dims.D) +
                         " F=" + std::to_string(m.dims.F) + " K=" + std::to_string(m.dims.K) + ")");
    }
    const Eigen::Index K = m.dims.K, D = m.dims.D;
    std::vector<double> preds;
    preds.reserve(ds.size());
    for (std::size_t start = 0; start < ds.size(); start += chunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(ds.size(), start + chunk); ++i) {
            idx.push_back(i);
        }
        const Batch b = gather(ds, idx);
        const Matrix feats = m.adapter ? affine_forward(b.age, *m.adapter) : b.age;
        const auto n = static_cast<Eigen::Index>(idx.size());
        Matrix scores(n, K);
        switch (m.kind) {
            case ModelKind::metaage: {
                const Matrix rows = generate_rows(m.meta, b.identity);
                for (Eigen::Index i = 0; i < n; ++i) {
                    scores.row(i) = (rows.block(i * K, 0, K, D) * feats.row(i).transpose()).transpose();
                }
                break;
            }
            case ModelKind::global:
                scores = feats * m.meta.W_common.transpose();
                break;
            case ModelKind::concat: {
                Matrix x(n, D + m.dims.F);
                x << feats, b.identity;
                scores = mlp_eval(x, m.concat);
                break;
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            preds.push_back(expected_age(scores.row(i).transpose()));
        }
    }
    return preds;
}

/// Eval-mode metrics; eps_error is reported iff every record has a sigma.
inline EvalResult evaluate(const TrainedModel& m, const Dataset& ds, int theta_max = 10) {
    if (ds.empty()) {
        throw std::invalid_argument("evaluate: empty dataset");
    }
    const std::vector<double> preds = predict_dataset(m, ds);
    std::vector<double> labels, sigmas;
    labels.reserve(ds.size());
    for (const FeatureRecord& r : ds.records) {
        labels.push_back(r.label);
    }
    if (ds.all_sigmas()) {
        for (const FeatureRecord& r : ds.records) {
            sigmas.push_back(*r.sigma);
        }
    }
    return evaluate_predictions(preds, labels, sigmas, theta_max);
}

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One optimizer step on one batch; returns the batch's train-mode result.
inline BatchResult train_step(TrainedModel& m, AdamState& state, const Batch& batch, const Targets& targets,
                              const TrainConfig& cfg) {
    BatchResult r = batch_loss(m, batch.identity, batch.age, targets, cfg.loss, true);
    if (m.kind == ModelKind::metaage && cfg.freeze_residual_output) {
        m.meta.residual.output.grad_weight.setZero();
        m.meta.residual.output.grad_bias.setZero();
    }
    const std::vector<ParamBlock> blocks = param_blocks(m);
    adam_step(blocks, state, cfg.adam);
    return r;
}

/// Adam on the mean joint loss over seeded minibatches for a fixed number of
/// epochs. History records the mean batch loss and the MAE of the train-mode
/// predictions seen during each epoch.
inline TrainedModel train(const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (ds.D != cfg.dims.D || ds.F != cfg.dims.F || ds.K != cfg.dims.K) {
        throw ShapeError("training data dims (D=" + std::to_string(ds.D) + " F=" + std::to_string(ds.F) +
                         " K=" + std::to_string(ds.K) + ") do not match config");
    }
    if (ds.size() < 2) {
        throw std::invalid_argument("training needs at least 2 records");
    }
    TrainedModel m = init_model(cfg);
    AdamState state;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0, abs_err = 0.0;
        std::size_t n_batches = 0, n_seen = 0;
        const auto plan = batches(ds.size(), cfg.batch_size, cfg.seed, static_cast<std::uint64_t>(epoch));
        for (std::size_t bi = 0; bi < plan.size(); ++bi) {
            const Batch batch = gather(ds, plan[bi]);
            const Targets targets = make_targets(batch.labels, batch.sigmas, cfg.dims.K, cfg.loss.target_mode);
            BatchResult r;
            try {
                r = train_step(m, state, batch, targets, cfg);
            } catch (const std::domain_error& e) {
                throw TrainingError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) + ": " +
                                    e.what());
            }
            if (!std::isfinite(r.loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(bi));
            }
            loss_sum += r.loss;
            ++n_batches;
            for (Eigen::Index b = 0; b < r.scores.rows(); ++b) {
                abs_err += std::abs(expected_age(r.scores.row(b).transpose()) - batch.labels[static_cast<std::size_t>(b)]);
                ++n_seen;
            }
        }
        m.history.push_back({epoch, loss_sum / static_cast<double>(n_batches),
                             abs_err / static_cast<double>(std::max<std::size_t>(n_seen, 1))});
    }
    return m;
}

/// Two-layer MLP on [g | h] with the same losses and optimizer.
inline TrainedModel train_baseline_concat(const Dataset& ds, TrainConfig cfg) {
    cfg.model_kind = ModelKind::concat;
    return train(ds, cfg);
}

struct SweepRow {
    double lambda = 0.0;
    double delta = 0.0;
    double mae = 0.0;
};

/// One train + test evaluation per grid point (lambda outer, delta inner),
/// all with the same seed.
inline std::vector<SweepRow> lambda_delta_sweep(const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
                                                const std::vector<double>& lambdas, const std::vector<double>& deltas) {
    if (lambdas.empty() || deltas.empty()) {
        throw std::invalid_argument("sweep grids must be non-empty");
    }
    std::vector<SweepRow> rows;
    for (double lambda : lambdas) {
        for (double delta : deltas) {
            TrainConfig c = cfg;
            c.loss.lambda = lambda;
            c.loss.delta = delta;
            const TrainedModel m = train(train_set, c);
            rows.push_back({lambda, delta, evaluate(m, test_set).mae});
        }
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "lambda,delta,mae\n";
    for (const SweepRow& r : rows) {
        out += format_real(r.lambda) + "," + format_real(r.delta) + "," + format_real(r.mae) + "\n";
    }
    return out;
}

inline std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,loss,train_mae\n";
    for (const EpochStats& e : history) {
        out += std::to_string(e.epoch) + "," + format_real(e.loss) + "," + format_real(e.train_mae) + "\n";
    }
    return out;
}

}  // namespace metaage
