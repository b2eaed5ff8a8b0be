#include "metaage/optim.hpp"
#include "metaage/training.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace metaage;

namespace {

Dataset tiny_synth(std::size_t identities = 16, std::size_t per = 4) {
    SynthConfig c;
    c.n_identities = identities;
    c.samples_per_identity = per;
    c.K = 21;
    c.D = 12;
    c.F = 6;
    c.offset_max = 3;
    c.rbf_width = 1.5;
    return synth_generate(c).first;
}

TrainConfig tiny_config(const Dataset& ds, ModelKind kind) {
    TrainConfig c;
    c.dims = {ds.K, ds.D, ds.F, 16};
    c.model_kind = kind;
    c.epochs = 2;
    c.batch_size = 16;
    c.adam.lr = 1e-3;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST(Adam, ZeroGradientsLeaveParamsAndDecayMoments) {
    std::vector<double> w = {1.0, -2.0}, g = {0.5, -1.0};
    AdamState st;
    const AdamConfig cfg;
    const std::vector<ParamBlock> blocks = {{"w", w, g}};
    adam_step(blocks, st, cfg);
    const std::vector<double> after_first = w, m1 = st.first[0], v1 = st.second[0];
    g = {0.0, 0.0};
    adam_step(blocks, st, cfg);
    // params still move from the remaining momentum, but the moments decay
    EXPECT_DOUBLE_EQ(st.first[0][0], 0.9 * m1[0]);
    EXPECT_DOUBLE_EQ(st.second[0][1], 0.999 * v1[1]);

    std::vector<double> z = {3.0}, zg = {0.0};
    AdamState fresh;
    const std::vector<ParamBlock> zb = {{"z", z, zg}};
    adam_step(zb, fresh, cfg);
    EXPECT_EQ(z[0], 3.0);
    (void)after_first;
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> w = {0.0}, g = {1.0};
    AdamState st;
    AdamConfig cfg;
    cfg.lr = 1e-3;
    const std::vector<ParamBlock> blocks = {{"w", w, g}};
    adam_step(blocks, st, cfg);
    // bias-corrected moments are g and g^2, so the step is lr * g / (|g| + eps)
    EXPECT_NEAR(w[0], -1e-3 / (1.0 + cfg.epsilon), 1e-18);
    EXPECT_EQ(st.step, 1u);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
    auto run = [] {
        std::vector<double> w = {1.0, 2.0, 3.0}, g(3);
        AdamState st;
        const std::vector<ParamBlock> blocks = {{"w", w, g}};
        for (int t = 0; t < 50; ++t) {
            for (std::size_t i = 0; i < 3; ++i) g[i] = std::sin(w[i] * (t + 1));
            adam_step(blocks, st, AdamConfig{});
        }
        return w;
    };
    EXPECT_EQ(run(), run());
}

TEST(Adam, Errors) {
    std::vector<double> w = {1.0}, g = {std::nan("")}, g2 = {1.0, 2.0};
    AdamState st;
    EXPECT_THROW(adam_step(std::vector<ParamBlock>{{"w", w, g}}, st, AdamConfig{}), std::domain_error);
    AdamState st2;
    EXPECT_THROW(adam_step(std::vector<ParamBlock>{{"w", w, g2}}, st2, AdamConfig{}), ShapeError);
    AdamConfig bad;
    bad.lr = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

TEST(TrainConfig, DefaultsAndValidation) {
    const TrainConfig c;
    EXPECT_EQ(c.adam.lr, 1e-4);
    EXPECT_EQ(c.batch_size, 64u);
    EXPECT_EQ(c.epochs, 60);
    EXPECT_EQ(c.adam.epsilon, 1e-8);
    TrainConfig bad = c;
    bad.epochs = 0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = c;
    bad.batch_size = 1;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Train, OneEpochSmokeOnSixtyFourSamples) {
    const Dataset ds = tiny_synth(16, 4);
    ASSERT_EQ(ds.size(), 64u);
    for (ModelKind kind : {ModelKind::metaage, ModelKind::global, ModelKind::concat}) {
        TrainConfig c = tiny_config(ds, kind);
        c.epochs = 1;
        const TrainedModel m = train(ds, c);
        ASSERT_EQ(m.history.size(), 1u);
        EXPECT_TRUE(std::isfinite(m.history[0].loss));
        EXPECT_TRUE(std::isfinite(m.history[0].train_mae));
    }
}

TEST(Train, ZeroEpochsRejected) {
    const Dataset ds = tiny_synth();
    TrainConfig c = tiny_config(ds, ModelKind::metaage);
    c.epochs = 0;
    EXPECT_THROW(train(ds, c), std::invalid_argument);
}

TEST(Train, DimensionMismatchRejected) {
    const Dataset ds = tiny_synth();
    TrainConfig c = tiny_config(ds, ModelKind::metaage);
    c.dims.D += 1;
    EXPECT_THROW(train(ds, c), ShapeError);
}

TEST(Train, FrozenResidualEqualsGlobalModel) {
    const Dataset ds = tiny_synth();
    TrainConfig a = tiny_config(ds, ModelKind::metaage);
    a.freeze_residual_output = true;
    a.use_adapter = true;
    TrainConfig b = tiny_config(ds, ModelKind::global);
    b.use_adapter = true;
    const TrainedModel ma = train(ds, a), mb = train(ds, b);
    EXPECT_LT((ma.meta.W_common - mb.meta.W_common).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(ma.meta.residual.output.weight.isZero(0.0));
    const std::vector<double> pa = predict_dataset(ma, ds), pb = predict_dataset(mb, ds);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_NEAR(pa[i], pb[i], 1e-12);
    }
}

TEST(Train, SeedDeterminismToTheLastBit) {
    const Dataset ds = tiny_synth();
    for (ModelKind kind : {ModelKind::metaage, ModelKind::concat}) {
        TrainConfig c = tiny_config(ds, kind);
        c.use_adapter = true;
        const EvalResult a = evaluate(train(ds, c), ds), b = evaluate(train(ds, c), ds);
        EXPECT_EQ(a.mae, b.mae);
        EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    }
}

TEST(Train, NeverMutatesTheDataset) {
    const Dataset ds = tiny_synth();
    const std::string before = encode_features(ds);
    train(ds, tiny_config(ds, ModelKind::metaage));
    EXPECT_EQ(encode_features(ds), before);
}

TEST(Train, LabelDistributionNeedsSigmas) {
    Dataset ds = tiny_synth();
    TrainConfig c = tiny_config(ds, ModelKind::metaage);
    c.loss.target_mode = TargetMode::label_distribution;
    EXPECT_NO_THROW(train(ds, c));
    ds.records[5].sigma.reset();
    EXPECT_THROW(train(ds, c), std::invalid_argument);
}

TEST(Train, NonFiniteValuesAbortWithContext) {
    Dataset ds = tiny_synth();
    for (auto& r : ds.records) {
        r.age_feat *= 1e20;
    }
    TrainConfig c = tiny_config(ds, ModelKind::global);
    c.adam.lr = 1e300;  // first step pushes the weights to ~1e300, so the next scores overflow
    try {
        train(ds, c);
        FAIL() << "expected TrainingError";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 0, batch 1"), std::string::npos) << e.what();
    }
}

TEST(Train, LossDecreasesOnTinyProblem) {
    const Dataset ds = tiny_synth();
    TrainConfig c = tiny_config(ds, ModelKind::metaage);
    c.epochs = 15;
    const TrainedModel m = train(ds, c);
    EXPECT_LT(m.history.back().loss, m.history.front().loss);
}

TEST(Train, FullGradientCheckAllKinds) {
    for (ModelKind kind : {ModelKind::metaage, ModelKind::global, ModelKind::concat}) {
        int accepted = 0;
        for (std::uint64_t seed = 100; accepted < 4; ++seed) {
            const TargetMode mode = seed % 2 ? TargetMode::hard_onehot : TargetMode::label_distribution;
            auto p = metaage::testing::make_tiny_problem(kind, seed, true, mode);
            if (metaage::testing::kink_margin(p) < 1e-3) {
                continue;
            }
            ++accepted;
            const GradCheckReport r = metaage::testing::full_grad_check(p, 1e-4);
            EXPECT_TRUE(r.passed()) << to_string(kind) << " seed " << seed << ": " << r.failing_param << "["
                                    << r.failing_index << "] " << r.max_rel_err;
        }
    }
}

TEST(Evaluate, ZeroGlobalWeightsPredictMidpoint) {
    const Dataset ds = tiny_synth();
    TrainedModel m = init_model(tiny_config(ds, ModelKind::global));
    m.meta.W_common.setZero();
    for (double p : predict_dataset(m, ds)) {
        EXPECT_NEAR(p, (ds.K - 1) / 2.0, 1e-12);
    }
}

TEST(Evaluate, SideEffectFree) {
    const Dataset ds = tiny_synth();
    const TrainedModel m = train(ds, tiny_config(ds, ModelKind::metaage));
    const std::string before = to_json(evaluate(m, ds)).dump();
    EXPECT_EQ(to_json(evaluate(m, ds)).dump(), before);
    EXPECT_TRUE(evaluate(m, ds).eps_error.has_value());
}

TEST(Evaluate, OverfitTinyBatchReachesLowMae) {
    const Dataset all = tiny_synth();
    const Dataset ds = all.subset({0, 5, 10, 15, 20, 25, 30, 35});
    TrainConfig c = tiny_config(ds, ModelKind::metaage);
    c.batch_size = 8;
    c.epochs = 500;
    c.adam.lr = 1e-2;
    c.use_adapter = true;
    const TrainedModel m = train(ds, c);
    EXPECT_LT(m.history.back().train_mae, 0.5);
}

TEST(Sweep, SingleLambdaZeroEqualsPlainRun) {
    const Dataset ds = tiny_synth();
    const Split s = split(ds, 0.75, 1, true);
    TrainConfig c = tiny_config(s.train, ModelKind::metaage);
    const auto rows = lambda_delta_sweep(s.train, s.test, c, {0.0}, {2.0});
    ASSERT_EQ(rows.size(), 1u);
    c.loss.lambda = 0.0;
    EXPECT_EQ(rows[0].mae, evaluate(train(s.train, c), s.test).mae);
    EXPECT_EQ(rows[0].lambda, 0.0);
    EXPECT_EQ(rows[0].delta, 2.0);
}

TEST(Sweep, GridOrderAndCsv) {
    const Dataset ds = tiny_synth();
    const Split s = split(ds, 0.75, 1, true);
    TrainConfig c = tiny_config(s.train, ModelKind::global);
    c.epochs = 1;
    const auto rows = lambda_delta_sweep(s.train, s.test, c, {0.0, 0.2}, {1.0, 2.0});
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[1].lambda, 0.0);
    EXPECT_EQ(rows[1].delta, 2.0);
    EXPECT_EQ(rows[2].lambda, 0.2);
    const std::string csv = sweep_csv(rows);
    EXPECT_EQ(csv.substr(0, 17), "lambda,delta,mae\n");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    EXPECT_THROW(lambda_delta_sweep(s.train, s.test, c, {}, {2.0}), std::invalid_argument);
}

TEST(History, CsvHeader) {
    const std::string csv = history_csv({{0, 1.5, 2.5}});
    EXPECT_EQ(csv, "epoch,loss,train_mae\n0,1.5,2.5\n");
}

TEST(ModelKind, ParseRoundTrip) {
    for (ModelKind k : {ModelKind::metaage, ModelKind::global, ModelKind::concat}) {
        EXPECT_EQ(parse_model_kind(to_string(k)), k);
    }
    EXPECT_THROW(parse_model_kind("resnet"), std::invalid_argument);
}
