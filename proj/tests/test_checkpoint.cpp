#include "metaage/checkpoint.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace metaage;

namespace {

TrainedModel tiny_model(ModelKind kind, bool adapter) {
    auto p = metaage::testing::make_tiny_problem(kind, 5, adapter, TargetMode::hard_onehot);
    // Touch the running statistics so they are part of what is checked.
    batch_loss(p.model, p.identity, p.age, p.targets, p.loss, false);
    return p.model;
}

std::size_t parse_offset(std::string_view bytes) {
    try {
        decode_model(bytes);
    } catch (const ParseError& e) {
        return e.offset();
    }
    ADD_FAILURE() << "expected a ParseError";
    return 0;
}

}  // namespace

TEST(Mapc, ParamsRoundTripIsByteIdentical) {
    MetaLearnerParams p = init_params({5, 8, 6, 16}, 3);
    p.residual.bn.running_var(2) = 0.25;
    const std::string bytes = encode_params(p);
    const MetaLearnerParams back = decode_params(bytes);
    EXPECT_EQ(back.dims, p.dims);
    EXPECT_EQ(back.W_common, p.W_common);
    EXPECT_EQ(back.residual.bn.running_var, p.residual.bn.running_var);
    EXPECT_EQ(encode_params(back), bytes);
}

TEST(Mapc, ModelRoundTripAllKinds) {
    for (ModelKind kind : {ModelKind::metaage, ModelKind::global, ModelKind::concat}) {
        for (bool adapter : {false, true}) {
            const TrainedModel m = tiny_model(kind, adapter);
            const std::string bytes = encode_model(m);
            const TrainedModel back = decode_model(bytes);
            EXPECT_EQ(back.kind, kind);
            EXPECT_EQ(back.adapter.has_value(), adapter);
            EXPECT_EQ(encode_model(back), bytes);
        }
    }
}

TEST(Mapc, RoundTripPreservesPredictions) {
    const Dataset ds = synth_generate([] {
                           SynthConfig c;
                           c.n_identities = 5;
                           c.samples_per_identity = 3;
                           c.K = 5;
                           c.D = 8;
                           c.F = 6;
                           c.offset_max = 1;
                           return c;
                       }())
                           .first;
    for (ModelKind kind : {ModelKind::metaage, ModelKind::global, ModelKind::concat}) {
        const TrainedModel m = tiny_model(kind, true);
        const auto path = (std::filesystem::temp_directory_path() / "metaage_ckpt.mapc").string();
        write_model(path, m);
        EXPECT_EQ(predict_dataset(read_model(path), ds), predict_dataset(m, ds));
        std::filesystem::remove(path);
    }
}

TEST(Mapc, VersionOneReadsAsMetaAgeModel) {
    const MetaLearnerParams p = init_params({5, 8, 6, 16}, 3);
    const TrainedModel m = decode_model(encode_params(p));
    EXPECT_EQ(m.kind, ModelKind::metaage);
    EXPECT_FALSE(m.adapter.has_value());
    EXPECT_EQ(m.meta.W_common, p.W_common);
}

TEST(Mapc, CorruptionsGiveOffsetBearingErrors) {
    const std::string good = encode_model(tiny_model(ModelKind::metaage, true));

    std::string bad = good;
    bad.replace(0, 4, "MAPX");
    EXPECT_EQ(parse_offset(bad), 0u);

    bad = good;
    bad[4] = 9;
    EXPECT_EQ(parse_offset(bad), 4u);

    bad = good;
    bad[5] = 7;
    EXPECT_EQ(parse_offset(bad), 5u);

    bad = good;
    bad[6] = 2;
    EXPECT_EQ(parse_offset(bad), 6u);

    bad = good.substr(0, good.size() - 8);
    EXPECT_EQ(parse_offset(bad), 4u + 3u + 16u);  // payload length checked right after the header

    bad = good + "x";
    EXPECT_EQ(parse_offset(bad), 4u + 3u + 16u);

    bad = good;
    const double nan = std::nan("");
    const std::size_t at = 4 + 3 + 16 + 8 * 7;  // W_common element 7
    std::memcpy(bad.data() + at, &nan, 8);
    EXPECT_EQ(parse_offset(bad), at);
}

TEST(Mapc, NegativeRunningVarianceRejected) {
    TrainedModel m = tiny_model(ModelKind::metaage, false);
    m.meta.residual.bn.running_var(0) = -1.0;
    EXPECT_THROW(decode_model(encode_model(m)), ParseError);
}

TEST(Mapc, AbsurdDimsFailBeforeAllocating) {
    std::string bytes = encode_model(tiny_model(ModelKind::metaage, false));
    const std::uint32_t huge = 0xFFFFFFFFu;
    std::memcpy(bytes.data() + 7, &huge, 4);
    std::memcpy(bytes.data() + 11, &huge, 4);
    EXPECT_THROW(decode_model(bytes), ParseError);
}

TEST(Mapc, MissingFileIsRuntimeError) {
    EXPECT_THROW(read_model("/nonexistent/dir/model.mapc"), std::runtime_error);
}

TEST(Mapc, SameSeedTrainingGivesIdenticalCheckpoints) {
    SynthConfig sc;
    sc.n_identities = 10;
    sc.samples_per_identity = 4;
    sc.K = 11;
    sc.D = 8;
    sc.F = 5;
    sc.offset_max = 2;
    const Dataset ds = synth_generate(sc).first;
    TrainConfig c;
    c.dims = {11, 8, 5, 12};
    c.epochs = 2;
    c.batch_size = 8;
    c.use_adapter = true;
    EXPECT_EQ(encode_model(train(ds, c)), encode_model(train(ds, c)));
}
