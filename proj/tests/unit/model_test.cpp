#include "oracles.hpp"

#include "dmmv/errors.hpp"
#include "dmmv/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace dmmv;
using namespace dmmv::model;

namespace {

ModelConfig small_config(Variant v) {
    ModelConfig c;
    c.variant = v;
    c.lookback = 50;
    c.horizon = 12;
    c.period = 6;
    c.mae.image_size = 8;
    c.mae.patch_size = 2;
    c.mae.enc_dim = 8;
    c.mae.enc_depth = 1;
    c.mae.enc_heads = 2;
    c.mae.dec_dim = 8;
    c.mae.dec_depth = 1;
    c.mae.dec_heads = 2;
    c.mae.mlp_ratio = 2;
    c.patch_transformer = {4, 8, 1, 2, 2};
    return c;
}

/// Returns its input untouched: masked patches already hold the true pixels.
struct IdentityReconstructor final : vision::ImageReconstructor {
    ad::Var reconstruct(const ad::Tensor& pixels, const vision::PatchMask&) const override {
        return ad::constant(pixels);
    }
};

/// Masked region set to zero in normalized space.
struct ZeroFillReconstructor final : vision::ImageReconstructor {
    ad::Var reconstruct(const ad::Tensor& pixels, const vision::PatchMask& mask) const override {
        const int s = static_cast<int>(pixels.shape[1]);
        const auto take = vision::pixel_mask(mask, static_cast<int>(pixels.shape[0]), s, s / mask.grid());
        ad::Tensor out = pixels;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            if ((*take)[i]) out[i] = 0.0;
        }
        return ad::constant(std::move(out));
    }
};

void zero_numerical(DmmvModel& m) {
    for (auto* p : m.store().all()) {
        if (p->group == ad::ParamGroup::numerical) p->value.fill(0.0);
    }
}

} // namespace

TEST(MovingAverage, HandCase) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6};
    const std::vector<double> expected{4.0 / 3, 2, 3, 4, 5, 17.0 / 3};
    const auto oracle_trend = oracle::padded_moving_average(x, 2);
    const auto r = moving_average_decompose(x, 2);
    for (std::size_t i = 0; i < x.size(); ++i) {
        EXPECT_NEAR(oracle_trend[i], expected[i], 1e-15);
        EXPECT_NEAR(r.trend[i], expected[i], 1e-12);
    }
}

TEST(MovingAverage, ConstantAndAdditivity) {
    const auto c = moving_average_decompose(std::vector<double>(30, 4.2), 24);
    for (std::size_t i = 0; i < 30; ++i) {
        EXPECT_NEAR(c.trend[i], 4.2, 1e-12);
        EXPECT_NEAR(c.seasonal[i], 0.0, 1e-12);
    }
    std::mt19937_64 rng(1);
    for (int p : {1, 2, 5, 24, 25}) {
        const auto x = oracle::random_vector(97, rng, -3, 3);
        const auto r = moving_average_decompose(x, p);
        const auto expected = oracle::padded_moving_average(x, p);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_NEAR(r.trend[i] + r.seasonal[i], x[i], 1e-12);
            EXPECT_NEAR(r.trend[i], expected[i], 1e-12);
        }
    }
}

TEST(Gate, Values) {
    EXPECT_EQ(gate_value(0.0), 0.5);
    EXPECT_NEAR(gate_value(std::log(3.0)), 0.75, 1e-15);
    double prev = 0;
    for (double w = -40; w <= 40; w += 0.5) {
        const double g = gate_value(w);
        EXPECT_GE(g, prev);
        EXPECT_GE(g, 0.0);
        EXPECT_LE(g, 1.0);
        prev = g;
    }
    EXPECT_GT(gate_value(40.0), 1 - 1e-15);
}

TEST(Fuse, ConvexContracts) {
    std::mt19937_64 rng(2);
    const auto a = oracle::random_vector(20, rng), b = oracle::random_vector(20, rng);
    const auto same = fuse(a, a, 0.3);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(same[i], a[i], 1e-15);
    const auto neg = [&] {
        auto v = a;
        for (auto& x : v) x = -x;
        return v;
    }();
    for (double v : fuse(a, neg, 0.5)) EXPECT_EQ(v, 0.0);
    for (double g : {0.01, 0.3, 0.5, 0.97}) {
        const auto out = fuse(a, b, g);
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_GE(out[i], std::min(a[i], b[i]));
            EXPECT_LE(out[i], std::max(a[i], b[i]));
        }
    }
    EXPECT_THROW(fuse(a, std::vector<double>(3), 0.5), ShapeMismatch);

    ad::ParameterStore store;
    auto& w = store.add("w", ad::Tensor({1}, {0.4}), ad::ParamGroup::gate, false);
    const auto fused = fuse(ad::constant(ad::Tensor::row(a)), ad::constant(ad::Tensor::row(b)), ad::param(w)).value();
    const auto plain = fuse(a, b, gate_value(0.4));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(fused[i], plain[i], 1e-15);
}

TEST(Config, RoundTripAndUnknownKeys) {
    auto c = small_config(Variant::S);
    c.fusion = Fusion::sum;
    c.mask_mode = MaskMode::random;
    c.numerical = NumKind::patch_transformer;
    const auto back = ModelConfig::from_map(c.to_map());
    EXPECT_EQ(back.to_map(), c.to_map());
    EXPECT_THROW(ModelConfig::from_map({{"no_such_key", "1"}}), ConfigError);
    EXPECT_THROW(ModelConfig::from_map({{"variant", "Z"}}), ConfigError);
    auto bad = small_config(Variant::A);
    bad.lookback = 10;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Assembly, MetadataDescribesTheModel) {
    DmmvModel m(small_config(Variant::A));
    EXPECT_EQ(config_from_metadata(m.metadata()).to_map(), m.config().to_map());
    EXPECT_THROW(config_from_metadata({{"other", "x"}}), ConfigMismatch);
}

TEST(Assembly, OutputLengthAndDeterminism) {
    std::mt19937_64 rng(3);
    const auto x = oracle::random_vector(50, rng);
    for (auto v : {Variant::S, Variant::A}) {
        DmmvModel a(small_config(v)), b(small_config(v));
        const auto ya = a.predict(x);
        EXPECT_EQ(ya.size(), 12u);
        EXPECT_EQ(b.predict(x), ya);
        EXPECT_EQ(a.predict(x), ya);
    }
    DmmvModel m(small_config(Variant::A));
    EXPECT_THROW(m.predict(oracle::random_vector(49, rng)), ShapeMismatch);
}

TEST(Assembly, GateParameterIsASingleScalarAtHalf) {
    DmmvModel m(small_config(Variant::A));
    EXPECT_EQ(m.gate_param().value.numel(), 1u);
    EXPECT_EQ(m.gate_param().group, ad::ParamGroup::gate);
    EXPECT_EQ(m.gate(), 0.5);
}

TEST(VariantS, StubComposition) {
    std::mt19937_64 rng(4);
    const auto x = oracle::random_vector(50, rng);
    DmmvModel m(small_config(Variant::S));
    m.replace_visual(std::make_unique<ZeroFillReconstructor>());
    zero_numerical(m);
    const auto y = m.predict(x);
    const auto parts = moving_average_decompose(x, 6);
    const double mean = std::accumulate(parts.seasonal.begin() + 2, parts.seasonal.end(), 0.0) / 48.0;
    for (double v : y) EXPECT_NEAR(v, 0.5 * mean, 1e-12);
}

TEST(VariantS, DecomposeIsAdditive) {
    std::mt19937_64 rng(5);
    DmmvModel m(small_config(Variant::S));
    for (int i = 0; i < 20; ++i) {
        const auto x = oracle::random_vector(50, rng);
        const auto d = m.decompose(x);
        for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(d.trend[t] + d.seasonal[t], x[t], 1e-9);
    }
}

TEST(VariantA, PerfectBackcastLeavesOnlyTheBias) {
    std::mt19937_64 rng(6);
    // 66 = 8 periods of 8 plus 2 dropped values: the backcast image is the raw 8x8 grid.
    auto c = small_config(Variant::A);
    c.lookback = 66;
    c.period = 8;
    const auto x = oracle::random_vector(66, rng);
    DmmvModel m(c);
    m.replace_visual(std::make_unique<IdentityReconstructor>());
    auto r = m.forward(x);
    for (double v : r.numerical_input.value().data) EXPECT_NEAR(v, 0.0, 1e-9);
    const auto* lin = dynamic_cast<const numeric::LinearForecaster*>(m.numerical());
    ASSERT_NE(lin, nullptr);
    const auto& bias = lin->bias().value;
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(r.trend.value()[i], bias[i], 1e-9);
}

TEST(VariantA, ResidualIdentity) {
    std::mt19937_64 rng(7);
    DmmvModel m(small_config(Variant::A));
    const auto x = oracle::random_vector(50, rng);
    const auto d = m.decompose(x);
    ASSERT_EQ(d.backcast.size(), 48u);
    for (std::size_t t = 0; t < 48; ++t) EXPECT_NEAR(d.trend[t] + d.backcast[t], x[t + 2], 1e-12);
}

TEST(VariantA, NoMaskGivesZeroResidual) {
    std::mt19937_64 rng(8);
    auto c = small_config(Variant::A);
    c.mask_mode = MaskMode::none;
    DmmvModel m(c);
    for (int i = 0; i < 10; ++i) {
        const auto r = m.forward(oracle::random_vector(50, rng, -10, 10));
        for (double v : r.numerical_input.value().data) EXPECT_EQ(v, 0.0);
    }
}

TEST(VariantA, SumFusionIsExactAddition) {
    std::mt19937_64 rng(9);
    auto c = small_config(Variant::A);
    c.fusion = Fusion::sum;
    DmmvModel m(c);
    const auto r = m.forward(oracle::random_vector(50, rng));
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_EQ(r.output.value()[i], r.season.value()[i] + r.trend.value()[i]);
    }
}

TEST(VariantA, WithoutDecompositionBothSeeTheRawWindow) {
    std::mt19937_64 rng(10);
    auto c = small_config(Variant::A);
    c.decomposition = false;
    DmmvModel m(c);
    const auto x = oracle::random_vector(50, rng);
    const auto r = m.forward(x);
    EXPECT_EQ(r.numerical_input.value().data, x);
    EXPECT_EQ(r.imaged_input, x);
}

TEST(Branches, SingleViewAssemblies) {
    auto v = small_config(Variant::A);
    v.branches = Branches::visual_only;
    DmmvModel vis(v);
    EXPECT_EQ(vis.numerical(), nullptr);
    auto n = small_config(Variant::A);
    n.branches = Branches::numerical_only;
    DmmvModel num(n);
    EXPECT_EQ(num.mae(), nullptr);
    for (auto* p : num.store().all()) {
        EXPECT_NE(p->group, ad::ParamGroup::visual_norm);
        EXPECT_NE(p->group, ad::ParamGroup::visual_other);
    }
}
