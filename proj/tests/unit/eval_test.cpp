#include "oracles.hpp"

#include "dmmv/errors.hpp"
#include "dmmv/eval.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>

using namespace dmmv;
using namespace dmmv::eval;

namespace {

std::vector<codec::UnivariateWindow> random_windows(std::size_t n, std::size_t h, std::mt19937_64& rng,
                                                    std::vector<std::vector<double>>& targets) {
    std::normal_distribution<double> d;
    std::vector<codec::UnivariateWindow> out(n);
    targets.clear();
    for (std::size_t i = 0; i < n; ++i) {
        out[i].lookback.assign(4, 0.0);
        for (std::size_t t = 0; t < h; ++t) out[i].target.push_back(d(rng));
        out[i].variate_id = static_cast<int>(i % 2);
        targets.push_back(out[i].target);
    }
    return out;
}

ExperimentSpec tiny_spec() {
    ExperimentSpec s;
    s.model.lookback = 36;
    s.model.horizon = 6;
    s.model.period = 6;
    s.model.mae.image_size = 8;
    s.model.mae.patch_size = 2;
    s.model.mae.enc_dim = 8;
    s.model.mae.enc_depth = 1;
    s.model.mae.enc_heads = 2;
    s.model.mae.dec_dim = 8;
    s.model.mae.dec_depth = 1;
    s.model.mae.dec_heads = 2;
    s.model.mae.mlp_ratio = 2;
    s.model.patch_transformer = {4, 8, 1, 2, 2};
    s.train.stage1 = {0.01, 2, 1};
    s.train.stage2 = {0.005, 1, 1};
    s.train.warmup.epochs = 0;
    s.train.batch_size = 16;
    s.train_stride = 4;
    s.eval_stride = 4;
    return s;
}

} // namespace

TEST(Score, MatchesDirectSums) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    std::vector<std::vector<double>> targets;
    const auto windows = random_windows(37, 9, rng, targets);
    std::vector<std::vector<double>> preds(37, std::vector<double>(9));
    for (auto& row : preds)
        for (auto& v : row) v = d(rng);
    const auto r = score(preds, windows);
    EXPECT_NEAR(r.mse, oracle::direct_mse(preds, targets), 1e-12);
    EXPECT_NEAR(r.mae, oracle::direct_mae(preds, targets), 1e-12);
    EXPECT_EQ(r.windows, 37u);
    EXPECT_EQ(r.mse_per_step.size(), 9u);
    EXPECT_EQ(r.scale, "standardized");
}

TEST(Score, RawScaleMultipliesBySquaredStd) {
    std::mt19937_64 rng(6);
    std::vector<std::vector<double>> targets;
    const auto windows = random_windows(10, 3, rng, targets);
    std::vector<std::vector<double>> preds(10, std::vector<double>(3, 0.25));
    data::StandardStats stats{{5.0, -1.0}, {2.0, 2.0}};
    const auto std_r = score(preds, windows);
    const auto raw_r = score(preds, windows, &stats);
    EXPECT_NEAR(raw_r.mse, 4.0 * std_r.mse, 1e-12);
    EXPECT_NEAR(raw_r.mae, 2.0 * std_r.mae, 1e-12);
    EXPECT_EQ(raw_r.scale, "raw");
}

TEST(Score, Contracts) {
    std::mt19937_64 rng(7);
    std::vector<std::vector<double>> targets;
    const auto windows = random_windows(3, 2, rng, targets);
    EXPECT_THROW(score({{0, 0}}, windows), ShapeMismatch);
    EXPECT_THROW(score({{0, 0}, {0, 0}, {0}}, windows), ShapeMismatch);
    EXPECT_THROW(score({}, {}), EmptySplit);
}

TEST(Evaluate, ZeroModelScoresTargetEnergy) {
    auto spec = tiny_spec();
    spec.model.branches = model::Branches::numerical_only;
    model::DmmvModel m(spec.model);
    for (auto* p : m.store().all()) p->value.fill(0.0);
    const auto s = data::synth_trend_sine(120, 6, 0.0, 1.0, 0.2, 2);
    const auto windows = data::windows(s, 36, 6, 5);
    std::vector<std::vector<double>> zeros, targets;
    for (const auto& w : windows) {
        zeros.emplace_back(6, 0.0);
        targets.push_back(w.target);
    }
    const auto r = evaluate(m, windows);
    EXPECT_NEAR(r.mse, oracle::direct_mse(zeros, targets), 1e-12);
}

TEST(Prepare, WindowsPerSplit) {
    const auto spec = tiny_spec();
    const auto s = data::synth_decaying_sine(400, 6);
    const auto d = prepare(s, spec);
    EXPECT_EQ(d.train.size(), data::window_count(240, 36, 6, 4));
    EXPECT_EQ(d.val.size(), data::window_count(80, 36, 6, 4));
    EXPECT_EQ(d.test.size(), data::window_count(80, 36, 6, 4));
    EXPECT_THROW(prepare(data::synth_decaying_sine(100, 6), spec), EmptySplit);
}

TEST(Sweep, OneRowPerLengthSeedAndConfig) {
    auto spec = tiny_spec();
    SweepSpec sweep;
    sweep.segment_lengths = {6, 12};
    sweep.seeds = {0, 1};
    sweep.include_dmmv_a = true;
    sweep.workers = 2;
    const auto rows = bias_sweep(data::synth_decaying_sine(300, 6), spec, sweep);
    ASSERT_EQ(rows.size(), 8u);
    EXPECT_EQ(rows[0].config, "visual");
    EXPECT_EQ(rows[1].config, "dmmv_a");
    EXPECT_EQ(rows[2].seed, 1u);
    EXPECT_EQ(rows[4].segment_length, 12);
    for (const auto& r : rows) EXPECT_TRUE(std::isfinite(r.mse));
    const auto means = mean_over_seeds(rows);
    ASSERT_EQ(means.size(), 4u);
    EXPECT_NEAR(means[0].mse, (rows[0].mse + rows[2].mse) / 2, 1e-15);
    EXPECT_EQ(means[0].seed, 2u);
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
    auto spec = tiny_spec();
    SweepSpec sweep;
    sweep.segment_lengths = {6, 12};
    sweep.seeds = {3};
    const auto series = data::synth_decaying_sine(300, 6);
    sweep.workers = 1;
    const auto a = bias_sweep(series, spec, sweep);
    sweep.workers = 2;
    const auto b = bias_sweep(series, spec, sweep);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].mse, b[i].mse);
}

TEST(Ablation, ModesMapToConfigs) {
    const model::ModelConfig base;
    EXPECT_EQ(apply_ablation(base, "a").numerical, model::NumKind::patch_transformer);
    EXPECT_EQ(apply_ablation(base, "c").fusion, model::Fusion::sum);
    EXPECT_EQ(apply_ablation(base, "d").mask_mode, model::MaskMode::none);
    EXPECT_EQ(apply_ablation(base, "e").mask_mode, model::MaskMode::random);
    EXPECT_TRUE(apply_ablation(base, "f").freeze_visual);
    EXPECT_FALSE(apply_ablation(base, "g").decomposition);
    EXPECT_EQ(apply_ablation(base, "base").to_map(), apply_ablation(base, "base").to_map());
    EXPECT_THROW(apply_ablation(base, "z"), ConfigError);
    EXPECT_EQ(ablation_modes().size(), 7u);
}

TEST(Ablation, RowsPerModeAndSeed) {
    const auto rows = ablation_suite(data::synth_decaying_sine(300, 6), tiny_spec(), {"base", "c"}, {0, 1});
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].config, "base");
    EXPECT_EQ(rows[3].config, "c");
    std::ostringstream out;
    write_rows_csv(out, rows);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "config,segment_length,seed,mse,mae,gate");
}

TEST(ParallelFor, RunsEveryJobOnceAndPropagatesErrors) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw ConfigError("x"); }), ConfigError);
}
