// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run every criterion
//   acceptance --criterion N   run criterion N only
//
// Exit status is 0 only when every selected criterion passes.

#include "gradcheck.hpp"
#include "oracles.hpp"

#include "dmmv/codec.hpp"
#include "dmmv/data.hpp"
#include "dmmv/errors.hpp"
#include "dmmv/eval.hpp"
#include "dmmv/model.hpp"
#include "dmmv/numeric.hpp"
#include "dmmv/trainer.hpp"
#include "dmmv/vision.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace dmmv;

namespace {

// ---- pinned tolerances ------------------------------------------------------

constexpr double kGradRelTol = 1e-4;
constexpr double kExactTol = 1e-9;
constexpr double kMultipleTol = 1e-6;
constexpr double kMetricTol = 1e-12;
constexpr int kSplitRowSlack = 1;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << "[failed: " << what << "] ";
        }
    }
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

/// Returns a fixed image: the true pixels at every masked patch, the input elsewhere.
struct PerfectReconstructor final : vision::ImageReconstructor {
    explicit PerfectReconstructor(std::vector<double> truth) : truth_(std::move(truth)) {}
    ad::Var reconstruct(const ad::Tensor& pixels, const vision::PatchMask& mask) const override {
        const int s = static_cast<int>(pixels.shape[1]);
        const auto take = vision::pixel_mask(mask, static_cast<int>(pixels.shape[0]), s, s / mask.grid());
        ad::Tensor out = pixels;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            if ((*take)[i]) out[i] = truth_[i];
        }
        return ad::constant(std::move(out));
    }

private:
    std::vector<double> truth_;
};

vision::MaeConfig tiny_mae(int image_size, int patch_size) {
    vision::MaeConfig c;
    c.image_size = image_size;
    c.patch_size = patch_size;
    c.enc_dim = 8;
    c.enc_depth = 1;
    c.enc_heads = 2;
    c.dec_dim = 8;
    c.dec_depth = 1;
    c.dec_heads = 2;
    c.mlp_ratio = 2;
    return c;
}

/// Toy visual model used by the synthetic experiments.
vision::MaeConfig experiment_mae() {
    vision::MaeConfig c;
    c.image_size = 32;
    c.patch_size = 8;
    c.enc_dim = 32;
    c.enc_depth = 2;
    c.dec_dim = 32;
    c.dec_depth = 1;
    return c;
}

// ---- 1: gradients -----------------------------------------------------------

void criterion_gradients(Outcome& out) {
    using namespace ad;
    std::mt19937_64 rng(2024);
    double worst = 0;
    std::string worst_case;
    int checks = 0;
    const auto run = [&](const std::string& name, ParameterStore& store, const std::function<Var()>& loss) {
        const auto r = gradcheck::check_gradients(store, loss);
        ++checks;
        if (r.worst > worst) {
            worst = r.worst;
            worst_case = name + ":" + r.worst_param;
        }
    };

    ParameterStore ops;
    const auto make = [&](const std::string& name, Shape shape, double lo = -1, double hi = 1) -> Parameter& {
        const auto n = shape_numel(shape);
        return ops.add(name, Tensor(std::move(shape), oracle::random_vector(n, rng, lo, hi)), ParamGroup::numerical);
    };
    auto& a = make("a", {3, 4});
    auto& b = make("b", {3, 4});
    auto& row = make("row", {4});
    auto& one = make("one", {1});
    auto& right = make("right", {4, 2});
    auto& wide = make("wide", {2, 4});
    auto& tall = make("tall", {3, 2});
    auto& row2 = make("row2", {1, 4});
    auto& shift = make("shift", {4});
    auto& bias2 = make("bias2", {2});
    auto& logits = make("logits", {3, 4}, -3, 3);
    std::map<std::size_t, std::vector<double>> directions;
    const auto project = [&](const Var& y) {
        auto& w = directions[y.numel()];
        if (w.empty()) w = oracle::random_vector(y.numel(), rng);
        return sum(mul(reshape(y, {1, y.numel()}), constant(Tensor({1, y.numel()}, w))));
    };
    const auto gather_index = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{11, 0, 5, 5, 3, 7});
    const std::vector<std::size_t> rows{2, 0, 2};
    const std::vector<std::size_t> targets{2, 0};
    const auto take = std::make_shared<std::vector<std::uint8_t>>(
        std::vector<std::uint8_t>{1, 0, 0, 1, 1, 1, 0, 0, 1, 0, 1, 0});
    const std::vector<std::pair<std::string, std::function<Var()>>> op_cases = {
        {"matmul", [&] { return project(matmul(param(a), param(right))); }},
        {"linear", [&] { return project(linear(param(a), param(wide), param(bias2))); }},
        {"linear_nobias", [&] { return project(linear(param(a), param(wide))); }},
        {"add", [&] { return project(add(param(a), param(b))); }},
        {"add_row", [&] { return project(add(param(a), param(row))); }},
        {"add_scalar_param", [&] { return project(add(param(a), param(one))); }},
        {"sub", [&] { return project(sub(param(a), param(b))); }},
        {"mul", [&] { return project(mul(param(a), param(b))); }},
        {"mul_scalar_param", [&] { return project(mul(param(a), param(one))); }},
        {"scale", [&] { return project(scale(param(a), -1.7)); }},
        {"add_scalar", [&] { return project(add_scalar(param(a), 0.3)); }},
        {"transpose", [&] { return project(transpose(param(a))); }},
        {"reshape", [&] { return project(reshape(param(a), {2, 6})); }},
        {"slice_rows", [&] { return project(slice_rows(param(a), 1, 3)); }},
        {"slice_cols", [&] { return project(slice_cols(param(a), 1, 4)); }},
        {"concat_rows", [&] {
             const std::vector<Var> parts{param(a), param(wide)};
             return project(concat_rows(parts));
         }},
        {"concat_cols", [&] {
             const std::vector<Var> parts{param(a), param(tall)};
             return project(concat_cols(parts));
         }},
        {"gather", [&] { return project(gather(param(a), gather_index, {2, 3})); }},
        {"gather_rows", [&] { return project(gather_rows(param(a), rows)); }},
        {"overwrite_rows", [&] { return project(overwrite_rows(param(a), param(wide), targets)); }},
        {"repeat_rows", [&] { return project(repeat_rows(param(row2), 3)); }},
        {"select", [&] { return project(select(param(a), param(b), take)); }},
        {"sum", [&] { return sum(param(a)); }},
        {"mean", [&] { return mean(mul(param(a), param(a))); }},
        {"softmax", [&] { return project(softmax(param(logits))); }},
        {"gelu", [&] { return project(gelu(param(logits))); }},
        {"sigmoid", [&] { return project(sigmoid(param(logits))); }},
        {"layer_norm", [&] { return project(layer_norm(param(logits), param(row), param(shift))); }},
        {"mse", [&] { return mse(param(a), param(b)); }},
    };
    for (const auto& [name, loss] : op_cases) run(name, ops, loss);

    {
        ParameterStore store;
        numeric::LinearForecaster f(store, 12, 5, rng);
        const auto x = constant(Tensor::row(oracle::random_vector(12, rng)));
        const auto y = constant(Tensor::row(oracle::random_vector(5, rng)));
        run("linear_forecaster", store, [&] { return mse(f.forecast(x), y); });
    }
    {
        ParameterStore store;
        numeric::PatchTransformerForecaster f(store, 14, 3, {4, 8, 1, 2, 2}, rng);
        const auto x = constant(Tensor::row(oracle::random_vector(14, rng)));
        const auto y = constant(Tensor::row(oracle::random_vector(3, rng)));
        run("patch_transformer", store, [&] { return mse(f.forecast(x), y); });
    }
    {
        ParameterStore store;
        vision::MaskedAutoencoder mae(tiny_mae(8, 2), store, rng);
        const Tensor img({1, 8, 8}, oracle::random_vector(64, rng));
        vision::PatchMask mask(4);
        for (std::size_t i : {1u, 6u, 11u, 12u}) mask.set(i, true);
        const auto target = constant(Tensor({1, 8, 8}, oracle::random_vector(64, rng)));
        run("visual_mae", store, [&] { return mse(mae.reconstruct(img, mask), target); });
    }
    out.check(worst <= kGradRelTol, "relative error above " + fmt(kGradRelTol));
    out.detail << checks << " checks, worst relative error " << fmt(worst) << " (" << worst_case << ")";
}

// ---- 2: codec round trip ------------------------------------------------------

void criterion_round_trip(Outcome& out) {
    std::mt19937_64 rng(7);
    double identity_err = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_vector(67, rng, -10, 10);
        const auto geo = codec::ImagingGeometry::backcast(67, 8, 8, 4);
        const auto img = codec::encode_window(x, geo);
        const auto back = codec::decode_backcast(img.pixels, geo, img.stats);
        identity_err = std::max(identity_err, max_abs_diff(back, std::span(x).subspan(3)));
    }
    out.check(identity_err <= kExactTol, "identity-resize round trip");

    // 8x8 raw grid imaged at 16 (2x), 24 (3x) and 32 (4x).
    std::map<int, double> multiple_err;
    for (const auto& [size, patch] : std::vector<std::pair<int, int>>{{16, 4}, {24, 4}, {32, 8}}) {
        double err = 0;
        for (int trial = 0; trial < 20; ++trial) {
            const auto x = oracle::random_vector(64, rng, -3, 3);
            const auto geo = codec::ImagingGeometry::backcast(64, 8, size, patch);
            const auto img = codec::encode_window(x, geo);
            err = std::max(err, max_abs_diff(codec::decode_backcast(img.pixels, geo, img.stats), x));
        }
        multiple_err[size / 8] = err;
        out.check(err <= kMultipleTol, std::to_string(size / 8) + "x multiple round trip");
    }

    bool stack_identity = true;
    for (int p : {1, 3, 8, 24}) {
        for (int cols : {1, 2, 7}) {
            const auto x = oracle::random_vector(static_cast<std::size_t>(p * cols), rng);
            stack_identity &= codec::unstack(codec::segment_stack(x, p)) == x;
        }
    }
    out.check(stack_identity, "unstack(segment_stack(x)) == x");
    out.detail << "identity max err " << fmt(identity_err);
    for (const auto& [k, e] : multiple_err) out.detail << ", " << k << "x max err " << fmt(e);
}

// ---- 3: decomposition identities --------------------------------------------------

void criterion_decomposition(Outcome& out) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(8, 400);
    std::uniform_int_distribution<int> period(1, 60);
    double additivity = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = oracle::random_vector(static_cast<std::size_t>(len(rng)), rng, -50, 50);
        const auto d = model::moving_average_decompose(x, period(rng));
        for (std::size_t t = 0; t < x.size(); ++t) additivity = std::max(additivity, std::abs(d.trend[t] + d.seasonal[t] - x[t]));
    }
    out.check(additivity <= kExactTol, "trend + seasonal == x");

    int geometries = 0;
    bool partition = true;
    for (int s : {4, 8, 16, 24, 32, 48, 64}) {
        for (int p : {1, 2, 4, 8}) {
            if (s % p != 0 || (s / 2) % p != 0) continue;
            const auto geo = codec::ImagingGeometry::backcast(96, 8, s, p);
            const auto [left, right] = vision::bc_masks(geo);
            for (std::size_t i = 0; i < left.size(); ++i) partition &= left.masked(i) != right.masked(i);
            partition &= left.masked_count() > 0 && right.masked_count() > 0;
            ++geometries;
        }
    }
    out.check(partition, "BCMask halves disjoint and exhaustive");

    double backcast_err = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = oracle::random_vector(70, rng, -5, 5);
        const auto geo = codec::ImagingGeometry::backcast(70, 8, 8, 2);
        PerfectReconstructor perfect(codec::encode_window(x, geo).pixels);
        const auto b = vision::vf_backcast(x, geo, perfect).value();
        backcast_err = std::max(backcast_err, max_abs_diff(b.data, std::span(x).subspan(6)));
    }
    out.check(backcast_err <= kExactTol, "perfect-stub backcast equals look-back");
    out.detail << "additivity max err " << fmt(additivity) << " over 1000 windows, " << geometries
               << " BCMask geometries, stub backcast max err " << fmt(backcast_err);
}

// ---- 4: fusion contracts ------------------------------------------------------

void criterion_fusion(Outcome& out) {
    std::mt19937_64 rng(13);
    bool envelope = true, mean_exact = true;
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = oracle::random_vector(50, rng, -10, 10), t = oracle::random_vector(50, rng, -10, 10);
        std::uniform_real_distribution<double> wg(-8, 8);
        const auto y = model::fuse(s, t, model::gate_value(wg(rng)));
        for (std::size_t i = 0; i < y.size(); ++i) {
            envelope &= y[i] >= std::min(s[i], t[i]) && y[i] <= std::max(s[i], t[i]);
        }
        const auto m = model::fuse(s, t, model::gate_value(0.0));
        for (std::size_t i = 0; i < m.size(); ++i) mean_exact &= m[i] == (s[i] + t[i]) / 2;
    }
    out.check(envelope, "fused output inside the min/max envelope");
    out.check(mean_exact, "w_g = 0 gives the exact mean");

    model::ModelConfig c;
    c.lookback = 48;
    c.horizon = 12;
    c.period = 6;
    c.mae = tiny_mae(8, 2);
    c.fusion = model::Fusion::sum;
    bool sum_exact = true;
    for (auto v : {model::Variant::S, model::Variant::A}) {
        c.variant = v;
        model::DmmvModel m(c);
        for (int trial = 0; trial < 5; ++trial) {
            const auto x = oracle::random_vector(48, rng);
            const auto r = m.forward(x);
            for (std::size_t i = 0; i < 12; ++i) {
                sum_exact &= r.output.value()[i] == r.season.value()[i] + r.trend.value()[i];
            }
        }
    }
    out.check(sum_exact, "sum fusion equals season + trend");
    out.detail << "200 random gates, sum ablation on both variants";
}

// ---- 5: period bias of the visual forecaster ---------------------------------------

eval::ExperimentSpec bias_experiment() {
    eval::ExperimentSpec spec;
    spec.model.lookback = 336;
    spec.model.horizon = 96;
    spec.model.period = 24;
    spec.model.mae = experiment_mae();
    spec.train.warmup.epochs = 60;
    spec.train.warmup.batch_size = 8;
    spec.train_stride = 7;
    spec.eval_stride = 7;
    return spec;
}

void criterion_period_bias(Outcome& out) {
    const auto series = data::synth_decaying_sine(2400, 24, 1.0, 0.5);
    eval::SweepSpec sweep;
    sweep.segment_lengths = {16, 20, 24, 28, 32, 36, 40, 44, 48};
    sweep.seeds = {0, 1, 2};
    const auto rows = eval::bias_sweep(series, bias_experiment(), sweep);
    for (auto seed : sweep.seeds) {
        double others = std::numeric_limits<double>::infinity(), at24 = 0, at48 = 0;
        for (const auto& r : rows) {
            if (r.seed != seed) continue;
            if (r.segment_length == 24) at24 = r.mse;
            else if (r.segment_length == 48) at48 = r.mse;
            else others = std::min(others, r.mse);
        }
        out.check(at24 < others && at48 < others, "seed " + std::to_string(seed));
        out.detail << "seed " << seed << ": mse@24 " << fmt(at24) << ", mse@48 " << fmt(at48) << ", min other "
                   << fmt(others) << "; ";
    }
}

// ---- 6: decomposition benefit -------------------------------------------------

eval::ExperimentSpec ablation_experiment() {
    eval::ExperimentSpec spec;
    spec.model.lookback = 336;
    spec.model.horizon = 96;
    spec.model.period = 24;
    spec.model.mae = experiment_mae();
    spec.train.warmup.epochs = 20;
    spec.train.warmup.batch_size = 8;
    spec.train_stride = 7;
    spec.eval_stride = 7;
    return spec;
}

eval::ExperimentSpec trend_experiment(model::Branches branches) {
    auto spec = ablation_experiment();
    spec.model.branches = branches;
    spec.train.batch_size = 8;
    spec.train.stage1 = {0.01, 200, 20};
    spec.train.stage2 = {0.005, 20, 5};
    spec.train_stride = 1;
    return spec;
}

void criterion_decomposition_benefit(Outcome& out) {
    const std::vector<std::uint64_t> seeds{0, 1, 2};
    std::map<model::Branches, double> mean_mse;
    for (auto b : {model::Branches::both, model::Branches::visual_only, model::Branches::numerical_only}) {
        double total = 0;
        for (auto seed : seeds) {
            const auto series = data::synth_trend_sine(2400, 24, 0.005, 1.0, 0.1, seed);
            auto spec = trend_experiment(b);
            spec.model.init_seed = seed;
            spec.train.seed = seed;
            total += eval::run_experiment(eval::prepare(series, spec), spec).test.mse;
        }
        mean_mse[b] = total / static_cast<double>(seeds.size());
    }
    const double dmmv = mean_mse[model::Branches::both];
    out.check(dmmv < mean_mse[model::Branches::visual_only], "DMMV-A below visual-only");
    out.check(dmmv < mean_mse[model::Branches::numerical_only], "DMMV-A below linear-only");
    out.detail << "mean test mse: dmmv_a " << fmt(dmmv) << ", visual-only " << fmt(mean_mse[model::Branches::visual_only])
               << ", linear-only " << fmt(mean_mse[model::Branches::numerical_only]);
}

// ---- 7: two-stage training contract ---------------------------------------------

model::ModelConfig small_model() {
    model::ModelConfig c;
    c.lookback = 96;
    c.horizon = 24;
    c.period = 24;
    c.mae = tiny_mae(16, 4);
    return c;
}

std::vector<double> group_values(const model::DmmvModel& m, std::initializer_list<ad::ParamGroup> groups) {
    std::vector<double> out;
    for (const auto* p : m.store().all()) {
        if (std::find(groups.begin(), groups.end(), p->group) != groups.end()) {
            out.insert(out.end(), p->value.data.begin(), p->value.data.end());
        }
    }
    return out;
}

struct SmallData {
    std::vector<codec::UnivariateWindow> train, val;
};

SmallData small_data() {
    eval::ExperimentSpec spec;
    spec.model = small_model();
    spec.train_stride = 4;
    spec.eval_stride = 4;
    const auto d = eval::prepare(data::synth_trend_sine(900, 24, 0.005, 1.0, 0.1, 5), spec);
    return {d.train, d.val};
}

train::TrainConfig small_train() {
    train::TrainConfig t;
    t.warmup.epochs = 2;
    t.stage1 = {0.01, 8, 3};
    t.stage2 = {0.005, 3, 2};
    t.batch_size = 16;
    return t;
}

/// Warm-up, then both stages, with visual/numerical snapshots at the stage boundaries.
struct StagedRun {
    std::vector<double> visual_start, visual_after1, visual_after2, other_after1, other_after2;
    train::TrainHistory history;
    std::vector<ad::Tensor> final_params;
};

StagedRun staged_run(const model::ModelConfig& mc, const SmallData& d, train::TrainConfig cfg) {
    model::DmmvModel m(mc);
    StagedRun r;
    train::warmup_visual(m, d.train, d.val, cfg);
    cfg.warmup.epochs = 0;
    r.visual_start = group_values(m, {ad::ParamGroup::visual_norm, ad::ParamGroup::visual_other});
    r.history = train::train_two_stage(m, d.train, d.val, cfg, {}, [&](int stage) {
        if (stage == 1) {
            r.visual_after1 = group_values(m, {ad::ParamGroup::visual_norm, ad::ParamGroup::visual_other});
            r.other_after1 = group_values(m, {ad::ParamGroup::visual_other});
        }
    });
    r.other_after2 = group_values(m, {ad::ParamGroup::visual_other});
    r.visual_after2 = group_values(m, {ad::ParamGroup::visual_norm, ad::ParamGroup::visual_other});
    r.final_params = m.store().snapshot();
    return r;
}

bool stops_within_patience(const train::TrainHistory& h, const train::TrainConfig& cfg, int& early_stops) {
    bool ok = true;
    for (const auto& s : h.stages) {
        const auto& sc = s.stage == 1 ? cfg.stage1 : cfg.stage2;
        ok &= s.epochs_run - s.best_epoch <= sc.patience;
        ok &= s.epochs_run <= sc.max_epochs;
        if (s.stopped_early) {
            ok &= s.epochs_run - s.best_epoch == sc.patience;
            ++early_stops;
        }
        double best = s.initial_val;
        for (const auto& e : h.epochs) {
            if (e.stage == s.stage) best = std::min(best, e.val_mse);
        }
        ok &= best == s.best_val;
    }
    return ok;
}

void criterion_two_stage(Outcome& out) {
    const auto d = small_data();
    const auto cfg = small_train();
    const auto a = staged_run(small_model(), d, cfg);
    out.check(a.visual_after1 == a.visual_start, "visual parameters bitwise unchanged by stage 1");
    out.check(a.other_after2 == a.other_after1, "only norm layers of the visual model move in stage 2");

    int early_stops = 0;
    bool patience_ok = stops_within_patience(a.history, cfg, early_stops);
    auto hot = cfg;
    hot.stage1 = {0.05, 200, 3};
    hot.stage2 = {0.05, 30, 2};
    const auto b = staged_run(small_model(), d, hot);
    patience_ok &= stops_within_patience(b.history, hot, early_stops);
    out.check(patience_ok, "early stopping within patience of the best epoch");
    out.check(early_stops > 0, "early stopping exercised");

    const auto again = staged_run(small_model(), d, cfg);
    bool same = again.final_params.size() == a.final_params.size();
    for (std::size_t i = 0; same && i < a.final_params.size(); ++i) same = again.final_params[i].data == a.final_params[i].data;
    std::ostringstream h1, h2;
    train::write_history_csv(h1, a.history);
    train::write_history_csv(h2, again.history);
    out.check(same && h1.str() == h2.str(), "fixed-seed rerun bitwise identical");
    out.detail << early_stops << " early stop(s) checked; stages (run/best):";
    for (const auto* h : {&a.history, &b.history}) {
        for (const auto& s : h->stages) out.detail << " " << s.epochs_run << "/" << s.best_epoch;
    }
}

// ---- 8: ablation harness --------------------------------------------------------

void criterion_ablation(Outcome& out) {
    const std::vector<std::string> modes{"c", "d", "e", "f", "g"};
    const std::vector<std::pair<std::string, data::MultivariateSeries>> datasets{
        {"trend_sine", data::synth_trend_sine(2400, 24, 0.005, 1.0, 0.1, 0)},
        {"decaying_sine", data::synth_decaying_sine(2400, 24, 1.0, 0.5)},
    };
    const auto spec = ablation_experiment();
    for (const auto& [name, series] : datasets) {
        const auto rows = eval::mean_over_seeds(eval::ablation_suite(series, spec, modes, {0}));
        bool one_row_each = rows.size() == modes.size();
        for (std::size_t i = 0; one_row_each && i < rows.size(); ++i) {
            one_row_each = rows[i].config == modes[i] && std::isfinite(rows[i].mse) && std::isfinite(rows[i].mae);
        }
        out.check(one_row_each, name + ": one finite row per mode");
        out.detail << name << ":";
        for (const auto& r : rows) out.detail << " (" << r.config << ") " << fmt(r.mse);
        out.detail << "; ";
    }

    auto no_mask = eval::apply_ablation(small_model(), "d");
    model::DmmvModel m(no_mask);
    const auto d = small_data();
    bool zero = true;
    for (const auto& w : d.val) {
        const auto r = m.forward(w.lookback);
        for (double v : r.numerical_input.value().data) zero &= v == 0.0;
    }
    out.check(zero, "no-mask residual identically zero");

    const auto frozen = staged_run(eval::apply_ablation(small_model(), "f"), d, small_train());
    out.check(frozen.visual_after2 == frozen.visual_start, "frozen mode keeps every visual parameter through both stages");
    out.detail << "no-mask residual checked on " << d.val.size() << " windows";
}

// ---- 9: protocol fidelity -------------------------------------------------------

void criterion_protocol(Outcome& out) {
    bool splits = true;
    for (std::size_t len : {100u, 966u, 14400u, 17420u, 52696u, 2400u}) {
        for (const auto& ratio : {data::SplitSpec{0.7, 0.1, 0.2}, data::SplitSpec{0.6, 0.2, 0.2}}) {
            const auto s = data::split_sizes(len, ratio);
            const auto near = [&](std::size_t got, double want) {
                return std::abs(static_cast<double>(got) - want) <= kSplitRowSlack;
            };
            splits &= near(s.train, ratio.train * static_cast<double>(len)) &&
                      near(s.val, ratio.val * static_cast<double>(len)) &&
                      near(s.test, ratio.test * static_cast<double>(len)) && s.train + s.val + s.test == len;
        }
    }
    out.check(splits, "split sizes within one row of the ratios");

    bool windows = true;
    for (std::size_t len : {10u, 57u, 200u, 513u}) {
        for (std::size_t t : {4u, 36u}) {
            for (std::size_t h : {2u, 24u}) {
                for (std::size_t stride : {1u, 3u, 7u}) {
                    windows &= data::window_count(len, t, h, stride) == oracle::enumerate_windows(len, t, h, stride).size();
                }
            }
        }
    }
    out.check(windows, "window counts match enumeration");

    // Hand case: errors {1, 0, -2, 3} give MSE 14/4 and MAE 6/4.
    std::vector<codec::UnivariateWindow> w(2);
    w[0].target = {0, 2};
    w[1].target = {5, 1};
    const auto r = eval::score({{1, 2}, {3, 4}}, w);
    out.check(std::abs(r.mse - 3.5) <= kMetricTol && std::abs(r.mae - 1.5) <= kMetricTol, "hand-case metrics");

    std::mt19937_64 rng(17);
    std::vector<codec::UnivariateWindow> rw(25);
    std::vector<std::vector<double>> preds, truth;
    for (auto& x : rw) {
        x.target = oracle::random_vector(9, rng);
        truth.push_back(x.target);
        preds.push_back(oracle::random_vector(9, rng));
    }
    const auto rr = eval::score(preds, rw);
    const double mse_err = std::abs(rr.mse - oracle::direct_mse(preds, truth));
    const double mae_err = std::abs(rr.mae - oracle::direct_mae(preds, truth));
    out.check(mse_err <= kMetricTol && mae_err <= kMetricTol, "metrics match direct formulas");
    out.detail << "hand case mse " << r.mse << " mae " << r.mae << ", random case diffs " << fmt(mse_err) << "/"
               << fmt(mae_err);
}

struct Criterion {
    int id;
    const char* name;
    void (*run)(Outcome&);
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", criterion_gradients},
    {2, "codec round trip", criterion_round_trip},
    {3, "decomposition identities", criterion_decomposition},
    {4, "fusion contracts", criterion_fusion},
    {5, "period bias reproduction", criterion_period_bias},
    {6, "decomposition benefit", criterion_decomposition_benefit},
    {7, "two-stage training contract", criterion_two_stage},
    {8, "ablation harness", criterion_ablation},
    {9, "protocol fidelity", criterion_protocol},
};

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: acceptance [--criterion N]\n";
            return 2;
        }
    }
    bool all_pass = true;
    for (const auto& c : kCriteria) {
        if (only != 0 && c.id != only) continue;
        Outcome out;
        const auto start = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << "exception: " << e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        all_pass &= out.pass;
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (out.pass ? "PASS" : "FAIL") << " ["
                  << fmt(secs) << " s] " << out.detail.str() << std::endl;
    }
    return all_pass ? 0 : 1;
}
