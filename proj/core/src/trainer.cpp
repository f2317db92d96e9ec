#include "dmmv/trainer.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace dmmv::train {

namespace {

using codec::UnivariateWindow;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::seed_seq seq{seed, a, b, c};
    return std::mt19937_64(seq);
}

double parse_number(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw ConfigError("key '" + key + "' expects a number, got '" + s + "'");
    return v;
}

int parse_count(const std::string& key, const std::string& s) {
    const double v = parse_number(key, s);
    if (v != std::floor(v)) throw ConfigError("key '" + key + "' expects an integer, got '" + s + "'");
    return static_cast<int>(v);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

void check_stage(const StageConfig& s, const char* name) {
    if (!(s.lr > 0)) throw ConfigError(std::string(name) + " learning rate must be positive");
    if (s.max_epochs < 0 || s.patience < 1) throw ConfigError(std::string(name) + " epochs/patience out of range");
    if (s.patience > s.max_epochs && s.max_epochs > 0) {
        throw ConfigError(std::string(name) + " patience exceeds max_epochs");
    }
}

std::vector<ad::Parameter*> trainable_params(ad::ParameterStore& store) {
    std::vector<ad::Parameter*> out;
    for (auto* p : store.all()) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

[[noreturn]] void diverged(int stage, int epoch, std::size_t batch, std::size_t window, double loss) {
    throw DivergedLoss("non-finite loss " + std::to_string(loss) + " at stage " + std::to_string(stage) + ", epoch " +
                       std::to_string(epoch) + ", batch " + std::to_string(batch) + ", window " +
                       std::to_string(window));
}

// ---- warm-up ---------------------------------------------------------------

struct WarmupSample {
    ad::Tensor tokens;
    codec::ImagingGeometry geometry;
};

WarmupSample make_sample(const codec::ImagedWindow& img) {
    const auto& g = img.geometry;
    const auto s = static_cast<std::size_t>(g.image_size);
    ad::Tensor pixels({static_cast<std::size_t>(g.channels), s, s}, img.pixels);
    return {vision::patchify(pixels, g.patch_size), g};
}

std::vector<WarmupSample> warmup_samples(const model::ModelConfig& cfg, const std::vector<UnivariateWindow>& windows) {
    const auto fgeo = cfg.forecast_geometry();
    const auto bgeo = cfg.backcast_geometry();
    std::vector<WarmupSample> out;
    out.reserve(windows.size() * (cfg.uses_backcast() ? 2 : 1));
    for (const auto& w : windows) {
        UnivariateWindow imaged = w;
        if (cfg.variant == model::Variant::S && cfg.decomposition) {
            std::vector<double> full = w.lookback;
            full.insert(full.end(), w.target.begin(), w.target.end());
            const auto parts = model::moving_average_decompose(full, cfg.period);
            imaged.lookback.assign(parts.seasonal.begin(), parts.seasonal.begin() + static_cast<std::ptrdiff_t>(w.lookback.size()));
            imaged.target.assign(parts.seasonal.begin() + static_cast<std::ptrdiff_t>(w.lookback.size()), parts.seasonal.end());
        }
        out.push_back(make_sample(codec::encode_with_target(imaged, fgeo)));
        if (cfg.uses_backcast()) out.push_back(make_sample(codec::encode_window(w.lookback, bgeo)));
    }
    return out;
}

vision::PatchMask ratio_mask(int grid, double ratio, std::mt19937_64& rng) {
    const std::size_t total = static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid);
    auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    count = std::clamp<std::size_t>(count, 1, total - 1);
    const auto order = shuffled(total, rng);
    vision::PatchMask mask(grid);
    for (std::size_t i = 0; i < count; ++i) mask.set(order[i], true);
    return mask;
}

vision::PatchMask warmup_mask(const WarmupSample& sample, const WarmupConfig& cfg, std::mt19937_64& rng) {
    WarmupMask mode = cfg.mask;
    if (mode == WarmupMask::mixed) mode = std::bernoulli_distribution(0.5)(rng) ? WarmupMask::random : WarmupMask::forecast;
    if (mode == WarmupMask::random) return ratio_mask(sample.geometry.patch_grid(), cfg.mask_ratio, rng);
    if (sample.geometry.is_backcast()) {
        auto [left, right] = vision::bc_masks(sample.geometry);
        return std::bernoulli_distribution(0.5)(rng) ? left : right;
    }
    return vision::forecast_mask(sample.geometry);
}

ad::Var reconstruction_loss(const vision::MaskedAutoencoder& mae, const WarmupSample& sample,
                            const vision::PatchMask& mask) {
    const auto masked = mask.masked_indices();
    const auto dim = sample.tokens.shape[1];
    ad::Tensor target({masked.size(), dim});
    for (std::size_t i = 0; i < masked.size(); ++i) {
        std::copy_n(sample.tokens.data.begin() + static_cast<std::ptrdiff_t>(masked[i] * dim), dim,
                    target.data.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    return ad::mse(mae.predict_masked_tokens(sample.tokens, mask), ad::constant(std::move(target)));
}

double reconstruction_mse(const vision::MaskedAutoencoder& mae, const std::vector<WarmupSample>& samples,
                          const WarmupConfig& cfg, std::uint64_t seed) {
    if (samples.empty()) return 0.0;
    ad::NoGradGuard guard;
    auto rng = stream(seed, 0x5a17);
    double total = 0;
    for (const auto& s : samples) total += reconstruction_loss(mae, s, warmup_mask(s, cfg, rng)).value()[0];
    return total / static_cast<double>(samples.size());
}

} // namespace

std::string to_string(WarmupMask m) {
    switch (m) {
    case WarmupMask::random: return "random";
    case WarmupMask::forecast: return "forecast";
    case WarmupMask::mixed: return "mixed";
    }
    return "?";
}

WarmupMask parse_warmup_mask(const std::string& s) {
    if (s == "random") return WarmupMask::random;
    if (s == "forecast") return WarmupMask::forecast;
    if (s == "mixed") return WarmupMask::mixed;
    throw ConfigError("invalid warm-up mask '" + s + "' (expected random|forecast|mixed)");
}

void TrainConfig::validate() const {
    check_stage(stage1, "stage1");
    check_stage(stage2, "stage2");
    if (warmup.epochs < 0 || (warmup.epochs > 0 && !(warmup.lr > 0))) throw ConfigError("invalid warm-up settings");
    if (warmup.mask_ratio <= 0 || warmup.mask_ratio >= 1) throw ConfigError("warm-up mask ratio must be in (0,1)");
    if (warmup.batch_size < 0) throw ConfigError("warmup_batch_size must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (adamw.beta1 < 0 || adamw.beta1 >= 1 || adamw.beta2 < 0 || adamw.beta2 >= 1 || adamw.eps <= 0 ||
        adamw.weight_decay < 0) {
        throw ConfigError("invalid AdamW hyperparameters");
    }
}

std::map<std::string, std::string> TrainConfig::to_map() const {
    return {
        {"stage1_lr", fmt(stage1.lr)},
        {"stage1_epochs", std::to_string(stage1.max_epochs)},
        {"stage1_patience", std::to_string(stage1.patience)},
        {"stage2_lr", fmt(stage2.lr)},
        {"stage2_epochs", std::to_string(stage2.max_epochs)},
        {"stage2_patience", std::to_string(stage2.patience)},
        {"warmup_epochs", std::to_string(warmup.epochs)},
        {"warmup_lr", fmt(warmup.lr)},
        {"warmup_mask_ratio", fmt(warmup.mask_ratio)},
        {"warmup_mask", to_string(warmup.mask)},
        {"warmup_batch_size", std::to_string(warmup.batch_size)},
        {"beta1", fmt(adamw.beta1)},
        {"beta2", fmt(adamw.beta2)},
        {"adam_eps", fmt(adamw.eps)},
        {"weight_decay", fmt(adamw.weight_decay)},
        {"batch_size", std::to_string(batch_size)},
        {"seed", std::to_string(seed)},
        {"cache_visual", cache_visual ? "true" : "false"},
    };
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values, TrainConfig c) {
    for (const auto& [key, v] : values) {
        if (key == "stage1_lr") c.stage1.lr = parse_number(key, v);
        else if (key == "stage1_epochs") c.stage1.max_epochs = parse_count(key, v);
        else if (key == "stage1_patience") c.stage1.patience = parse_count(key, v);
        else if (key == "stage2_lr") c.stage2.lr = parse_number(key, v);
        else if (key == "stage2_epochs") c.stage2.max_epochs = parse_count(key, v);
        else if (key == "stage2_patience") c.stage2.patience = parse_count(key, v);
        else if (key == "warmup_epochs") c.warmup.epochs = parse_count(key, v);
        else if (key == "warmup_lr") c.warmup.lr = parse_number(key, v);
        else if (key == "warmup_mask_ratio") c.warmup.mask_ratio = parse_number(key, v);
        else if (key == "warmup_mask") c.warmup.mask = parse_warmup_mask(v);
        else if (key == "warmup_batch_size") c.warmup.batch_size = parse_count(key, v);
        else if (key == "beta1") c.adamw.beta1 = parse_number(key, v);
        else if (key == "beta2") c.adamw.beta2 = parse_number(key, v);
        else if (key == "adam_eps") c.adamw.eps = parse_number(key, v);
        else if (key == "weight_decay") c.adamw.weight_decay = parse_number(key, v);
        else if (key == "batch_size") c.batch_size = parse_count(key, v);
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_number(key, v));
        else if (key == "cache_visual") {
            if (v != "true" && v != "false") throw ConfigError("cache_visual expects true|false");
            c.cache_visual = v == "true";
        } else {
            throw ConfigError("unknown training key '" + key + "'");
        }
    }
    return c;
}

void adamw_step(ad::Parameter& p, AdamState& state, double lr, const AdamWConfig& config) {
    if (state.m.shape != p.value.shape) {
        state.m = ad::Tensor(p.value.shape, 0.0);
        state.v = ad::Tensor(p.value.shape, 0.0);
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    const double decay = p.decay ? lr * config.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
        const double g = p.grad[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        p.value[i] -= decay * p.value[i];
        p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

AdamW::AdamW(std::vector<ad::Parameter*> params, const AdamWConfig& config)
    : params_(std::move(params)), config_(config) {
    for (auto* p : params_) states_[p];
}

void AdamW::step(double lr) {
    for (auto* p : params_) adamw_step(*p, states_[p], lr, config_);
}

double mse_loss(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size() || pred.empty()) {
        throw ShapeMismatch("mse over " + std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) +
                            " values");
    }
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

ad::Var mse_loss(const ad::Var& pred, const ad::Var& truth) { return ad::mse(pred, truth); }

void write_history_csv(std::ostream& out, const TrainHistory& history) {
    out << "epoch,stage,train_mse,val_mse,gate_value\n";
    out.precision(10);
    for (const auto& e : history.epochs) {
        out << e.epoch << ',' << e.stage << ',' << e.train_mse << ',' << e.val_mse << ',' << e.gate << '\n';
    }
}

std::uint64_t validation_mask_seed(std::uint64_t seed) { return seed ^ 0x7661ULL; }

double dataset_mse(model::DmmvModel& model, const std::vector<UnivariateWindow>& windows,
                   const std::vector<model::VisualCache>* caches, std::uint64_t mask_seed) {
    if (windows.empty()) throw EmptySplit("no windows to evaluate");
    ad::NoGradGuard guard;
    model.reseed_masks(mask_seed);
    double total = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto r = model.forward(windows[i].lookback, caches ? &(*caches)[i] : nullptr);
        total += mse_loss(r.output.value().data, windows[i].target);
    }
    return total / static_cast<double>(windows.size());
}

double warmup_visual(model::DmmvModel& model, const std::vector<UnivariateWindow>& train,
                     const std::vector<UnivariateWindow>& val, const TrainConfig& config, TrainHistory* history,
                     const ProgressFn& progress) {
    const auto* mae = model.mae();
    if (!mae || config.warmup.epochs == 0) return 0.0;
    if (train.empty()) throw EmptySplit("no training windows for warm-up");

    auto& store = model.store();
    store.set_all_trainable(false);
    store.set_trainable(ad::ParamGroup::visual_norm, true);
    store.set_trainable(ad::ParamGroup::visual_other, true);
    AdamW opt(trainable_params(store), config.adamw);

    const auto samples = warmup_samples(model.config(), train);
    const auto val_samples = warmup_samples(model.config(), val);
    const auto batch = static_cast<std::size_t>(config.warmup.batch_size > 0 ? config.warmup.batch_size : config.batch_size);
    double last = 0;
    for (int epoch = 1; epoch <= config.warmup.epochs; ++epoch) {
        auto rng = stream(config.seed, 0, static_cast<std::uint64_t>(epoch));
        const auto order = shuffled(samples.size(), rng);
        double total = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            store.zero_grad();
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& sample = samples[order[k]];
                const ad::Var loss = reconstruction_loss(*mae, sample, warmup_mask(sample, config.warmup, rng));
                const double v = loss.value()[0];
                if (!std::isfinite(v)) diverged(0, epoch, b0 / batch, order[k], v);
                total += v;
                ad::backward(loss, 1.0 / static_cast<double>(b1 - b0));
            }
            opt.step(config.warmup.lr);
        }
        last = total / static_cast<double>(samples.size());
        EpochRecord rec{0, epoch, last, reconstruction_mse(*mae, val_samples, config.warmup, config.seed), model.gate()};
        if (history) history->epochs.push_back(rec);
        if (progress) progress(rec);
    }
    store.set_all_trainable(false);
    return last;
}

namespace {

StageSummary run_stage(model::DmmvModel& model, int stage, const StageConfig& sc,
                       const std::vector<UnivariateWindow>& train, const std::vector<UnivariateWindow>& val,
                       const TrainConfig& config, TrainHistory& history, const ProgressFn& progress) {
    auto& store = model.store();
    const auto& mc = model.config();
    StageSummary summary;
    summary.stage = stage;

    const auto params = trainable_params(store);
    bool visual_trainable = false;
    for (const auto* p : params) {
        visual_trainable |= p->group == ad::ParamGroup::visual_norm || p->group == ad::ParamGroup::visual_other;
    }

    std::vector<model::VisualCache> train_cache, val_cache;
    const bool cached = config.cache_visual && !visual_trainable && mc.uses_visual();
    if (cached) {
        for (const auto& w : train) train_cache.push_back(model.visual_outputs(w.lookback));
        for (const auto& w : val) val_cache.push_back(model.visual_outputs(w.lookback));
    }
    const auto* tc = cached ? &train_cache : nullptr;
    const auto* vc = cached ? &val_cache : nullptr;
    const std::uint64_t val_mask_seed = validation_mask_seed(config.seed);

    summary.initial_val = dataset_mse(model, val, vc, val_mask_seed);
    summary.best_val = summary.initial_val;
    auto best = store.snapshot();
    if (params.empty() || sc.max_epochs == 0) return summary;

    AdamW opt(params, config.adamw);
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= sc.max_epochs; ++epoch) {
        auto rng = stream(config.seed, static_cast<std::uint64_t>(stage), static_cast<std::uint64_t>(epoch));
        const auto order = shuffled(train.size(), rng);
        double total = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const std::size_t b1 = std::min(order.size(), b0 + batch);
            store.zero_grad();
            model.reseed_masks(rng());
            for (std::size_t k = b0; k < b1; ++k) {
                const auto& w = train[order[k]];
                const auto r = model.forward(w.lookback, tc ? &(*tc)[order[k]] : nullptr);
                const ad::Var loss = mse_loss(r.output, ad::constant(ad::Tensor::row(w.target)));
                const double v = loss.value()[0];
                if (!std::isfinite(v)) diverged(stage, epoch, b0 / batch, order[k], v);
                total += v;
                ad::backward(loss, 1.0 / static_cast<double>(b1 - b0));
            }
            opt.step(sc.lr);
        }
        EpochRecord rec{stage, epoch, total / static_cast<double>(train.size()),
                        dataset_mse(model, val, vc, val_mask_seed), model.gate()};
        if (!std::isfinite(rec.val_mse)) diverged(stage, epoch, 0, 0, rec.val_mse);
        history.epochs.push_back(rec);
        if (progress) progress(rec);
        summary.epochs_run = epoch;
        if (rec.val_mse < summary.best_val) {
            summary.best_val = rec.val_mse;
            summary.best_epoch = epoch;
            best = store.snapshot();
        } else if (epoch - summary.best_epoch >= sc.patience) {
            summary.stopped_early = epoch < sc.max_epochs;
            break;
        }
    }
    store.restore(best);
    return summary;
}

} // namespace

TrainHistory train_two_stage(model::DmmvModel& model, const std::vector<UnivariateWindow>& train,
                             const std::vector<UnivariateWindow>& val, const TrainConfig& config,
                             const ProgressFn& progress, const StageEndFn& on_stage_end) {
    config.validate();
    if (train.empty()) throw EmptySplit("no training windows");
    if (val.empty()) throw EmptySplit("no validation windows");
    TrainHistory history;
    auto& store = model.store();

    warmup_visual(model, train, val, config, &history, progress);

    store.set_all_trainable(false);
    store.set_trainable(ad::ParamGroup::numerical, true);
    store.set_trainable(ad::ParamGroup::gate, true);
    history.stages.push_back(run_stage(model, 1, config.stage1, train, val, config, history, progress));
    if (on_stage_end) on_stage_end(1);

    if (!model.config().freeze_visual) store.set_trainable(ad::ParamGroup::visual_norm, true);
    history.stages.push_back(run_stage(model, 2, config.stage2, train, val, config, history, progress));
    if (on_stage_end) on_stage_end(2);

    store.set_all_trainable(false);
    return history;
}

} // namespace dmmv::train
