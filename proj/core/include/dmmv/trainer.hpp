#pragma once

// MSE objective, AdamW and the staged training procedure: an optional
// self-supervised warm-up of the visual model, then numerical+gate training
// with the visual model frozen, then joint training that also unfreezes the
// visual norm layers.

#include "dmmv/model.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dmmv::train {

struct StageConfig {
    double lr = 0.01;
    int max_epochs = 50;
    int patience = 10;
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

enum class WarmupMask { random, forecast, mixed };
std::string to_string(WarmupMask m);
WarmupMask parse_warmup_mask(const std::string& s);

struct WarmupConfig {
    int epochs = 20;
    double lr = 1e-3;
    double mask_ratio = 0.5;
    WarmupMask mask = WarmupMask::random;
    /// 0 uses TrainConfig::batch_size.
    int batch_size = 0;
};

struct TrainConfig {
    StageConfig stage1{0.01, 50, 10};
    StageConfig stage2{0.005, 5, 2};
    WarmupConfig warmup;
    AdamWConfig adamw;
    int batch_size = 64;
    std::uint64_t seed = 0;
    /// Reuse visual outputs while the visual parameters are frozen.
    bool cache_visual = true;

    void validate() const;
    std::map<std::string, std::string> to_map() const;
    static TrainConfig from_map(const std::map<std::string, std::string>& values, TrainConfig base);
};

struct AdamState {
    ad::Tensor m;
    ad::Tensor v;
    long step = 0;
};

/// One decoupled-weight-decay update of `p` from its current grad.
void adamw_step(ad::Parameter& p, AdamState& state, double lr, const AdamWConfig& config);

class AdamW {
public:
    AdamW(std::vector<ad::Parameter*> params, const AdamWConfig& config);
    void step(double lr);
    const std::vector<ad::Parameter*>& params() const { return params_; }
    const AdamState& state(const ad::Parameter& p) const { return states_.at(&p); }

private:
    std::vector<ad::Parameter*> params_;
    AdamWConfig config_;
    std::unordered_map<const ad::Parameter*, AdamState> states_;
};

/// Mean over every entry.
double mse_loss(std::span<const double> pred, std::span<const double> truth);
ad::Var mse_loss(const ad::Var& pred, const ad::Var& truth);

struct EpochRecord {
    int stage = 0;
    int epoch = 0;
    double train_mse = 0;
    double val_mse = 0;
    double gate = 0;
};

struct StageSummary {
    int stage = 0;
    int epochs_run = 0;
    /// 0 when no epoch improved on the stage's starting parameters.
    int best_epoch = 0;
    double initial_val = 0;
    double best_val = 0;
    bool stopped_early = false;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::vector<StageSummary> stages;
};

void write_history_csv(std::ostream& out, const TrainHistory& history);

using ProgressFn = std::function<void(const EpochRecord&)>;
/// Called with the stage number once a stage has restored its best parameters.
using StageEndFn = std::function<void(int)>;

/// Mask stream used for every validation pass of a run with this seed.
std::uint64_t validation_mask_seed(std::uint64_t seed);

/// Validation MSE of the model's forecasts, optionally using cached visual
/// outputs (one per window).
double dataset_mse(model::DmmvModel& model, const std::vector<codec::UnivariateWindow>& windows,
                   const std::vector<model::VisualCache>* caches = nullptr, std::uint64_t mask_seed = 0);

/// Masked-patch reconstruction training of the visual model. Returns the
/// final training reconstruction MSE.
double warmup_visual(model::DmmvModel& model, const std::vector<codec::UnivariateWindow>& train,
                     const std::vector<codec::UnivariateWindow>& val, const TrainConfig& config,
                     TrainHistory* history = nullptr, const ProgressFn& progress = {});

/// Warm-up (when enabled), then both stages with early stopping on
/// validation MSE; each stage ends on its best-validation parameters.
TrainHistory train_two_stage(model::DmmvModel& model, const std::vector<codec::UnivariateWindow>& train,
                             const std::vector<codec::UnivariateWindow>& val, const TrainConfig& config,
                             const ProgressFn& progress = {}, const StageEndFn& on_stage_end = {});

} // namespace dmmv::train
