#pragma once

// Metrics, end-to-end experiment runs, the segment-length sweep and the
// ablation grid.

#include "dmmv/data.hpp"
#include "dmmv/model.hpp"
#include "dmmv/trainer.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace dmmv::eval {

struct MetricReport {
    double mse = 0;
    double mae = 0;
    std::vector<double> mse_per_step;
    std::vector<double> mae_per_step;
    std::size_t windows = 0;
    std::string scale = "standardized";
};

/// Predictions are one row per window, aligned with `windows`. With `raw`
/// set, both sides are mapped back to original units per variate first.
MetricReport score(const std::vector<std::vector<double>>& predictions,
                   const std::vector<codec::UnivariateWindow>& windows, const data::StandardStats* raw = nullptr);

std::vector<std::vector<double>> predict_all(model::DmmvModel& model,
                                             const std::vector<codec::UnivariateWindow>& windows,
                                             std::uint64_t mask_seed = 0);

MetricReport evaluate(model::DmmvModel& model, const std::vector<codec::UnivariateWindow>& windows,
                      const data::StandardStats* raw = nullptr, std::uint64_t mask_seed = 0);

struct ExperimentSpec {
    model::ModelConfig model;
    train::TrainConfig train;
    data::SplitSpec split{0.6, 0.2, 0.2};
    std::size_t train_stride = 1;
    std::size_t eval_stride = 1;
};

struct PreparedData {
    data::Splits splits;
    data::StandardStats stats;
    std::vector<codec::UnivariateWindow> train;
    std::vector<codec::UnivariateWindow> val;
    std::vector<codec::UnivariateWindow> test;
};

/// Split, standardize on the training part, and cut windows.
PreparedData prepare(const data::MultivariateSeries& series, const ExperimentSpec& spec);

struct RunResult {
    MetricReport test;
    double val_mse = 0;
    double gate = 0;
    train::TrainHistory history;
    std::unique_ptr<model::DmmvModel> model;
};

RunResult run_experiment(const PreparedData& data, const ExperimentSpec& spec,
                         const train::ProgressFn& progress = {});

struct SweepSpec {
    std::vector<int> segment_lengths{16, 20, 24, 28, 32, 36, 40, 44, 48};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    /// Also train the full DMMV-A assembly at each length.
    bool include_dmmv_a = false;
    int workers = 1;
};

struct ResultRow {
    std::string config;
    int segment_length = 0;
    std::uint64_t seed = 0;
    double mse = 0;
    double mae = 0;
    double gate = 0;
};

/// Visual-only forecaster (and optionally DMMV-A) trained with the imaging
/// period set to each segment length. One row per (config, length, seed).
std::vector<ResultRow> bias_sweep(const data::MultivariateSeries& series, const ExperimentSpec& base,
                                  const SweepSpec& sweep);

struct AblationMode {
    std::string id;
    std::string description;
};

/// base, a (patch transformer), c (sum fusion), d (no mask), e (random mask),
/// f (frozen visual model), g (no decomposition).
const std::vector<AblationMode>& ablation_modes();
model::ModelConfig apply_ablation(const model::ModelConfig& base, const std::string& mode);

std::vector<ResultRow> ablation_suite(const data::MultivariateSeries& series, const ExperimentSpec& base,
                                      const std::vector<std::string>& modes, const std::vector<std::uint64_t>& seeds,
                                      int workers = 1);

/// Mean MSE/MAE over seeds, grouped by (config, segment_length), in first-seen order.
std::vector<ResultRow> mean_over_seeds(const std::vector<ResultRow>& rows);

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);
/// One line per (config, segment_length, metric) with columns config,metric,value.
void write_long_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const std::vector<ResultRow>& means);
/// Segment-length table laid out with lengths as columns and MSE/MAE rows.
void write_sweep_table(std::ostream& out, const std::vector<ResultRow>& means);

/// Runs `jobs` on up to `workers` threads; job i writes only its own slot.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

} // namespace dmmv::eval
