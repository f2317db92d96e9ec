#include "dmmv/eval.hpp"

#include "dmmv/errors.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

namespace dmmv::eval {

MetricReport score(const std::vector<std::vector<double>>& predictions,
                   const std::vector<codec::UnivariateWindow>& windows, const data::StandardStats* raw) {
    if (predictions.size() != windows.size()) throw ShapeMismatch("one prediction per window expected");
    if (windows.empty()) throw EmptySplit("no windows to score");
    const std::size_t h = windows.front().target.size();
    MetricReport r;
    r.windows = windows.size();
    r.scale = raw ? "raw" : "standardized";
    r.mse_per_step.assign(h, 0.0);
    r.mae_per_step.assign(h, 0.0);
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& target = windows[w].target;
        const auto& pred = predictions[w];
        if (target.size() != h || pred.size() != h) throw ShapeMismatch("prediction/target length mismatch");
        double mean = 0, sd = 1;
        if (raw) {
            const auto d = static_cast<std::size_t>(windows[w].variate_id);
            if (d >= raw->mean.size()) throw ShapeMismatch("variate id outside the standardizer");
            mean = raw->mean[d];
            sd = raw->std[d];
        }
        for (std::size_t t = 0; t < h; ++t) {
            const double e = raw ? (pred[t] * sd + mean) - (target[t] * sd + mean) : pred[t] - target[t];
            r.mse_per_step[t] += e * e;
            r.mae_per_step[t] += std::abs(e);
        }
    }
    const auto n = static_cast<double>(windows.size());
    for (std::size_t t = 0; t < h; ++t) {
        r.mse_per_step[t] /= n;
        r.mae_per_step[t] /= n;
        r.mse += r.mse_per_step[t];
        r.mae += r.mae_per_step[t];
    }
    r.mse /= static_cast<double>(h);
    r.mae /= static_cast<double>(h);
    return r;
}

std::vector<std::vector<double>> predict_all(model::DmmvModel& model,
                                             const std::vector<codec::UnivariateWindow>& windows,
                                             std::uint64_t mask_seed) {
    model.reseed_masks(mask_seed);
    std::vector<std::vector<double>> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(model.predict(w.lookback));
    return out;
}

MetricReport evaluate(model::DmmvModel& model, const std::vector<codec::UnivariateWindow>& windows,
                      const data::StandardStats* raw, std::uint64_t mask_seed) {
    return score(predict_all(model, windows, mask_seed), windows, raw);
}

PreparedData prepare(const data::MultivariateSeries& series, const ExperimentSpec& spec) {
    PreparedData d;
    d.splits = data::chronological_split(series, spec.split);
    d.stats = data::standardize_splits(d.splits);
    const auto t = static_cast<std::size_t>(spec.model.lookback);
    const auto h = static_cast<std::size_t>(spec.model.horizon);
    d.train = data::windows(d.splits.train, t, h, spec.train_stride);
    d.val = data::windows(d.splits.val, t, h, spec.eval_stride);
    d.test = data::windows(d.splits.test, t, h, spec.eval_stride);
    if (d.train.empty() || d.val.empty() || d.test.empty()) {
        throw EmptySplit("a split is shorter than lookback + horizon (" + std::to_string(t + h) + ")");
    }
    return d;
}

RunResult run_experiment(const PreparedData& data, const ExperimentSpec& spec, const train::ProgressFn& progress) {
    RunResult r;
    r.model = std::make_unique<model::DmmvModel>(spec.model);
    r.history = train::train_two_stage(*r.model, data.train, data.val, spec.train, progress);
    r.val_mse = r.history.stages.empty() ? 0.0 : r.history.stages.back().best_val;
    r.test = evaluate(*r.model, data.test, nullptr, train::validation_mask_seed(spec.train.seed));
    r.gate = r.model->gate();
    return r;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
    const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
    if (n_threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < std::min(n_threads, count); ++t) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

namespace {

struct Job {
    std::string config;
    int segment_length = 0;
    std::uint64_t seed = 0;
    ExperimentSpec spec;
};

std::vector<ResultRow> run_jobs(const data::MultivariateSeries& series, std::vector<Job>& jobs, int workers) {
    std::vector<ResultRow> rows(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        auto& job = jobs[i];
        job.spec.model.init_seed = job.seed;
        job.spec.train.seed = job.seed;
        const auto data = prepare(series, job.spec);
        const auto result = run_experiment(data, job.spec);
        rows[i] = {job.config, job.segment_length, job.seed, result.test.mse, result.test.mae, result.gate};
    });
    return rows;
}

} // namespace

std::vector<ResultRow> bias_sweep(const data::MultivariateSeries& series, const ExperimentSpec& base,
                                  const SweepSpec& sweep) {
    if (sweep.segment_lengths.empty() || sweep.seeds.empty()) throw ConfigError("sweep needs lengths and seeds");
    std::vector<Job> jobs;
    for (int len : sweep.segment_lengths) {
        for (auto seed : sweep.seeds) {
            Job j{"visual", len, seed, base};
            j.spec.model.period = len;
            j.spec.model.variant = model::Variant::A;
            j.spec.model.branches = model::Branches::visual_only;
            j.spec.model.validate();
            jobs.push_back(j);
            if (sweep.include_dmmv_a) {
                Job a{"dmmv_a", len, seed, base};
                a.spec.model.period = len;
                a.spec.model.variant = model::Variant::A;
                a.spec.model.branches = model::Branches::both;
                a.spec.model.validate();
                jobs.push_back(a);
            }
        }
    }
    return run_jobs(series, jobs, sweep.workers);
}

const std::vector<AblationMode>& ablation_modes() {
    static const std::vector<AblationMode> modes = {
        {"base", "DMMV-A, linear trend model, gate fusion, BCMask"},
        {"a", "patch transformer trend model"},
        {"c", "gate replaced by sum"},
        {"d", "BCMask replaced by no mask"},
        {"e", "BCMask replaced by random mask"},
        {"f", "visual model frozen in every stage"},
        {"g", "no decomposition, both models see the raw window"},
    };
    return modes;
}

model::ModelConfig apply_ablation(const model::ModelConfig& base, const std::string& mode) {
    model::ModelConfig c = base;
    c.variant = model::Variant::A;
    c.branches = model::Branches::both;
    if (mode == "base") {
    } else if (mode == "a") {
        c.numerical = model::NumKind::patch_transformer;
    } else if (mode == "c") {
        c.fusion = model::Fusion::sum;
    } else if (mode == "d") {
        c.mask_mode = model::MaskMode::none;
    } else if (mode == "e") {
        c.mask_mode = model::MaskMode::random;
    } else if (mode == "f") {
        c.freeze_visual = true;
    } else if (mode == "g") {
        c.decomposition = false;
    } else {
        throw ConfigError("unknown ablation mode '" + mode + "' (expected base|a|c|d|e|f|g)");
    }
    return c;
}

std::vector<ResultRow> ablation_suite(const data::MultivariateSeries& series, const ExperimentSpec& base,
                                      const std::vector<std::string>& modes, const std::vector<std::uint64_t>& seeds,
                                      int workers) {
    if (modes.empty() || seeds.empty()) throw ConfigError("ablation needs modes and seeds");
    std::vector<Job> jobs;
    for (const auto& mode : modes) {
        for (auto seed : seeds) {
            Job j{mode, base.model.period, seed, base};
            j.spec.model = apply_ablation(base.model, mode);
            j.spec.model.validate();
            jobs.push_back(j);
        }
    }
    return run_jobs(series, jobs, workers);
}

std::vector<ResultRow> mean_over_seeds(const std::vector<ResultRow>& rows) {
    std::vector<ResultRow> out;
    std::vector<std::size_t> counts;
    for (const auto& r : rows) {
        std::size_t i = 0;
        while (i < out.size() && !(out[i].config == r.config && out[i].segment_length == r.segment_length)) ++i;
        if (i == out.size()) {
            out.push_back({r.config, r.segment_length, 0, 0, 0, 0});
            counts.push_back(0);
        }
        out[i].mse += r.mse;
        out[i].mae += r.mae;
        out[i].gate += r.gate;
        ++counts[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto n = static_cast<double>(counts[i]);
        out[i].mse /= n;
        out[i].mae /= n;
        out[i].gate /= n;
        out[i].seed = counts[i];
    }
    return out;
}

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "config,segment_length,seed,mse,mae,gate\n" << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.config << ',' << r.segment_length << ',' << r.seed << ',' << r.mse << ',' << r.mae << ',' << r.gate
            << '\n';
    }
}

void write_long_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "config,metric,value\n" << std::setprecision(10);
    for (const auto& r : rows) {
        const std::string name = r.config + "@" + std::to_string(r.segment_length);
        out << name << ",mse," << r.mse << '\n' << name << ",mae," << r.mae << '\n';
    }
}

void write_summary(std::ostream& out, const std::vector<ResultRow>& means) {
    out << std::left << std::setw(10) << "config" << std::setw(8) << "length" << std::setw(14) << "mse"
        << std::setw(14) << "mae" << "gate\n";
    for (const auto& r : means) {
        out << std::setw(10) << r.config << std::setw(8) << r.segment_length << std::setw(14) << std::setprecision(6)
            << r.mse << std::setw(14) << r.mae << r.gate << '\n';
    }
}

void write_sweep_table(std::ostream& out, const std::vector<ResultRow>& means) {
    std::map<std::string, std::vector<const ResultRow*>> by_config;
    std::vector<std::string> order;
    for (const auto& r : means) {
        if (!by_config.count(r.config)) order.push_back(r.config);
        by_config[r.config].push_back(&r);
    }
    out << std::setprecision(6);
    for (const auto& config : order) {
        const auto& rows = by_config[config];
        out << config << "_segment_length";
        for (const auto* r : rows) out << ',' << r->segment_length;
        out << '\n' << config << "_mse";
        for (const auto* r : rows) out << ',' << r->mse;
        out << '\n' << config << "_mae";
        for (const auto* r : rows) out << ',' << r->mae;
        out << '\n';
    }
}

} // namespace dmmv::eval
