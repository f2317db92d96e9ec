#include "dmmv_cli/commands.hpp"

#include "dmmv/checkpoint.hpp"
#include "dmmv/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

namespace dmmv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kSeedKey = "run.seed";

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

json report_json(const eval::MetricReport& r) {
    return {{"mse", r.mse},
            {"mae", r.mae},
            {"windows", r.windows},
            {"scale", r.scale},
            {"mse_per_step", r.mse_per_step},
            {"mae_per_step", r.mae_per_step}};
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

const std::vector<codec::UnivariateWindow>& pick_split(const eval::PreparedData& data, const std::string& name) {
    if (name == "train") return data.train;
    if (name == "val") return data.val;
    return data.test;
}

std::map<std::string, std::string> checkpoint_metadata(const model::DmmvModel& m, const RunConfig& config) {
    auto meta = m.metadata();
    meta[kSeedKey] = std::to_string(config.train.seed);
    return meta;
}

struct LoadedModel {
    std::unique_ptr<model::DmmvModel> model;
    std::uint64_t seed = 0;
};

// Rebuilds the stored assembly. Model keys given on the command line must
// agree with it.
LoadedModel load_model(const RunConfig& config) {
    const auto data = ad::load_checkpoint(*config.checkpoint);
    const auto stored = model::config_from_metadata(data.metadata);
    const auto stored_map = stored.to_map();
    const auto requested_map = config.model.to_map();
    for (const auto& [key, value] : config.explicit_model_keys) {
        if (stored_map.at(key) != requested_map.at(key)) {
            throw ConfigMismatch("checkpoint was built with " + key + "=" + stored_map.at(key) + " but " + key +
                                 "=" + value + " was requested");
        }
    }
    LoadedModel out;
    out.model = std::make_unique<model::DmmvModel>(stored);
    ad::apply_checkpoint(data, out.model->store());
    if (const auto it = data.metadata.find(kSeedKey); it != data.metadata.end()) {
        out.seed = std::stoull(it->second);
    }
    return out;
}

} // namespace

data::MultivariateSeries load_series(const RunConfig& config) {
    if (config.dataset) return data::load_csv(*config.dataset);
    if (!config.synth) throw ConfigError("no dataset or synth spec");
    const auto& s = *config.synth;
    if (s.kind == "decaying_sine") return data::synth_decaying_sine(s.length, s.period, s.a_start, s.a_end);
    return data::synth_trend_sine(s.length, s.period, s.slope, s.amp, s.noise_std, s.seed);
}

void cmd_train(const RunConfig& config, std::ostream& log) {
    const auto series = load_series(config);
    const auto spec = config.experiment();
    const auto prepared = eval::prepare(series, spec);
    fs::create_directories(config.output / "checkpoints");
    write_snapshot(config.output / "config.txt", config);

    model::DmmvModel m(spec.model);
    log << "train: " << prepared.train.size() << " windows, val: " << prepared.val.size()
        << ", test: " << prepared.test.size() << '\n';
    const auto progress = [&](const train::EpochRecord& e) {
        log << "stage " << e.stage << " epoch " << e.epoch << " train_mse " << e.train_mse << " val_mse "
            << e.val_mse << " gate " << e.gate << '\n';
    };
    const auto save_stage = [&](int stage) {
        ad::save_checkpoint(config.output / "checkpoints" / ("stage" + std::to_string(stage) + ".ckpt"), m.store(),
                            checkpoint_metadata(m, config));
    };
    const auto history = train::train_two_stage(m, prepared.train, prepared.val, spec.train, progress, save_stage);
    ad::save_checkpoint(config.output / "checkpoints" / "model.ckpt", m.store(), checkpoint_metadata(m, config));
    {
        auto out = open_out(config.output / "history.csv");
        train::write_history_csv(out, history);
    }

    const auto mask_seed = train::validation_mask_seed(spec.train.seed);
    const auto* raw = config.raw_metrics ? &prepared.stats : nullptr;
    const auto val = eval::evaluate(m, prepared.val, raw, mask_seed);
    const auto test = eval::evaluate(m, prepared.test, raw, mask_seed);
    json stages = json::array();
    for (const auto& s : history.stages) {
        stages.push_back({{"stage", s.stage},
                          {"epochs_run", s.epochs_run},
                          {"best_epoch", s.best_epoch},
                          {"initial_val", s.initial_val},
                          {"best_val", s.best_val},
                          {"stopped_early", s.stopped_early}});
    }
    write_json(config.output / "metrics.json",
               {{"val", report_json(val)}, {"test", report_json(test)}, {"gate", m.gate()}, {"stages", stages}});
    log << "test mse " << test.mse << " mae " << test.mae << " over " << test.windows << " windows\n";
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
    auto loaded = load_model(config);
    auto spec = config.experiment();
    spec.model = loaded.model->config();
    const auto prepared = eval::prepare(load_series(config), spec);
    const auto& windows = pick_split(prepared, config.eval_split);
    const auto report = eval::evaluate(*loaded.model, windows, config.raw_metrics ? &prepared.stats : nullptr,
                                       train::validation_mask_seed(loaded.seed));
    auto j = report_json(report);
    j["split"] = config.eval_split;
    j["checkpoint"] = config.checkpoint->string();
    write_json(config.output / "eval_metrics.json", j);
    log << config.eval_split << " mse " << report.mse << " mae " << report.mae << " over " << report.windows
        << " windows\n";
}

void cmd_sweep_bias(const RunConfig& config, std::ostream& log) {
    const auto series = load_series(config);
    fs::create_directories(config.output / "tables");
    write_snapshot(config.output / "config.txt", config);
    eval::SweepSpec sweep;
    sweep.segment_lengths = config.lengths;
    sweep.seeds = config.seeds;
    sweep.include_dmmv_a = config.include_dmmv_a;
    sweep.workers = config.workers;
    const auto rows = eval::bias_sweep(series, config.experiment(), sweep);
    const auto means = eval::mean_over_seeds(rows);
    {
        auto out = open_out(config.csv.value_or(config.output / "tables" / "bias_sweep.csv"));
        eval::write_rows_csv(out, means);
    }
    {
        auto out = open_out(config.output / "tables" / "bias_sweep_runs.csv");
        eval::write_rows_csv(out, rows);
    }
    {
        auto out = open_out(config.output / "tables" / "bias_sweep_wide.csv");
        eval::write_sweep_table(out, means);
    }
    {
        auto out = open_out(config.output / "tables" / "bias_sweep_long.csv");
        eval::write_long_csv(out, means);
    }
    eval::write_summary(log, means);
}

void cmd_ablate(const RunConfig& config, std::ostream& log) {
    const auto series = load_series(config);
    fs::create_directories(config.output / "tables");
    write_snapshot(config.output / "config.txt", config);
    const auto rows = eval::ablation_suite(series, config.experiment(), config.modes, config.seeds, config.workers);
    const auto means = eval::mean_over_seeds(rows);
    {
        auto out = open_out(config.csv.value_or(config.output / "tables" / "ablation.csv"));
        eval::write_rows_csv(out, means);
    }
    {
        auto out = open_out(config.output / "tables" / "ablation_runs.csv");
        eval::write_rows_csv(out, rows);
    }
    {
        auto out = open_out(config.output / "tables" / "ablation_long.csv");
        eval::write_long_csv(out, means);
    }
    eval::write_summary(log, means);
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
    const auto series = load_series(config);
    const fs::path path = config.csv.value_or(config.output / (config.synth->kind + ".csv"));
    auto out = open_out(path);
    data::write_csv(out, series);
    log << "wrote " << series.length() << " rows to " << path.string() << '\n';
}

void cmd_decompose(const RunConfig& config, std::ostream& log) {
    auto loaded = load_model(config);
    auto& m = *loaded.model;
    auto spec = config.experiment();
    spec.model = m.config();
    const auto prepared = eval::prepare(load_series(config), spec);
    const auto& windows = pick_split(prepared, config.eval_split);
    if (config.window >= windows.size()) {
        throw ConfigError("window " + std::to_string(config.window) + " outside the " + config.eval_split +
                          " split (" + std::to_string(windows.size()) + " windows)");
    }
    // Same mask stream as cmd_eval, advanced to this window.
    const auto forecasts = eval::predict_all(
        m, std::vector<codec::UnivariateWindow>(windows.begin(), windows.begin() + config.window + 1),
        train::validation_mask_seed(loaded.seed));
    const auto& w = windows[config.window];
    const auto& forecast = forecasts.back();
    const auto parts = m.decompose(w.lookback);

    const std::size_t t_len = w.lookback.size();
    const std::size_t h_len = w.target.size();
    const bool seasonal_trend = m.config().variant == model::Variant::S;
    const auto& first = parts.trend;
    const auto& second = seasonal_trend ? parts.seasonal : parts.backcast;
    const fs::path path = config.csv.value_or(config.output / "tables" / ("decompose_" + config.eval_split + "_" +
                                                                          std::to_string(config.window) + ".csv"));
    auto out = open_out(path);
    out << "t,x,trend_or_residual,seasonal_or_backcast,forecast,ground_truth\n";
    const auto cell = [&](const std::vector<double>& v, std::size_t t) {
        // Components cover the tail of the look-back.
        if (v.empty() || t >= t_len || t + v.size() < t_len) return std::string();
        std::ostringstream s;
        s << std::setprecision(17) << v[t + v.size() - t_len];
        return s.str();
    };
    for (std::size_t t = 0; t < t_len + h_len; ++t) {
        out << t << ',';
        if (t < t_len) out << w.lookback[t];
        out << ',' << cell(first, t) << ',' << cell(second, t) << ',';
        if (t >= t_len) out << forecast[t - t_len] << ',' << w.target[t - t_len];
        else out << ',';
        out << '\n';
    }
    log << "wrote " << path.string() << '\n';
}

void dispatch(const RunConfig& config, std::ostream& log) {
    if (config.command == "train") cmd_train(config, log);
    else if (config.command == "eval") cmd_eval(config, log);
    else if (config.command == "sweep-bias") cmd_sweep_bias(config, log);
    else if (config.command == "synth") cmd_synth(config, log);
    else if (config.command == "decompose") cmd_decompose(config, log);
    else if (config.command == "ablate") cmd_ablate(config, log);
    else throw ConfigError("unknown command '" + config.command + "'");
}

namespace {

std::string key_of_flag(const std::string& flag) {
    std::string key = flag.substr(2);
    for (auto& ch : key) {
        if (ch == '-') ch = '_';
    }
    return key;
}

KeyValues parse_overrides(const std::vector<std::string>& extras, const std::vector<std::string>& sets) {
    KeyValues out;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
        out[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const auto& arg = extras[i];
        if (arg.rfind("--", 0) != 0 || arg.size() < 3) throw ConfigError("unexpected argument '" + arg + "'");
        if (const auto eq = arg.find('='); eq != std::string::npos) {
            out[key_of_flag(arg.substr(0, eq))] = arg.substr(eq + 1);
        } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
            out[key_of_flag(arg)] = extras[++i];
        } else {
            out[key_of_flag(arg)] = "true";
        }
    }
    return out;
}

constexpr const char* kFooter =
    "Any configuration key may be given as --key value (dashes or underscores),\n"
    "as --set key=value, or in the --config file. Flags override the file.\n"
    "See README.md for the key reference.";

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dual multi-modal view time-series forecasting", "dmmv"};
    app.require_subcommand(1);
    app.footer(kFooter);
    std::string config_path;
    std::vector<std::string> sets;
    const std::map<std::string, std::string> help = {
        {"train", "train a model and write checkpoints, history.csv and metrics.json"},
        {"eval", "evaluate a checkpoint on a split"},
        {"sweep-bias", "segment-length sweep of the visual forecaster"},
        {"synth", "write a synthetic dataset as CSV"},
        {"decompose", "dump the decomposition of one window as CSV"},
        {"ablate", "run the ablation grid"},
    };
    for (const auto& name : commands()) {
        auto* sub = app.add_subcommand(name, help.at(name));
        sub->allow_extras();
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--set", sets, "key=value override (repeatable)");
    }

    std::vector<const char*> argv{"dmmv"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << '\n' << app.help();
        return kExitConfig;
    }

    auto* sub = app.get_subcommands().front();
    RunConfig config;
    try {
        const auto file = config_path.empty() ? KeyValues{} : read_config_file(config_path);
        config = resolve(sub->get_name(), file, parse_overrides(sub->remaining(), sets));
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    try {
        dispatch(config, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ConfigMismatch& e) {
        err << "config mismatch: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace dmmv::cli
