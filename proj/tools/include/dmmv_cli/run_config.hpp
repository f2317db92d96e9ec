#pragma once

// Resolved configuration of one CLI invocation: a key=value file, then flag
// overrides, validated before any compute.

#include "dmmv/data.hpp"
#include "dmmv/eval.hpp"
#include "dmmv/model.hpp"
#include "dmmv/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmmv::cli {

using KeyValues = std::map<std::string, std::string>;

struct SynthSpec {
    std::string kind; // decaying_sine | trend_sine
    std::size_t length = 2400;
    int period = 24;
    double a_start = 1.0;
    double a_end = 0.5;
    double slope = 0.005;
    double amp = 1.0;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

struct RunConfig {
    std::string command;
    std::optional<std::filesystem::path> dataset;
    std::optional<SynthSpec> synth;
    std::string preset;
    model::ModelConfig model;
    train::TrainConfig train;
    data::SplitSpec split{0.6, 0.2, 0.2};
    std::size_t train_stride = 1;
    std::size_t eval_stride = 1;
    std::filesystem::path output = "runs/latest";
    std::optional<std::filesystem::path> checkpoint;
    std::string eval_split = "test";
    std::size_t window = 0;
    bool raw_metrics = false;
    std::vector<int> lengths{16, 20, 24, 28, 32, 36, 40, 44, 48};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<std::string> modes{"base", "c", "d", "e", "f", "g"};
    bool include_dmmv_a = false;
    std::optional<std::filesystem::path> csv;
    int workers = 1;

    /// Model keys given explicitly by the user (file or flags).
    KeyValues explicit_model_keys;

    eval::ExperimentSpec experiment() const;
    /// Every resolved key, suitable for a config snapshot.
    KeyValues snapshot() const;
};

const std::vector<std::string>& commands();

/// `key = value` lines; '#' starts a comment. Duplicate keys are an error.
KeyValues parse_config_text(const std::string& text, const std::string& source = "<config>");
KeyValues read_config_file(const std::filesystem::path& path);

/// Applies `file` then `overrides` on top of the defaults. Throws ConfigError
/// for unknown keys, malformed values or missing required inputs.
RunConfig resolve(const std::string& command, const KeyValues& file, const KeyValues& overrides);

void write_snapshot(const std::filesystem::path& path, const RunConfig& config);

} // namespace dmmv::cli
