#include "dmmv_cli/run_config.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace dmmv::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0') throw ConfigError("key '" + key + "' expects a number, got '" + v + "'");
    return d;
}

long long to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != static_cast<double>(static_cast<long long>(d))) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + v + "'");
    }
    return static_cast<long long>(d);
}

std::size_t to_count(const std::string& key, const std::string& v) {
    const auto n = to_int(key, v);
    if (n < 0) throw ConfigError("key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "' expects true|false, got '" + v + "'");
}

const std::set<std::string>& run_keys() {
    static const std::set<std::string> keys = {
        "dataset",      "preset",         "synth",          "synth_length", "synth_period", "synth_a_start",
        "synth_a_end",  "synth_slope",    "synth_amp",      "synth_noise_std", "synth_seed", "split",
        "train_stride", "eval_stride",    "output",         "checkpoint",   "eval_split",   "window",
        "raw_metrics",  "lengths",        "seeds",          "modes",        "include_dmmv_a", "csv",
        "workers",      "seed",
    };
    return keys;
}

std::set<std::string> keys_of(const KeyValues& kv) {
    std::set<std::string> out;
    for (const auto& [k, v] : kv) out.insert(k);
    return out;
}

} // namespace

const std::vector<std::string>& commands() {
    static const std::vector<std::string> names = {"train", "eval", "sweep-bias", "synth", "decompose", "ablate"};
    return names;
}

KeyValues parse_config_text(const std::string& text, const std::string& source) {
    KeyValues out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path.string());
}

RunConfig resolve(const std::string& command, const KeyValues& file, const KeyValues& overrides) {
    if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
        throw ConfigError("unknown command '" + command + "'");
    }
    KeyValues all = file;
    for (const auto& [k, v] : overrides) all[k] = v;

    const auto model_keys = keys_of(model::ModelConfig{}.to_map());
    auto train_keys = keys_of(train::TrainConfig{}.to_map());
    train_keys.erase("seed");

    RunConfig c;
    c.command = command;
    KeyValues model_values, train_values;
    for (const auto& [k, v] : all) {
        if (model_keys.count(k)) model_values[k] = v;
        else if (train_keys.count(k)) train_values[k] = v;
        else if (!run_keys().count(k)) throw ConfigError("unknown key '" + k + "'");
    }

    auto get = [&](const std::string& k) -> const std::string* {
        const auto it = all.find(k);
        return it == all.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("preset")) {
        const auto preset = data::find_preset(*v);
        if (!preset) throw ConfigError("unknown preset '" + *v + "'");
        c.preset = *v;
        c.model.period = preset->period;
        c.model.lookback = preset->lookback;
        c.split = preset->split;
    }
    if (const auto* v = get("seed")) {
        const auto seed = static_cast<std::uint64_t>(to_count("seed", *v));
        c.model.init_seed = seed;
        c.train.seed = seed;
    }
    c.model = model::ModelConfig::from_map(model_values, c.model);
    c.train = train::TrainConfig::from_map(train_values, c.train);
    c.explicit_model_keys = model_values;

    if (const auto* v = get("dataset")) c.dataset = *v;
    if (const auto* v = get("synth")) {
        SynthSpec s;
        s.kind = *v;
        if (s.kind != "decaying_sine" && s.kind != "trend_sine") {
            throw ConfigError("synth must be decaying_sine or trend_sine, got '" + s.kind + "'");
        }
        if (const auto* x = get("synth_length")) s.length = to_count("synth_length", *x);
        if (const auto* x = get("synth_period")) s.period = static_cast<int>(to_int("synth_period", *x));
        if (const auto* x = get("synth_a_start")) s.a_start = to_double("synth_a_start", *x);
        if (const auto* x = get("synth_a_end")) s.a_end = to_double("synth_a_end", *x);
        if (const auto* x = get("synth_slope")) s.slope = to_double("synth_slope", *x);
        if (const auto* x = get("synth_amp")) s.amp = to_double("synth_amp", *x);
        if (const auto* x = get("synth_noise_std")) s.noise_std = to_double("synth_noise_std", *x);
        if (const auto* x = get("synth_seed")) s.seed = static_cast<std::uint64_t>(to_count("synth_seed", *x));
        if (s.length == 0 || s.period < 1 || s.noise_std < 0) throw ConfigError("invalid synthetic series parameters");
        c.synth = s;
    }
    if (c.dataset && c.synth) throw ConfigError("give either dataset or synth, not both");

    if (const auto* v = get("split")) {
        const auto parts = split_list(*v);
        if (parts.size() != 3) throw ConfigError("split expects three ratios train,val,test");
        c.split = {to_double("split", parts[0]), to_double("split", parts[1]), to_double("split", parts[2])};
    }
    c.split.validate();
    if (const auto* v = get("train_stride")) c.train_stride = to_count("train_stride", *v);
    if (const auto* v = get("eval_stride")) c.eval_stride = to_count("eval_stride", *v);
    if (c.train_stride == 0 || c.eval_stride == 0) throw ConfigError("strides must be >= 1");
    if (const auto* v = get("output")) c.output = *v;
    if (const auto* v = get("checkpoint")) c.checkpoint = *v;
    if (const auto* v = get("eval_split")) {
        if (*v != "train" && *v != "val" && *v != "test") throw ConfigError("eval_split must be train, val or test");
        c.eval_split = *v;
    }
    if (const auto* v = get("window")) c.window = to_count("window", *v);
    if (const auto* v = get("raw_metrics")) c.raw_metrics = to_bool("raw_metrics", *v);
    if (const auto* v = get("lengths")) {
        c.lengths.clear();
        for (const auto& item : split_list(*v)) c.lengths.push_back(static_cast<int>(to_int("lengths", item)));
        if (c.lengths.empty()) throw ConfigError("lengths is empty");
    }
    if (const auto* v = get("seeds")) {
        c.seeds.clear();
        for (const auto& item : split_list(*v)) c.seeds.push_back(static_cast<std::uint64_t>(to_count("seeds", item)));
        if (c.seeds.empty()) throw ConfigError("seeds is empty");
    }
    if (const auto* v = get("modes")) {
        c.modes = split_list(*v);
        if (c.modes.empty()) throw ConfigError("modes is empty");
        for (const auto& m : c.modes) eval::apply_ablation(c.model, m);
    }
    if (const auto* v = get("include_dmmv_a")) c.include_dmmv_a = to_bool("include_dmmv_a", *v);
    if (const auto* v = get("csv")) c.csv = *v;
    if (const auto* v = get("workers")) c.workers = static_cast<int>(to_count("workers", *v));
    if (const char* env = std::getenv("DMMV_WORKERS")) c.workers = static_cast<int>(to_count("DMMV_WORKERS", env));
    if (c.workers < 1) c.workers = 1;

    if (command != "synth") {
        c.model.validate();
        c.train.validate();
        if (!c.dataset && !c.synth) throw ConfigError(command + " needs a dataset path or a synth kind");
    } else if (!c.synth) {
        throw ConfigError("synth needs synth=decaying_sine|trend_sine");
    }
    if ((command == "eval" || command == "decompose") && !c.checkpoint) {
        throw ConfigError(command + " needs a checkpoint");
    }
    return c;
}

eval::ExperimentSpec RunConfig::experiment() const {
    eval::ExperimentSpec spec;
    spec.model = model;
    spec.train = train;
    spec.split = split;
    spec.train_stride = train_stride;
    spec.eval_stride = eval_stride;
    return spec;
}

KeyValues RunConfig::snapshot() const {
    KeyValues out = model.to_map();
    for (const auto& [k, v] : train.to_map()) out[k] = v;
    out.erase("seed");
    out["command"] = command;
    if (dataset) out["dataset"] = dataset->string();
    if (synth) {
        std::ostringstream os;
        os.precision(17);
        out["synth"] = synth->kind;
        out["synth_length"] = std::to_string(synth->length);
        out["synth_period"] = std::to_string(synth->period);
        os << synth->a_start;
        out["synth_a_start"] = os.str();
        os.str("");
        os << synth->a_end;
        out["synth_a_end"] = os.str();
        os.str("");
        os << synth->slope;
        out["synth_slope"] = os.str();
        os.str("");
        os << synth->amp;
        out["synth_amp"] = os.str();
        os.str("");
        os << synth->noise_std;
        out["synth_noise_std"] = os.str();
        out["synth_seed"] = std::to_string(synth->seed);
    }
    if (!preset.empty()) out["preset"] = preset;
    std::ostringstream split_text;
    split_text.precision(17);
    split_text << split.train << ',' << split.val << ',' << split.test;
    out["split"] = split_text.str();
    out["train_stride"] = std::to_string(train_stride);
    out["eval_stride"] = std::to_string(eval_stride);
    out["output"] = output.string();
    if (checkpoint) out["checkpoint"] = checkpoint->string();
    out["eval_split"] = eval_split;
    out["window"] = std::to_string(window);
    out["raw_metrics"] = raw_metrics ? "true" : "false";
    return out;
}

void write_snapshot(const std::filesystem::path& path, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [k, v] : config.snapshot()) out << k << " = " << v << '\n';
}

} // namespace dmmv::cli
