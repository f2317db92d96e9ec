#include "dmmv/model.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dmmv::model {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::pair<const char*, Enum> (&table)[N], const char* what) {
    for (const auto& [name, value] : table) {
        if (s == name) return value;
    }
    std::string options;
    for (const auto& [name, value] : table) options += (options.empty() ? "" : "|") + std::string(name);
    throw ConfigError(std::string("invalid ") + what + " '" + s + "' (expected " + options + ")");
}

constexpr std::pair<const char*, Variant> kVariants[] = {{"s", Variant::S}, {"a", Variant::A}};
constexpr std::pair<const char*, NumKind> kNumKinds[] = {{"linear", NumKind::linear},
                                                         {"patch_transformer", NumKind::patch_transformer}};
constexpr std::pair<const char*, Fusion> kFusions[] = {{"gate", Fusion::gate}, {"sum", Fusion::sum}};
constexpr std::pair<const char*, MaskMode> kMaskModes[] = {
    {"bcmask", MaskMode::bcmask}, {"none", MaskMode::none}, {"random", MaskMode::random}};
constexpr std::pair<const char*, Branches> kBranches[] = {
    {"both", Branches::both}, {"visual_only", Branches::visual_only}, {"numerical_only", Branches::numerical_only}};

template <typename Enum, std::size_t N>
std::string enum_name(Enum v, const std::pair<const char*, Enum> (&table)[N]) {
    for (const auto& [name, value] : table) {
        if (value == v) return name;
    }
    return "?";
}

int parse_int(const std::string& key, const std::string& s) {
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw ConfigError("key '" + key + "' expects an integer, got '" + s + "'");
    return v;
}

double parse_double(const std::string& key, const std::string& s) {
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

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + s + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<double> values_of(const ad::Var& v) { return v.value().data; }

} // namespace

std::string to_string(Variant v) { return enum_name(v, kVariants); }
std::string to_string(NumKind k) { return enum_name(k, kNumKinds); }
std::string to_string(Fusion f) { return enum_name(f, kFusions); }
std::string to_string(MaskMode m) { return enum_name(m, kMaskModes); }
std::string to_string(Branches b) { return enum_name(b, kBranches); }
Variant parse_variant(const std::string& s) {
    if (s == "S" || s == "A") return s == "S" ? Variant::S : Variant::A;
    return parse_enum(s, kVariants, "variant");
}
NumKind parse_num_kind(const std::string& s) { return parse_enum(s, kNumKinds, "numerical forecaster"); }
Fusion parse_fusion(const std::string& s) { return parse_enum(s, kFusions, "fusion"); }
MaskMode parse_mask_mode(const std::string& s) { return parse_enum(s, kMaskModes, "mask mode"); }
Branches parse_branches(const std::string& s) { return parse_enum(s, kBranches, "branches"); }

void ModelConfig::validate() const {
    if (period < 1) throw ConfigError("period must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (lookback < 2 * period) {
        throw ConfigError("lookback " + std::to_string(lookback) + " must be at least twice the period " +
                          std::to_string(period));
    }
    if (random_mask_prob <= 0.0 || random_mask_prob >= 1.0) throw ConfigError("random_mask_prob must be in (0,1)");
    mae.validate();
    try {
        forecast_geometry().validate();
        backcast_geometry().validate();
    } catch (const GeometryMismatch& e) {
        throw ConfigError(std::string("imaging geometry: ") + e.what());
    }
    if (numerical == NumKind::patch_transformer && numerical_input_len() < patch_transformer.patch_len) {
        throw ConfigError("patch_len exceeds the numerical forecaster input length");
    }
}

codec::ImagingGeometry ModelConfig::forecast_geometry() const {
    return codec::ImagingGeometry::forecast(lookback, horizon, period, mae.image_size, mae.patch_size, mae.channels);
}

codec::ImagingGeometry ModelConfig::backcast_geometry() const {
    return codec::ImagingGeometry::backcast(lookback, period, mae.image_size, mae.patch_size, mae.channels);
}

int ModelConfig::numerical_input_len() const {
    return variant == Variant::A && decomposition ? retained_len() : lookback;
}

bool ModelConfig::uses_backcast() const {
    return variant == Variant::A && decomposition && uses_numerical() && uses_visual() && mask_mode != MaskMode::none;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    return {
        {"variant", to_string(variant)},
        {"lookback", std::to_string(lookback)},
        {"horizon", std::to_string(horizon)},
        {"period", std::to_string(period)},
        {"image_size", std::to_string(mae.image_size)},
        {"patch_size", std::to_string(mae.patch_size)},
        {"channels", std::to_string(mae.channels)},
        {"enc_dim", std::to_string(mae.enc_dim)},
        {"enc_depth", std::to_string(mae.enc_depth)},
        {"enc_heads", std::to_string(mae.enc_heads)},
        {"dec_dim", std::to_string(mae.dec_dim)},
        {"dec_depth", std::to_string(mae.dec_depth)},
        {"dec_heads", std::to_string(mae.dec_heads)},
        {"mlp_ratio", std::to_string(mae.mlp_ratio)},
        {"sincos_positions", mae.sincos_positions ? "true" : "false"},
        {"numerical", to_string(numerical)},
        {"pt_patch_len", std::to_string(patch_transformer.patch_len)},
        {"pt_dim", std::to_string(patch_transformer.dim)},
        {"pt_depth", std::to_string(patch_transformer.depth)},
        {"pt_heads", std::to_string(patch_transformer.heads)},
        {"fusion", to_string(fusion)},
        {"mask_mode", to_string(mask_mode)},
        {"decomposition", decomposition ? "true" : "false"},
        {"detach_backcast", detach_backcast ? "true" : "false"},
        {"branches", to_string(branches)},
        {"freeze_visual", freeze_visual ? "true" : "false"},
        {"random_mask_prob", fmt(random_mask_prob)},
        {"init_seed", std::to_string(init_seed)},
    };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values, ModelConfig c) {
    for (const auto& [key, v] : values) {
        if (key == "variant") c.variant = parse_variant(v);
        else if (key == "lookback") c.lookback = parse_int(key, v);
        else if (key == "horizon") c.horizon = parse_int(key, v);
        else if (key == "period") c.period = parse_int(key, v);
        else if (key == "image_size") c.mae.image_size = parse_int(key, v);
        else if (key == "patch_size") c.mae.patch_size = parse_int(key, v);
        else if (key == "channels") c.mae.channels = parse_int(key, v);
        else if (key == "enc_dim") c.mae.enc_dim = parse_int(key, v);
        else if (key == "enc_depth") c.mae.enc_depth = parse_int(key, v);
        else if (key == "enc_heads") c.mae.enc_heads = parse_int(key, v);
        else if (key == "dec_dim") c.mae.dec_dim = parse_int(key, v);
        else if (key == "dec_depth") c.mae.dec_depth = parse_int(key, v);
        else if (key == "dec_heads") c.mae.dec_heads = parse_int(key, v);
        else if (key == "mlp_ratio") c.mae.mlp_ratio = parse_int(key, v);
        else if (key == "sincos_positions") c.mae.sincos_positions = parse_bool(key, v);
        else if (key == "numerical") c.numerical = parse_num_kind(v);
        else if (key == "pt_patch_len") c.patch_transformer.patch_len = parse_int(key, v);
        else if (key == "pt_dim") c.patch_transformer.dim = parse_int(key, v);
        else if (key == "pt_depth") c.patch_transformer.depth = parse_int(key, v);
        else if (key == "pt_heads") c.patch_transformer.heads = parse_int(key, v);
        else if (key == "fusion") c.fusion = parse_fusion(v);
        else if (key == "mask_mode") c.mask_mode = parse_mask_mode(v);
        else if (key == "decomposition") c.decomposition = parse_bool(key, v);
        else if (key == "detach_backcast") c.detach_backcast = parse_bool(key, v);
        else if (key == "branches") c.branches = parse_branches(v);
        else if (key == "freeze_visual") c.freeze_visual = parse_bool(key, v);
        else if (key == "random_mask_prob") c.random_mask_prob = parse_double(key, v);
        else if (key == "init_seed") c.init_seed = static_cast<std::uint64_t>(parse_double(key, v));
        else throw ConfigError("unknown model key '" + key + "'");
    }
    return c;
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
    return from_map(values, ModelConfig{});
}

DecompositionResult moving_average_decompose(std::span<const double> x, int period) {
    if (x.empty()) throw ShapeMismatch("moving average of an empty series");
    if (period < 1) throw ConfigError("moving average period must be >= 1");
    const auto half = static_cast<std::ptrdiff_t>(period / 2);
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const double k = static_cast<double>(2 * half + 1);
    DecompositionResult out;
    out.trend.resize(x.size());
    out.seasonal.resize(x.size());
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::ptrdiff_t j = t - half; j <= t + half; ++j) acc += x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, n - 1))];
        out.trend[static_cast<std::size_t>(t)] = acc / k;
        out.seasonal[static_cast<std::size_t>(t)] = x[static_cast<std::size_t>(t)] - out.trend[static_cast<std::size_t>(t)];
    }
    return out;
}

double gate_value(double w_g) {
    return w_g >= 0 ? 1.0 / (1.0 + std::exp(-w_g)) : std::exp(w_g) / (1.0 + std::exp(w_g));
}

std::vector<double> fuse(std::span<const double> season, std::span<const double> trend, double g) {
    if (season.size() != trend.size()) {
        throw ShapeMismatch("fuse: season length " + std::to_string(season.size()) + " vs trend length " +
                            std::to_string(trend.size()));
    }
    std::vector<double> out(season.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g * season[i] + (1.0 - g) * trend[i];
    return out;
}

ad::Var fuse(const ad::Var& season, const ad::Var& trend, const ad::Var& w_g) {
    if (season.shape() != trend.shape()) {
        throw ShapeMismatch("fuse: " + ad::shape_str(season.shape()) + " vs " + ad::shape_str(trend.shape()));
    }
    const ad::Var g = ad::sigmoid(w_g);
    return ad::add(ad::mul(season, g), ad::mul(trend, ad::add_scalar(ad::scale(g, -1.0), 1.0)));
}

DmmvModel::DmmvModel(const ModelConfig& config) : config_(config) {
    config_.validate();
    forecast_geo_ = config_.forecast_geometry();
    backcast_geo_ = config_.backcast_geometry();

    // Separate streams so that each branch initializes identically across
    // assemblies that share a seed.
    std::seed_seq visual_seq{config_.init_seed, std::uint64_t{1}};
    std::seed_seq numerical_seq{config_.init_seed, std::uint64_t{2}};
    std::mt19937_64 visual_rng(visual_seq);
    std::mt19937_64 numerical_rng(numerical_seq);
    mask_rng_.seed(config_.init_seed ^ 0x9e3779b97f4a7c15ULL);

    if (config_.uses_visual()) {
        auto mae = std::make_unique<vision::MaskedAutoencoder>(config_.mae, store_, visual_rng);
        mae_ = mae.get();
        visual_ = std::move(mae);
    }
    if (config_.uses_numerical()) {
        const auto in = static_cast<std::size_t>(config_.numerical_input_len());
        const auto h = static_cast<std::size_t>(config_.horizon);
        if (config_.numerical == NumKind::linear) {
            numerical_ = std::make_unique<numeric::LinearForecaster>(store_, in, h, numerical_rng);
        } else {
            numerical_ = std::make_unique<numeric::PatchTransformerForecaster>(store_, in, h, config_.patch_transformer,
                                                                               numerical_rng);
        }
    }
    gate_ = &store_.add("gate.w_g", ad::Tensor({1}, 0.0), ad::ParamGroup::gate, false);
}

void DmmvModel::replace_visual(std::unique_ptr<vision::ImageReconstructor> visual) {
    if (!config_.uses_visual()) throw ConfigError("assembly has no visual branch");
    visual_ = std::move(visual);
    mae_ = nullptr;
}

double DmmvModel::gate() const { return gate_value(gate_->value[0]); }

ad::Var DmmvModel::season_forecast(std::span<const double> imaged) {
    return vision::vf_forecast(imaged, forecast_geo_, config_.horizon, *visual_);
}

ad::Var DmmvModel::backcast(std::span<const double> lookback) {
    switch (config_.mask_mode) {
    case MaskMode::bcmask:
        return vision::vf_backcast(lookback, backcast_geo_, *visual_);
    case MaskMode::random: {
        const auto image = codec::encode_window(lookback, backcast_geo_);
        const auto first = vision::random_mask(backcast_geo_.patch_grid(), config_.random_mask_prob, mask_rng_);
        return vision::decode_backcast_var(vision::backcast_two_pass(image, first, *visual_), backcast_geo_,
                                           image.stats);
    }
    case MaskMode::none:
        break;
    }
    const auto retained = lookback.subspan(lookback.size() - static_cast<std::size_t>(config_.retained_len()));
    return ad::constant(ad::Tensor::row(std::vector<double>(retained.begin(), retained.end())));
}

ForwardResult DmmvModel::forward(std::span<const double> lookback, const VisualCache* cache) {
    if (lookback.size() != static_cast<std::size_t>(config_.lookback)) {
        throw ShapeMismatch("model expects a look-back of " + std::to_string(config_.lookback) + ", got " +
                            std::to_string(lookback.size()));
    }
    ForwardResult r;
    const std::vector<double> x(lookback.begin(), lookback.end());
    ad::Var numerical_input;

    if (config_.variant == Variant::S && config_.decomposition) {
        auto parts = moving_average_decompose(x, config_.period);
        r.imaged_input = std::move(parts.seasonal);
        numerical_input = ad::constant(ad::Tensor::row(std::move(parts.trend)));
    } else {
        r.imaged_input = x;
        if (config_.variant == Variant::A && config_.decomposition && config_.uses_numerical()) {
            const auto n_ret = static_cast<std::size_t>(config_.retained_len());
            const std::vector<double> retained(x.end() - static_cast<std::ptrdiff_t>(n_ret), x.end());
            ad::Var xhat;
            if (!config_.uses_backcast()) {
                xhat = ad::constant(ad::Tensor::row(retained));
            } else if (cache && !cache->backcast.empty()) {
                xhat = ad::constant(ad::Tensor::row(cache->backcast));
            } else {
                xhat = backcast(x);
                if (config_.detach_backcast) xhat = ad::detach(xhat);
            }
            r.backcast = xhat;
            numerical_input = ad::sub(ad::constant(ad::Tensor::row(retained)), xhat);
        } else {
            numerical_input = ad::constant(ad::Tensor::row(x));
        }
    }
    r.numerical_input = numerical_input;

    if (config_.uses_visual()) {
        r.season = cache && !cache->season.empty() ? ad::constant(ad::Tensor::row(cache->season))
                                                   : season_forecast(r.imaged_input);
    }
    if (config_.uses_numerical()) r.trend = numerical_->forecast(numerical_input);

    r.gate = gate();
    switch (config_.branches) {
    case Branches::visual_only:
        r.output = r.season;
        break;
    case Branches::numerical_only:
        r.output = r.trend;
        break;
    case Branches::both:
        r.output = config_.fusion == Fusion::sum ? ad::add(r.season, r.trend)
                                                 : fuse(r.season, r.trend, ad::param(*gate_));
        break;
    }
    return r;
}

std::vector<double> DmmvModel::predict(std::span<const double> lookback) {
    ad::NoGradGuard guard;
    return values_of(forward(lookback).output);
}

VisualCache DmmvModel::visual_outputs(std::span<const double> lookback) {
    ad::NoGradGuard guard;
    VisualCache cache;
    if (!config_.uses_visual()) return cache;
    if (config_.variant == Variant::S && config_.decomposition) {
        cache.season = values_of(season_forecast(moving_average_decompose(lookback, config_.period).seasonal));
    } else {
        cache.season = values_of(season_forecast(lookback));
    }
    if (config_.uses_backcast() && config_.mask_mode == MaskMode::bcmask) cache.backcast = values_of(backcast(lookback));
    return cache;
}

DecompositionResult DmmvModel::decompose(std::span<const double> lookback) {
    ad::NoGradGuard guard;
    const ForwardResult r = forward(lookback);
    DecompositionResult out;
    if (config_.variant == Variant::S) {
        out.trend = values_of(r.numerical_input);
        out.seasonal = r.imaged_input;
    } else {
        out.trend = values_of(r.numerical_input);
        if (r.backcast.defined()) out.backcast = values_of(r.backcast);
    }
    return out;
}

std::map<std::string, std::string> DmmvModel::metadata() const {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : config_.to_map()) out[kModelKeyPrefix + k] = v;
    return out;
}

ModelConfig config_from_metadata(const std::map<std::string, std::string>& metadata) {
    std::map<std::string, std::string> keys;
    const std::string prefix = kModelKeyPrefix;
    for (const auto& [k, v] : metadata) {
        if (k.rfind(prefix, 0) == 0) keys[k.substr(prefix.size())] = v;
    }
    if (keys.empty()) throw ConfigMismatch("checkpoint carries no model assembly");
    return ModelConfig::from_map(keys);
}

} // namespace dmmv::model
