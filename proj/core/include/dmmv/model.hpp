#pragma once

// DMMV assemblies. Variant S splits the window with a moving average; variant
// A takes the backcast of the visual forecaster and sends the residual to the
// numerical forecaster. Both fuse the two forecasts with a scalar gate.

#include "dmmv/autodiff.hpp"
#include "dmmv/codec.hpp"
#include "dmmv/numeric.hpp"
#include "dmmv/vision.hpp"

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dmmv::model {

enum class Variant { S, A };
enum class NumKind { linear, patch_transformer };
enum class Fusion { gate, sum };
enum class MaskMode { bcmask, none, random };
enum class Branches { both, visual_only, numerical_only };

struct ModelConfig {
    Variant variant = Variant::A;
    int lookback = 336;
    int horizon = 96;
    int period = 24;
    vision::MaeConfig mae;
    NumKind numerical = NumKind::linear;
    numeric::PatchTransformerConfig patch_transformer;
    Fusion fusion = Fusion::gate;
    MaskMode mask_mode = MaskMode::bcmask;
    bool decomposition = true;
    bool detach_backcast = false;
    Branches branches = Branches::both;
    /// Keeps every visual parameter frozen in all stages, norm layers included.
    bool freeze_visual = false;
    double random_mask_prob = 0.5;
    std::uint64_t init_seed = 0;

    void validate() const;
    codec::ImagingGeometry forecast_geometry() const;
    codec::ImagingGeometry backcast_geometry() const;
    int retained_len() const { return (lookback / period) * period; }
    /// Length of the series handed to the numerical forecaster.
    int numerical_input_len() const;
    bool uses_visual() const { return branches != Branches::numerical_only; }
    bool uses_numerical() const { return branches != Branches::visual_only; }
    /// Backcast that depends on the visual parameters (and on mask sampling).
    bool uses_backcast() const;

    std::map<std::string, std::string> to_map() const;
    /// Applies known keys from `values`; unknown keys raise ConfigError.
    static ModelConfig from_map(const std::map<std::string, std::string>& values, ModelConfig base);
    static ModelConfig from_map(const std::map<std::string, std::string>& values);
};

std::string to_string(Variant v);
std::string to_string(NumKind k);
std::string to_string(Fusion f);
std::string to_string(MaskMode m);
std::string to_string(Branches b);
Variant parse_variant(const std::string& s);
NumKind parse_num_kind(const std::string& s);
Fusion parse_fusion(const std::string& s);
MaskMode parse_mask_mode(const std::string& s);
Branches parse_branches(const std::string& s);

struct DecompositionResult {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> backcast;
};

/// Centered moving average of length 2*floor(P/2)+1 over the series padded by
/// repeating its end values; seasonal = x - trend.
DecompositionResult moving_average_decompose(std::span<const double> x, int period);

double gate_value(double w_g);
/// g * season + (1-g) * trend.
std::vector<double> fuse(std::span<const double> season, std::span<const double> trend, double g);
ad::Var fuse(const ad::Var& season, const ad::Var& trend, const ad::Var& w_g);

/// Visual outputs that stay fixed while the visual parameters are frozen.
struct VisualCache {
    std::vector<double> season;
    std::vector<double> backcast;
};

struct ForwardResult {
    ad::Var output;
    ad::Var season;            // undefined for numerical_only
    ad::Var trend;             // undefined for visual_only
    ad::Var numerical_input;   // what f_num received, {1, T'}
    std::vector<double> imaged_input; // series imaged for the forecast
    ad::Var backcast;          // variant A, {1, n_lb*P}
    double gate = 0.5;
};

class DmmvModel {
public:
    explicit DmmvModel(const ModelConfig& config);

    DmmvModel(const DmmvModel&) = delete;
    DmmvModel& operator=(const DmmvModel&) = delete;

    const ModelConfig& config() const { return config_; }
    ad::ParameterStore& store() { return store_; }
    const ad::ParameterStore& store() const { return store_; }

    ForwardResult forward(std::span<const double> lookback, const VisualCache* cache = nullptr);
    std::vector<double> predict(std::span<const double> lookback);

    /// Runs the frozen-visual part of the forward pass without recording.
    VisualCache visual_outputs(std::span<const double> lookback);

    /// Plain-value decomposition of one window (trend/seasonal for S,
    /// residual/backcast for A).
    DecompositionResult decompose(std::span<const double> lookback);

    double gate() const;
    ad::Parameter& gate_param() { return *gate_; }

    const vision::ImageReconstructor& visual() const { return *visual_; }
    /// The owning MAE; null after a replacement.
    const vision::MaskedAutoencoder* mae() const { return mae_; }
    void replace_visual(std::unique_ptr<vision::ImageReconstructor> visual);
    const numeric::NumericalForecaster* numerical() const { return numerical_.get(); }

    /// Source of the per-batch random masks of MaskMode::random.
    void reseed_masks(std::uint64_t seed) { mask_rng_.seed(seed); }

    std::map<std::string, std::string> metadata() const;

private:
    ad::Var season_forecast(std::span<const double> imaged);
    ad::Var backcast(std::span<const double> lookback);

    ModelConfig config_;
    codec::ImagingGeometry forecast_geo_;
    codec::ImagingGeometry backcast_geo_;
    ad::ParameterStore store_;
    std::unique_ptr<vision::ImageReconstructor> visual_;
    const vision::MaskedAutoencoder* mae_ = nullptr;
    std::unique_ptr<numeric::NumericalForecaster> numerical_;
    ad::Parameter* gate_ = nullptr;
    std::mt19937_64 mask_rng_;
};

/// Metadata keys written by DmmvModel::metadata() are prefixed with this.
inline constexpr const char* kModelKeyPrefix = "model.";

ModelConfig config_from_metadata(const std::map<std::string, std::string>& metadata);

} // namespace dmmv::model
