#pragma once

// Toy masked autoencoder over imaged windows and the masking strategies used
// to forecast (right-appended mask) and backcast (two complementary passes).

#include "dmmv/autodiff.hpp"
#include "dmmv/codec.hpp"
#include "dmmv/transformer.hpp"

#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dmmv::vision {

struct MaeConfig {
    int image_size = 64;
    int patch_size = 8;
    int channels = 1;
    int enc_dim = 64;
    int enc_depth = 3;
    int enc_heads = 4;
    int dec_dim = 48;
    int dec_depth = 2;
    int dec_heads = 4;
    int mlp_ratio = 4;
    /// Learned position tables start from a fixed 2-D sine-cosine table
    /// instead of small random values.
    bool sincos_positions = true;

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }
    int token_dim() const { return patch_size * patch_size * channels; }
    void validate() const;
};

/// One flag per patch on the (S/p) x (S/p) grid, row-major.
class PatchMask {
public:
    explicit PatchMask(int grid = 0, bool masked = false);

    int grid() const { return grid_; }
    std::size_t size() const { return masked_.size(); }
    bool masked(std::size_t patch) const { return masked_[patch] != 0; }
    bool masked(int row, int col) const { return masked_[static_cast<std::size_t>(row * grid_ + col)] != 0; }
    void set(std::size_t patch, bool value) { masked_[patch] = value ? 1 : 0; }

    std::size_t masked_count() const;
    std::size_t visible_count() const { return size() - masked_count(); }
    std::vector<std::size_t> masked_indices() const;
    std::vector<std::size_t> visible_indices() const;
    PatchMask complement() const;

    bool operator==(const PatchMask&) const = default;

private:
    int grid_ = 0;
    std::vector<std::uint8_t> masked_;
};

/// Patch (r, c) masked iff c*p >= b_col.
PatchMask forecast_mask(const codec::ImagingGeometry& geometry);

/// (mask_L, mask_R): mask_L hides columns left of S/2, mask_R the rest.
std::pair<PatchMask, PatchMask> bc_masks(const codec::ImagingGeometry& geometry);

/// Each patch masked with probability `prob`; resampled until at least one
/// patch is masked and one is visible.
PatchMask random_mask(int grid, double prob, std::mt19937_64& rng);

/// Per-pixel flags ([C][S][S]) of the patches masked in `mask`.
std::shared_ptr<const std::vector<std::uint8_t>> pixel_mask(const PatchMask& mask, int channels, int image_size,
                                                            int patch_size);

/// {C,S,S} -> {(S/p)^2, p*p*C}; token feature order is (dy, dx, c).
ad::Tensor patchify(const ad::Tensor& pixels, int patch_size);
ad::Tensor unpatchify(const ad::Tensor& tokens, int channels, int image_size, int patch_size);

/// Something that fills in masked patches of an image. The visible patches of
/// the result are always the input pixels.
class ImageReconstructor {
public:
    virtual ~ImageReconstructor() = default;
    virtual ad::Var reconstruct(const ad::Tensor& pixels, const PatchMask& mask) const = 0;
};

class MaskedAutoencoder final : public ImageReconstructor {
public:
    MaskedAutoencoder(const MaeConfig& config, ad::ParameterStore& store, std::mt19937_64& rng,
                      const std::string& prefix = "vis");

    ad::Var reconstruct(const ad::Tensor& pixels, const PatchMask& mask) const override;

    /// Network output for the masked patches only, {n_masked, token_dim}.
    ad::Var predict_masked_tokens(const ad::Tensor& tokens, const PatchMask& mask) const;

    const MaeConfig& config() const { return config_; }

private:
    MaeConfig config_;
    nn::LinearLayer patch_embed_;
    ad::Parameter* enc_pos_ = nullptr;
    std::vector<nn::TransformerBlock> enc_blocks_;
    nn::LayerNormLayer enc_norm_;
    nn::LinearLayer dec_embed_;
    ad::Parameter* mask_token_ = nullptr;
    ad::Parameter* dec_pos_ = nullptr;
    std::vector<nn::TransformerBlock> dec_blocks_;
    nn::LayerNormLayer dec_norm_;
    nn::LinearLayer dec_pred_;
    std::shared_ptr<const std::vector<std::size_t>> unpatch_index_;
};

/// Differentiable counterparts of codec::decode_forecast / decode_backcast,
/// taking reconstructed pixels {C,S,S}. Outputs are row vectors {1,n}.
ad::Var decode_forecast_var(const ad::Var& pixels, const codec::ImagingGeometry& geometry,
                            const codec::NormStats& stats, int horizon);
ad::Var decode_backcast_var(const ad::Var& pixels, const codec::ImagingGeometry& geometry,
                            const codec::NormStats& stats);

/// Forecast by reconstructing the right-appended masked region. One pass.
ad::Var vf_forecast(std::span<const double> lookback, const codec::ImagingGeometry& geometry, int horizon,
                    const ImageReconstructor& model);

/// Two-pass backcast: pass 1 reconstructs the patches hidden by `first`,
/// pass 2 those hidden by its complement.
ad::Var backcast_two_pass(const codec::ImagedWindow& image, const PatchMask& first, const ImageReconstructor& model);

/// BCMask backcast over the backcast layout (b_col = S).
ad::Var vf_backcast(std::span<const double> lookback, const codec::ImagingGeometry& geometry,
                    const ImageReconstructor& model);

} // namespace dmmv::vision
