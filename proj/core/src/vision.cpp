#include "dmmv/vision.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dmmv::vision {

void MaeConfig::validate() const {
    if (image_size < 1 || patch_size < 1 || image_size % patch_size != 0) {
        throw ConfigError("MAE image size must be a positive multiple of the patch size");
    }
    if ((image_size / 2) % patch_size != 0) throw ConfigError("MAE needs (S/2) mod p = 0");
    if (channels < 1) throw ConfigError("MAE channels must be >= 1");
    if (enc_dim < 1 || enc_heads < 1 || enc_dim % enc_heads != 0) {
        throw ConfigError("encoder dim must be divisible by encoder heads");
    }
    if (dec_dim < 1 || dec_heads < 1 || dec_dim % dec_heads != 0) {
        throw ConfigError("decoder dim must be divisible by decoder heads");
    }
    if (enc_depth < 0 || dec_depth < 0 || mlp_ratio < 1) throw ConfigError("invalid MAE depth or mlp ratio");
    if (sincos_positions && (enc_dim % 4 != 0 || dec_dim % 4 != 0)) {
        throw ConfigError("sine-cosine position tables need dims divisible by 4");
    }
}

PatchMask::PatchMask(int grid, bool masked)
    : grid_(grid), masked_(static_cast<std::size_t>(grid) * static_cast<std::size_t>(grid), masked ? 1 : 0) {}

std::size_t PatchMask::masked_count() const {
    return static_cast<std::size_t>(std::count(masked_.begin(), masked_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> PatchMask::masked_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < masked_.size(); ++i) {
        if (masked_[i]) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> PatchMask::visible_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < masked_.size(); ++i) {
        if (!masked_[i]) out.push_back(i);
    }
    return out;
}

PatchMask PatchMask::complement() const {
    PatchMask out(grid_);
    for (std::size_t i = 0; i < masked_.size(); ++i) out.masked_[i] = masked_[i] ? 0 : 1;
    return out;
}

PatchMask forecast_mask(const codec::ImagingGeometry& geometry) {
    geometry.validate();
    const int grid = geometry.patch_grid();
    PatchMask mask(grid);
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            mask.set(static_cast<std::size_t>(r * grid + c), c * geometry.patch_size >= geometry.boundary_col);
        }
    }
    return mask;
}

std::pair<PatchMask, PatchMask> bc_masks(const codec::ImagingGeometry& geometry) {
    geometry.validate();
    const int grid = geometry.patch_grid();
    const int half = geometry.image_size / 2;
    PatchMask left(grid), right(grid);
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            const bool in_left = c * geometry.patch_size < half;
            left.set(static_cast<std::size_t>(r * grid + c), in_left);
            right.set(static_cast<std::size_t>(r * grid + c), !in_left);
        }
    }
    return {left, right};
}

PatchMask random_mask(int grid, double prob, std::mt19937_64& rng) {
    if (grid * grid < 2) throw ConfigError("random mask needs at least two patches");
    std::bernoulli_distribution coin(prob);
    PatchMask mask(grid);
    do {
        for (std::size_t i = 0; i < mask.size(); ++i) mask.set(i, coin(rng));
    } while (mask.masked_count() == 0 || mask.visible_count() == 0);
    return mask;
}

std::shared_ptr<const std::vector<std::uint8_t>> pixel_mask(const PatchMask& mask, int channels, int image_size,
                                                            int patch_size) {
    const int grid = image_size / patch_size;
    if (mask.grid() != grid) throw ShapeMismatch("patch mask grid does not match image");
    auto out = std::make_shared<std::vector<std::uint8_t>>(
        static_cast<std::size_t>(channels) * image_size * image_size, 0);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < image_size; ++y) {
            for (int x = 0; x < image_size; ++x) {
                const bool m = mask.masked(y / patch_size, x / patch_size);
                (*out)[(static_cast<std::size_t>(c) * image_size + y) * image_size + x] = m ? 1 : 0;
            }
        }
    }
    return out;
}

namespace {

/// Fixed 2-D sine-cosine table {grid*grid, dim}: half the channels encode the
/// row, half the column.
ad::Tensor sincos_2d(int grid, std::size_t dim) {
    ad::Tensor out({static_cast<std::size_t>(grid * grid), dim});
    const std::size_t quarter = dim / 4;
    for (int r = 0; r < grid; ++r) {
        for (int c = 0; c < grid; ++c) {
            const std::size_t row = static_cast<std::size_t>(r * grid + c);
            for (std::size_t k = 0; k < quarter; ++k) {
                const double omega = 1.0 / std::pow(10000.0, static_cast<double>(k) / static_cast<double>(quarter));
                out.at(row, k) = std::sin(r * omega);
                out.at(row, quarter + k) = std::cos(r * omega);
                out.at(row, 2 * quarter + k) = std::sin(c * omega);
                out.at(row, 3 * quarter + k) = std::cos(c * omega);
            }
        }
    }
    return out;
}

/// Flat token index feeding each pixel of a {C,S,S} image.
std::vector<std::size_t> pixel_to_token_index(int channels, int image_size, int patch_size) {
    const int grid = image_size / patch_size;
    const std::size_t token_dim = static_cast<std::size_t>(patch_size) * patch_size * channels;
    std::vector<std::size_t> index(static_cast<std::size_t>(channels) * image_size * image_size);
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < image_size; ++y) {
            for (int x = 0; x < image_size; ++x) {
                const std::size_t g = static_cast<std::size_t>((y / patch_size) * grid + x / patch_size);
                const std::size_t f = static_cast<std::size_t>(((y % patch_size) * patch_size + x % patch_size) * channels + c);
                index[(static_cast<std::size_t>(c) * image_size + y) * image_size + x] = g * token_dim + f;
            }
        }
    }
    return index;
}

void check_image(const ad::Tensor& pixels, int patch_size) {
    if (pixels.rank() != 3 || pixels.shape[1] != pixels.shape[2]) {
        throw ShapeMismatch("expected a {C,S,S} image, got " + ad::shape_str(pixels.shape));
    }
    if (patch_size < 1 || pixels.shape[1] % static_cast<std::size_t>(patch_size) != 0) {
        throw ShapeMismatch("image side " + std::to_string(pixels.shape[1]) + " is not a multiple of patch size " +
                            std::to_string(patch_size));
    }
}

} // namespace

ad::Tensor patchify(const ad::Tensor& pixels, int patch_size) {
    check_image(pixels, patch_size);
    const int channels = static_cast<int>(pixels.shape[0]);
    const int s = static_cast<int>(pixels.shape[1]);
    const int grid = s / patch_size;
    const auto index = pixel_to_token_index(channels, s, patch_size);
    ad::Tensor tokens({static_cast<std::size_t>(grid * grid),
                       static_cast<std::size_t>(patch_size * patch_size * channels)});
    for (std::size_t i = 0; i < index.size(); ++i) tokens[index[i]] = pixels[i];
    return tokens;
}

ad::Tensor unpatchify(const ad::Tensor& tokens, int channels, int image_size, int patch_size) {
    const int grid = image_size / patch_size;
    if (tokens.rank() != 2 || tokens.shape[0] != static_cast<std::size_t>(grid * grid) ||
        tokens.shape[1] != static_cast<std::size_t>(patch_size * patch_size * channels)) {
        throw ShapeMismatch("token tensor " + ad::shape_str(tokens.shape) + " does not match image geometry");
    }
    const auto index = pixel_to_token_index(channels, image_size, patch_size);
    ad::Tensor pixels({static_cast<std::size_t>(channels), static_cast<std::size_t>(image_size),
                       static_cast<std::size_t>(image_size)});
    for (std::size_t i = 0; i < index.size(); ++i) pixels[i] = tokens[index[i]];
    return pixels;
}

MaskedAutoencoder::MaskedAutoencoder(const MaeConfig& config, ad::ParameterStore& store, std::mt19937_64& rng,
                                     const std::string& prefix)
    : config_(config) {
    config_.validate();
    using ad::ParamGroup;
    const auto g = static_cast<std::size_t>(config_.num_patches());
    const auto d_tok = static_cast<std::size_t>(config_.token_dim());
    const auto e = static_cast<std::size_t>(config_.enc_dim);
    const auto d = static_cast<std::size_t>(config_.dec_dim);
    const auto r = static_cast<std::size_t>(config_.mlp_ratio);

    patch_embed_ = nn::LinearLayer::create(store, prefix + ".patch_embed", d_tok, e, ParamGroup::visual_other, rng);
    auto position_table = [&](std::size_t dim) {
        return config_.sincos_positions ? sincos_2d(config_.grid(), dim) : ad::trunc_normal({g, dim}, 0.02, rng);
    };
    enc_pos_ = &store.add(prefix + ".enc_pos", position_table(e), ParamGroup::visual_other);
    for (int i = 0; i < config_.enc_depth; ++i) {
        enc_blocks_.emplace_back(store, prefix + ".enc" + std::to_string(i), e,
                                 static_cast<std::size_t>(config_.enc_heads), r * e, ParamGroup::visual_norm,
                                 ParamGroup::visual_other, rng);
    }
    enc_norm_ = nn::LayerNormLayer::create(store, prefix + ".enc_norm", e, ParamGroup::visual_norm);
    dec_embed_ = nn::LinearLayer::create(store, prefix + ".dec_embed", e, d, ParamGroup::visual_other, rng);
    mask_token_ = &store.add(prefix + ".mask_token", ad::trunc_normal({1, d}, 0.02, rng), ParamGroup::visual_other);
    dec_pos_ = &store.add(prefix + ".dec_pos", position_table(d), ParamGroup::visual_other);
    for (int i = 0; i < config_.dec_depth; ++i) {
        dec_blocks_.emplace_back(store, prefix + ".dec" + std::to_string(i), d,
                                 static_cast<std::size_t>(config_.dec_heads), r * d, ParamGroup::visual_norm,
                                 ParamGroup::visual_other, rng);
    }
    dec_norm_ = nn::LayerNormLayer::create(store, prefix + ".dec_norm", d, ParamGroup::visual_norm);
    dec_pred_ = nn::LinearLayer::create(store, prefix + ".dec_pred", d, d_tok, ParamGroup::visual_other, rng);

    unpatch_index_ = std::make_shared<const std::vector<std::size_t>>(
        pixel_to_token_index(config_.channels, config_.image_size, config_.patch_size));
}

ad::Var MaskedAutoencoder::predict_masked_tokens(const ad::Tensor& tokens, const PatchMask& mask) const {
    const auto g = static_cast<std::size_t>(config_.num_patches());
    if (mask.size() != g) throw ShapeMismatch("mask has " + std::to_string(mask.size()) + " patches, model expects " +
                                              std::to_string(g));
    const auto visible = mask.visible_indices();
    const auto masked = mask.masked_indices();
    if (visible.empty()) throw AllMasked("every patch is masked; nothing to encode");

    const auto d_tok = tokens.shape[1];
    ad::Tensor vis_tokens({visible.size(), d_tok});
    for (std::size_t i = 0; i < visible.size(); ++i) {
        std::copy_n(tokens.data.begin() + static_cast<std::ptrdiff_t>(visible[i] * d_tok), d_tok,
                    vis_tokens.data.begin() + static_cast<std::ptrdiff_t>(i * d_tok));
    }

    ad::Var x = patch_embed_(ad::constant(std::move(vis_tokens)));
    x = ad::add(x, ad::gather_rows(ad::param(*enc_pos_), visible));
    for (const auto& block : enc_blocks_) x = block.forward(x);
    x = enc_norm_(x);

    ad::Var full = ad::overwrite_rows(ad::repeat_rows(ad::param(*mask_token_), g), dec_embed_(x), visible);
    full = ad::add(full, ad::param(*dec_pos_));
    for (const auto& block : dec_blocks_) full = block.forward(full);
    full = dec_norm_(full);
    return dec_pred_(ad::gather_rows(full, masked));
}

ad::Var MaskedAutoencoder::reconstruct(const ad::Tensor& pixels, const PatchMask& mask) const {
    check_image(pixels, config_.patch_size);
    if (pixels.shape[0] != static_cast<std::size_t>(config_.channels) ||
        pixels.shape[1] != static_cast<std::size_t>(config_.image_size)) {
        throw ShapeMismatch("image " + ad::shape_str(pixels.shape) + " does not match MAE configuration");
    }
    if (mask.size() != static_cast<std::size_t>(config_.num_patches())) {
        throw ShapeMismatch("mask grid does not match MAE configuration");
    }
    if (mask.visible_count() == 0) throw AllMasked("every patch is masked; nothing to encode");
    if (mask.masked_count() == 0) return ad::constant(pixels);

    ad::Tensor tokens = patchify(pixels, config_.patch_size);
    const ad::Var predicted = predict_masked_tokens(tokens, mask);
    const ad::Var merged = ad::overwrite_rows(ad::constant(std::move(tokens)), predicted, mask.masked_indices());
    return ad::gather(merged, unpatch_index_, pixels.shape);
}

namespace {

ad::Var crop_channel0(const ad::Var& pixels, const codec::ImagingGeometry& g, int col_begin, int col_end) {
    const auto s = static_cast<std::size_t>(g.image_size);
    if (pixels.shape() != ad::Shape{static_cast<std::size_t>(g.channels), s, s}) {
        throw ShapeMismatch("pixels " + ad::shape_str(pixels.shape()) + " do not match geometry");
    }
    const auto w = static_cast<std::size_t>(col_end - col_begin);
    auto index = std::make_shared<std::vector<std::size_t>>(s * w);
    for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < w; ++x) (*index)[y * w + x] = y * s + static_cast<std::size_t>(col_begin) + x;
    }
    return ad::gather(pixels, std::move(index), {s, w});
}

/// resize to {rows_out, cols_out} followed by column-major unstacking.
ad::Var resize_and_unstack(const ad::Var& crop, std::size_t rows_out, std::size_t cols_out) {
    const auto rows_in = crop.shape()[0], cols_in = crop.shape()[1];
    const ad::Var rh = ad::constant(ad::Tensor({rows_out, rows_in}, codec::resize_matrix(rows_in, rows_out)));
    ad::Tensor rw_t({cols_in, cols_out});
    const auto rw = codec::resize_matrix(cols_in, cols_out);
    for (std::size_t i = 0; i < cols_out; ++i) {
        for (std::size_t j = 0; j < cols_in; ++j) rw_t[j * cols_out + i] = rw[i * cols_in + j];
    }
    const ad::Var grid = ad::matmul(ad::matmul(rh, crop), ad::constant(std::move(rw_t)));
    return ad::reshape(ad::transpose(grid), {1, rows_out * cols_out});
}

ad::Var denormalize_var(const ad::Var& z, const codec::NormStats& stats) {
    return ad::add_scalar(ad::scale(z, stats.scale()), stats.mean);
}

} // namespace

ad::Var decode_forecast_var(const ad::Var& pixels, const codec::ImagingGeometry& geometry,
                            const codec::NormStats& stats, int horizon) {
    if (geometry.n_forecast < 1) throw GeometryMismatch("image has no forecast region");
    if (horizon < 1 || horizon > geometry.n_forecast * geometry.period) {
        throw GeometryMismatch("horizon " + std::to_string(horizon) + " exceeds n_f*P = " +
                               std::to_string(geometry.n_forecast * geometry.period));
    }
    const auto crop = crop_channel0(pixels, geometry, geometry.boundary_col, geometry.image_size);
    ad::Var seq = resize_and_unstack(crop, static_cast<std::size_t>(geometry.period),
                                     static_cast<std::size_t>(geometry.n_forecast));
    if (static_cast<std::size_t>(horizon) < seq.numel()) seq = ad::slice_cols(seq, 0, static_cast<std::size_t>(horizon));
    return denormalize_var(seq, stats);
}

ad::Var decode_backcast_var(const ad::Var& pixels, const codec::ImagingGeometry& geometry,
                            const codec::NormStats& stats) {
    const auto crop = crop_channel0(pixels, geometry, 0, geometry.boundary_col);
    const ad::Var seq = resize_and_unstack(crop, static_cast<std::size_t>(geometry.period),
                                           static_cast<std::size_t>(geometry.n_lookback));
    return denormalize_var(seq, stats);
}

ad::Var vf_forecast(std::span<const double> lookback, const codec::ImagingGeometry& geometry, int horizon,
                    const ImageReconstructor& model) {
    if (geometry.n_forecast < 1) throw GeometryMismatch("vf_forecast needs a forecast layout");
    const auto image = codec::encode_window(lookback, geometry);
    const auto s = static_cast<std::size_t>(geometry.image_size);
    const ad::Tensor pixels({static_cast<std::size_t>(geometry.channels), s, s}, image.pixels);
    const ad::Var out = model.reconstruct(pixels, forecast_mask(geometry));
    return decode_forecast_var(out, geometry, image.stats, horizon);
}

ad::Var backcast_two_pass(const codec::ImagedWindow& image, const PatchMask& first, const ImageReconstructor& model) {
    const auto& g = image.geometry;
    const auto s = static_cast<std::size_t>(g.image_size);
    const ad::Tensor pixels({static_cast<std::size_t>(g.channels), s, s}, image.pixels);
    const ad::Var first_pass = model.reconstruct(pixels, first);
    const ad::Var second_pass = model.reconstruct(pixels, first.complement());
    return ad::select(second_pass, first_pass, pixel_mask(first, g.channels, g.image_size, g.patch_size));
}

ad::Var vf_backcast(std::span<const double> lookback, const codec::ImagingGeometry& geometry,
                    const ImageReconstructor& model) {
    if (!geometry.is_backcast()) throw GeometryMismatch("vf_backcast needs the backcast layout (b_col = S)");
    const auto image = codec::encode_window(lookback, geometry);
    const ad::Var merged = backcast_two_pass(image, bc_masks(geometry).first, model);
    return decode_backcast_var(merged, geometry, image.stats);
}

} // namespace dmmv::vision
