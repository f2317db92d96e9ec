#include "dmmv/numeric.hpp"

#include "dmmv/errors.hpp"

#include <algorithm>

namespace dmmv::numeric {

namespace {

void check_input(const ad::Var& x, std::size_t expected) {
    if (x.shape() != ad::Shape{1, expected}) {
        throw ShapeMismatch("forecaster expects {1," + std::to_string(expected) + "}, got " + ad::shape_str(x.shape()));
    }
}

} // namespace

LinearForecaster::LinearForecaster(ad::ParameterStore& store, std::size_t input_len, std::size_t horizon,
                                   std::mt19937_64& rng, const std::string& prefix)
    : input_len_(input_len), horizon_(horizon) {
    if (input_len == 0 || horizon == 0) throw ConfigError("linear forecaster needs positive input and horizon");
    layer_ = nn::LinearLayer::create(store, prefix, input_len, horizon, ad::ParamGroup::numerical, rng);
}

ad::Var LinearForecaster::forecast(const ad::Var& x) const {
    check_input(x, input_len_);
    return layer_(x);
}

PatchTransformerForecaster::PatchTransformerForecaster(ad::ParameterStore& store, std::size_t input_len,
                                                       std::size_t horizon, const PatchTransformerConfig& config,
                                                       std::mt19937_64& rng, const std::string& prefix)
    : input_len_(input_len), horizon_(horizon), config_(config) {
    if (config.patch_len < 1 || input_len < static_cast<std::size_t>(config.patch_len)) {
        throw ConfigError("patch transformer needs 1 <= patch_len <= input length");
    }
    if (config.dim < 1 || config.heads < 1 || config.dim % config.heads != 0 || config.depth < 0) {
        throw ConfigError("patch transformer dim must be divisible by heads");
    }
    const auto len = static_cast<std::size_t>(config.patch_len);
    const auto dim = static_cast<std::size_t>(config.dim);
    num_patches_ = patch_count(input_len, len);

    auto index = std::make_shared<std::vector<std::size_t>>(num_patches_ * len);
    for (std::size_t i = 0; i < index->size(); ++i) (*index)[i] = std::min(i, input_len - 1);
    patch_index_ = std::move(index);

    const auto group = ad::ParamGroup::numerical;
    project_ = nn::LinearLayer::create(store, prefix + ".project", len, dim, group, rng);
    position_ = &store.add(prefix + ".position", ad::trunc_normal({dim, num_patches_}, 0.02, rng), group);
    for (int i = 0; i < config.depth; ++i) {
        blocks_.emplace_back(store, prefix + ".block" + std::to_string(i), dim, static_cast<std::size_t>(config.heads),
                             dim * static_cast<std::size_t>(config.mlp_ratio), group, group, rng);
    }
    head_ = nn::LinearLayer::create(store, prefix + ".head", dim * num_patches_, horizon, group, rng);
}

ad::Var PatchTransformerForecaster::forecast(const ad::Var& x) const {
    check_input(x, input_len_);
    const auto len = static_cast<std::size_t>(config_.patch_len);
    const auto dim = static_cast<std::size_t>(config_.dim);
    const ad::Var patches = ad::gather(x, patch_index_, {num_patches_, len});
    ad::Var tokens = ad::add(project_(patches), ad::transpose(ad::param(*position_)));
    for (const auto& block : blocks_) tokens = block.forward(tokens);
    return head_(ad::reshape(tokens, {1, num_patches_ * dim}));
}

} // namespace dmmv::numeric
