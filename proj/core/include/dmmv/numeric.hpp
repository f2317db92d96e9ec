#pragma once

// Trend forecasters: a single linear map and a small patch transformer.
// Both take a row vector {1, input_len} and return {1, horizon}.

#include "dmmv/autodiff.hpp"
#include "dmmv/transformer.hpp"

#include <random>
#include <string>
#include <vector>

namespace dmmv::numeric {

class NumericalForecaster {
public:
    virtual ~NumericalForecaster() = default;
    virtual ad::Var forecast(const ad::Var& x) const = 0;
    virtual std::size_t input_len() const = 0;
    virtual std::size_t horizon() const = 0;
};

/// y = W x + b, W [H][T'].
class LinearForecaster final : public NumericalForecaster {
public:
    LinearForecaster(ad::ParameterStore& store, std::size_t input_len, std::size_t horizon, std::mt19937_64& rng,
                     const std::string& prefix = "num.linear");

    ad::Var forecast(const ad::Var& x) const override;
    std::size_t input_len() const override { return input_len_; }
    std::size_t horizon() const override { return horizon_; }

    ad::Parameter& weight() const { return *layer_.weight; }
    ad::Parameter& bias() const { return *layer_.bias; }

private:
    std::size_t input_len_;
    std::size_t horizon_;
    nn::LinearLayer layer_;
};

struct PatchTransformerConfig {
    int patch_len = 16;
    int dim = 64;
    int depth = 2;
    int heads = 4;
    int mlp_ratio = 4;
};

/// Patches of length L with stride L; the tail is padded with the last value
/// so that there are floor(T/L)+1 patches.
class PatchTransformerForecaster final : public NumericalForecaster {
public:
    PatchTransformerForecaster(ad::ParameterStore& store, std::size_t input_len, std::size_t horizon,
                               const PatchTransformerConfig& config, std::mt19937_64& rng,
                               const std::string& prefix = "num.pt");

    ad::Var forecast(const ad::Var& x) const override;
    std::size_t input_len() const override { return input_len_; }
    std::size_t horizon() const override { return horizon_; }
    std::size_t num_patches() const { return num_patches_; }

    static std::size_t patch_count(std::size_t input_len, std::size_t patch_len) { return input_len / patch_len + 1; }

    ad::Parameter& head_bias() const { return *head_.bias; }
    ad::Parameter& head_weight() const { return *head_.weight; }

private:
    std::size_t input_len_;
    std::size_t horizon_;
    PatchTransformerConfig config_;
    std::size_t num_patches_;
    std::shared_ptr<const std::vector<std::size_t>> patch_index_;
    nn::LinearLayer project_;
    ad::Parameter* position_ = nullptr;
    std::vector<nn::TransformerBlock> blocks_;
    nn::LinearLayer head_;
};

} // namespace dmmv::numeric
