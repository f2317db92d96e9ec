#pragma once

#include "dmmv/autodiff.hpp"

#include <random>
#include <string>

namespace dmmv::nn {

/// y = x W^T + b with W stored [out][in].
struct LinearLayer {
    ad::Parameter* weight = nullptr;
    ad::Parameter* bias = nullptr;

    static LinearLayer create(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                              ad::ParamGroup group, std::mt19937_64& rng);
    ad::Var operator()(const ad::Var& x) const;
};

struct LayerNormLayer {
    ad::Parameter* gamma = nullptr;
    ad::Parameter* beta = nullptr;

    static LayerNormLayer create(ad::ParameterStore& store, const std::string& name, std::size_t dim,
                                 ad::ParamGroup group);
    ad::Var operator()(const ad::Var& x) const;
};

/// Pre-norm block: x + MHSA(LN(x)), then x + MLP(LN(x)) with GELU.
class TransformerBlock {
public:
    TransformerBlock(ad::ParameterStore& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                     std::size_t mlp_hidden, ad::ParamGroup norm_group, ad::ParamGroup other_group,
                     std::mt19937_64& rng);

    ad::Var forward(const ad::Var& x) const;

private:
    std::size_t dim_;
    std::size_t heads_;
    LayerNormLayer norm1_;
    LinearLayer qkv_;
    LinearLayer proj_;
    LayerNormLayer norm2_;
    LinearLayer fc1_;
    LinearLayer fc2_;
};

} // namespace dmmv::nn
