#include "dmmv/transformer.hpp"

#include "dmmv/errors.hpp"

#include <cmath>
#include <vector>

namespace dmmv::nn {

LinearLayer LinearLayer::create(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                                ad::ParamGroup group, std::mt19937_64& rng) {
    LinearLayer l;
    l.weight = &store.add(name + ".weight", ad::trunc_normal({out, in}, 0.02, rng), group);
    l.bias = &store.add(name + ".bias", ad::Tensor({out}, 0.0), group);
    return l;
}

ad::Var LinearLayer::operator()(const ad::Var& x) const {
    return ad::linear(x, ad::param(*weight), ad::param(*bias));
}

LayerNormLayer LayerNormLayer::create(ad::ParameterStore& store, const std::string& name, std::size_t dim,
                                      ad::ParamGroup group) {
    LayerNormLayer l;
    l.gamma = &store.add(name + ".gamma", ad::Tensor({dim}, 1.0), group, false);
    l.beta = &store.add(name + ".beta", ad::Tensor({dim}, 0.0), group, false);
    return l;
}

ad::Var LayerNormLayer::operator()(const ad::Var& x) const {
    return ad::layer_norm(x, ad::param(*gamma), ad::param(*beta), 1e-6);
}

TransformerBlock::TransformerBlock(ad::ParameterStore& store, const std::string& prefix, std::size_t dim,
                                   std::size_t heads, std::size_t mlp_hidden, ad::ParamGroup norm_group,
                                   ad::ParamGroup other_group, std::mt19937_64& rng)
    : dim_(dim), heads_(heads) {
    if (heads == 0 || dim % heads != 0) throw ConfigError(prefix + ": dim must be divisible by heads");
    norm1_ = LayerNormLayer::create(store, prefix + ".norm1", dim, norm_group);
    qkv_ = LinearLayer::create(store, prefix + ".attn.qkv", dim, 3 * dim, other_group, rng);
    proj_ = LinearLayer::create(store, prefix + ".attn.proj", dim, dim, other_group, rng);
    norm2_ = LayerNormLayer::create(store, prefix + ".norm2", dim, norm_group);
    fc1_ = LinearLayer::create(store, prefix + ".mlp.fc1", dim, mlp_hidden, other_group, rng);
    fc2_ = LinearLayer::create(store, prefix + ".mlp.fc2", mlp_hidden, dim, other_group, rng);
}

ad::Var TransformerBlock::forward(const ad::Var& x) const {
    const std::size_t head_dim = dim_ / heads_;
    const double logit_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

    const ad::Var qkv = qkv_(norm1_(x));
    std::vector<ad::Var> outs;
    outs.reserve(heads_);
    for (std::size_t h = 0; h < heads_; ++h) {
        const auto q = ad::slice_cols(qkv, h * head_dim, (h + 1) * head_dim);
        const auto k = ad::slice_cols(qkv, dim_ + h * head_dim, dim_ + (h + 1) * head_dim);
        const auto v = ad::slice_cols(qkv, 2 * dim_ + h * head_dim, 2 * dim_ + (h + 1) * head_dim);
        const auto attn = ad::softmax(ad::scale(ad::matmul(q, ad::transpose(k)), logit_scale));
        outs.push_back(ad::matmul(attn, v));
    }
    const auto attended = heads_ == 1 ? outs.front() : ad::concat_cols(outs);
    const auto h1 = ad::add(x, proj_(attended));
    return ad::add(h1, fc2_(ad::gelu(fc1_(norm2_(h1)))));
}

} // namespace dmmv::nn
