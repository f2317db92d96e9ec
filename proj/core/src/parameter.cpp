#include "dmmv/parameter.hpp"

#include "dmmv/errors.hpp"

#include <string>

namespace dmmv::ad {

std::string_view to_string(ParamGroup group) {
    switch (group) {
    case ParamGroup::numerical: return "numerical";
    case ParamGroup::visual_norm: return "visual_norm";
    case ParamGroup::visual_other: return "visual_other";
    case ParamGroup::gate: return "gate";
    }
    return "unknown";
}

ParamGroup parse_param_group(std::string_view name) {
    if (name == "numerical") return ParamGroup::numerical;
    if (name == "visual_norm") return ParamGroup::visual_norm;
    if (name == "visual_other") return ParamGroup::visual_other;
    if (name == "gate") return ParamGroup::gate;
    throw ParseError("unknown parameter group '" + std::string(name) + "'");
}

Parameter& ParameterStore::add(std::string name, Tensor value, ParamGroup group, bool decay) {
    if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    auto p = std::make_unique<Parameter>();
    p->name = std::move(name);
    p->grad = Tensor(value.shape, 0.0);
    p->value = std::move(value);
    p->group = group;
    p->decay = decay;
    params_.push_back(std::move(p));
    return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
    for (auto& p : params_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

const Parameter* ParameterStore::find(std::string_view name) const {
    for (const auto& p : params_) {
        if (p->name == name) return p.get();
    }
    return nullptr;
}

Parameter& ParameterStore::get(std::string_view name) {
    auto* p = find(name);
    if (!p) throw ConfigError("no parameter named '" + std::string(name) + "'");
    return *p;
}

std::vector<Parameter*> ParameterStore::all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
    std::vector<const Parameter*> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.get());
    return out;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

void ParameterStore::set_trainable(ParamGroup group, bool trainable) {
    for (auto& p : params_) {
        if (p->group == group) p->trainable = trainable;
    }
}

void ParameterStore::set_all_trainable(bool trainable) {
    for (auto& p : params_) p->trainable = trainable;
}

std::vector<Tensor> ParameterStore::snapshot() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
}

void ParameterStore::restore(const std::vector<Tensor>& values) {
    if (values.size() != params_.size()) throw ShapeMismatch("snapshot does not match parameter count");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i].shape != params_[i]->value.shape) {
            throw ShapeMismatch("snapshot shape mismatch for '" + params_[i]->name + "'");
        }
        params_[i]->value = values[i];
    }
}

Tensor trunc_normal(Shape shape, double std, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : t.data) {
        double z = dist(rng);
        while (z < -2.0 || z > 2.0) z = dist(rng);
        v = z * std;
    }
    return t;
}

} // namespace dmmv::ad
