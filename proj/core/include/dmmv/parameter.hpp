#pragma once

#include "dmmv/tensor.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace dmmv::ad {

/// Drives the staged freeze policy of training.
enum class ParamGroup { numerical, visual_norm, visual_other, gate };

std::string_view to_string(ParamGroup group);
ParamGroup parse_param_group(std::string_view name);

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    ParamGroup group = ParamGroup::numerical;
    bool trainable = true;
    /// Decoupled weight decay applies; off for norm scales/shifts and the gate.
    bool decay = true;

    void zero_grad() { grad.fill(0.0); }
};

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor value, ParamGroup group, bool decay = true);

    Parameter* find(std::string_view name);
    const Parameter* find(std::string_view name) const;
    Parameter& get(std::string_view name);

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();
    void set_trainable(ParamGroup group, bool trainable);
    void set_all_trainable(bool trainable);

    /// Flat copy of every value, used for best-epoch snapshots.
    std::vector<Tensor> snapshot() const;
    void restore(const std::vector<Tensor>& values);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

/// Truncated normal at +-2 std, the initializer used for every weight matrix.
Tensor trunc_normal(Shape shape, double std, std::mt19937_64& rng);

} // namespace dmmv::ad
