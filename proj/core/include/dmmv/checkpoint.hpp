#pragma once

// Text checkpoint container. Layout (one item per line):
//
//   dmmv-checkpoint 1
//   meta <n>
//   <key>=<value>                      (n lines, the model assembly)
//   params <m>
//   param <name> <group> <rank> <d0> ... <dk>
//   <values as C99 hex floats separated by spaces>
//   ...                                (m param/value line pairs)
//   end
//
// Hex floats make the round trip bit-exact.

#include "dmmv/parameter.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace dmmv::ad {

struct StoredParameter {
    std::string name;
    ParamGroup group = ParamGroup::numerical;
    Tensor value;
};

struct CheckpointData {
    std::map<std::string, std::string> metadata;
    std::vector<StoredParameter> params;
};

void write_checkpoint(std::ostream& out, const ParameterStore& store,
                      const std::map<std::string, std::string>& metadata);
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const std::map<std::string, std::string>& metadata);

CheckpointData read_checkpoint(std::istream& in);
CheckpointData load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `store`. Names, groups and shapes must match
/// one-to-one, otherwise ConfigMismatch.
void apply_checkpoint(const CheckpointData& data, ParameterStore& store);

} // namespace dmmv::ad
