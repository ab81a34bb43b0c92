#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lut/nn.hpp"
#include "lut/tensor.hpp"

namespace lut {

// Named-tensor container. Layout (all integers little-endian):
//   magic "LUTCKPT1"          8 bytes
//   u32 version (1)
//   u32 metadata entry count, then per entry: u32 len + key bytes,
//       u32 len + value bytes
//   u32 tensor count, then per tensor: u32 len + name bytes, u32 ndim,
//       ndim x u64 dims, prod(dims) x f64 values
// Used for model checkpoints, teacher checkpoints and attention exports.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<nn::NamedParameter> tensors;

  const Tensor* find(std::string_view name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Deep copy of the parameter values.
Checkpoint snapshot(const nn::ParameterList& params,
                    std::map<std::string, std::string> metadata = {});
// Copies values into `params`; every parameter must be present with the same
// shape.
void restore(nn::ParameterList& params, const Checkpoint& checkpoint);

// Elementwise mean of the tensors of several checkpoints. Metadata is
// taken from the last one.
Checkpoint average_checkpoints(const std::vector<Checkpoint>& checkpoints);
Checkpoint average_checkpoints(const std::vector<std::filesystem::path>& paths);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);
// Hash over names, shapes and raw value bytes.
std::uint64_t checkpoint_hash(const Checkpoint& checkpoint);

}  // namespace lut
