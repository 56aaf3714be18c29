#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace brp {

using KeyValues = std::map<std::string, std::string>;

/// Versioned archive of named tensors plus string metadata.
///
/// Layout (little-endian):
///   "BRPC" | u32 version | u32 n_meta | n_meta x (str key, str value)
///   | u32 n_tensors | n_tensors x (str name, u8 dtype, u32 ndim, ndim x i64 dim, raw data)
/// where str = u32 length + bytes and dtype is 0 = f32, 1 = f64, 2 = i64.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  KeyValues meta;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const std::string& require(const std::string& key) const;
};

/// Every parameter and buffer of `module`, by qualified name.
Checkpoint capture_module(const torch::nn::Module& module);

/// Copies tensors back by name; names and shapes must match exactly.
void restore_module(torch::nn::Module& module, const Checkpoint& ckpt);

}  // namespace brp
