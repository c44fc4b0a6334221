#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gnninject/tensor/tensor.hpp"

namespace gnninject::ad {

// Binary layout, all integers and reals little-endian:
//   "GNNICKPT"  u32 version
//   u32 n_meta   { u32 len, key bytes, u32 len, value bytes } * n_meta
//   u32 n_tensor { u32 len, name bytes, u64 rows, u64 cols, f64 * rows*cols } * n_tensor
// Metadata keys are unique and written in sorted order; tensors keep insertion order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(std::string name, const Tensor& t) { tensors.emplace_back(std::move(name), t); }
  /// Throws ValidationError when absent.
  const Tensor& get(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  void save(const std::filesystem::path& path) const;
  /// Throws ParseError for a truncated or foreign file.
  static Checkpoint load(const std::filesystem::path& path);
};

/// Copies values from `src` into `dst`; shapes must match.
void assign_values(Tensor& dst, const Tensor& src);

}  // namespace gnninject::ad
