#pragma once

#include "advcap/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace advcap {

enum class ParamGroup : std::uint8_t { encoder = 0, decoder = 1 };

std::string_view to_string(ParamGroup group);
// Throws ConfigError for anything other than "encoder" / "decoder".
ParamGroup parse_group(std::string_view name);

struct NamedTensor {
  std::string name;
  ParamGroup group = ParamGroup::encoder;
  Matrix value;
};

// Ordered, name-addressable collection of every model tensor.
class ParameterSet {
 public:
  std::size_t add(std::string name, ParamGroup group, Matrix value);

  std::size_t size() const { return tensors_.size(); }
  NamedTensor& operator[](std::size_t i) { return tensors_[i]; }
  const NamedTensor& operator[](std::size_t i) const { return tensors_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  std::size_t scalar_count() const;
  std::size_t scalar_count(ParamGroup group) const;

  // Bitwise comparison of names, groups and values.
  bool operator==(const ParameterSet& other) const;

  // FNV-1a over names and raw value bytes; stable across runs.
  std::uint64_t checksum() const;

 private:
  std::vector<NamedTensor> tensors_;
};

// Gradient buffers aligned index-for-index with a ParameterSet.
struct GradientSet {
  std::vector<Matrix> grads;

  static GradientSet zeros_like(const ParameterSet& params);
  Matrix& operator[](std::size_t i) { return grads[i]; }
  const Matrix& operator[](std::size_t i) const { return grads[i]; }
  std::size_t size() const { return grads.size(); }
};

}  // namespace advcap
