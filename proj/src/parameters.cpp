#include "advcap/parameters.hpp"

#include "advcap/errors.hpp"

#include <cstring>

namespace advcap {

std::string_view to_string(ParamGroup group) {
  return group == ParamGroup::encoder ? "encoder" : "decoder";
}

ParamGroup parse_group(std::string_view name) {
  if (name == "encoder") return ParamGroup::encoder;
  if (name == "decoder") return ParamGroup::decoder;
  throw ConfigError("unknown parameter group '" + std::string(name) + "'");
}

std::size_t ParameterSet::add(std::string name, ParamGroup group, Matrix value) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  tensors_.push_back({std::move(name), group, std::move(value)});
  return tensors_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

std::size_t ParameterSet::scalar_count(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& t : tensors_) {
    if (t.group == group) n += static_cast<std::size_t>(t.value.size());
  }
  return n;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.group != b.group || a.value.rows() != b.value.rows() ||
        a.value.cols() != b.value.cols()) {
      return false;
    }
    if (std::memcmp(a.value.data(), b.value.data(), sizeof(double) * a.value.size()) != 0) {
      return false;
    }
  }
  return true;
}

std::uint64_t ParameterSet::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : tensors_) {
    mix(t.name.data(), t.name.size());
    mix(t.value.data(), sizeof(double) * static_cast<std::size_t>(t.value.size()));
  }
  return h;
}

GradientSet GradientSet::zeros_like(const ParameterSet& params) {
  GradientSet g;
  g.grads.reserve(params.size());
  for (const auto& t : params) g.grads.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  return g;
}

}  // namespace advcap
