#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "mail/numeric/tensor.hpp"

namespace mail::numeric {

struct Parameter {
  Tensor value;
  Tensor grad;
  bool frozen = false;
};

// Named trainable tensors with matching gradient buffers. Iteration order is
// the lexicographic name order, which keeps optimizer updates and checkpoint
// files deterministic.
class ParameterStore {
 public:
  static constexpr int kFormatVersion = 1;

  Parameter& add(const std::string& name, Tensor init, bool frozen = false);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor& value(const std::string& name) const { return at(name).value; }
  Tensor& mutable_value(const std::string& name) { return at(name).value; }
  const Tensor& grad(const std::string& name) const { return at(name).grad; }
  bool frozen(const std::string& name) const { return at(name).frozen; }
  void set_frozen(const std::string& name, bool frozen) { at(name).frozen = frozen; }

  // Frozen parameters silently ignore gradient contributions.
  void accumulate_grad(const std::string& name, const Tensor& grad);
  void zero_grad();

  const std::map<std::string, Parameter>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count(bool include_frozen = true) const;

  nlohmann::json to_json() const;
  static ParameterStore from_json(const nlohmann::json& doc);

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::map<std::string, Parameter> entries_;
};

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace mail::numeric
