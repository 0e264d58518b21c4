#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>

#include "mail/numeric/tensor.hpp"

namespace mail::numeric {

// Fixed input vectors keyed by identifier. Vectors loaded from a file win;
// anything else falls back to a deterministic hashed vector, so unseen
// identifiers still get a stable embedding.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  // One identifier per line followed by reals. When the line contains a tab
  // the identifier is everything before the first tab (so it may contain
  // spaces); otherwise it is the first whitespace-separated token. Vectors
  // are truncated or zero-padded to dim. Throws Error(kParseError).
  static EmbeddingTable load(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t loaded_count() const noexcept { return loaded_.size(); }
  bool has_loaded(const std::string& identifier) const { return loaded_.count(identifier) != 0; }

  void set(const std::string& identifier, Tensor vector);
  Tensor lookup(const std::string& identifier) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::unordered_map<std::string, Tensor> loaded_;
};

}  // namespace mail::numeric
