#include "mail/numeric/embedding_table.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mail/error.hpp"
#include "mail/numeric/random.hpp"

namespace mail::numeric {

void EmbeddingTable::set(const std::string& identifier, Tensor vector) {
  Tensor fitted(Shape{dim_});
  const std::size_t n = std::min(dim_, vector.numel());
  for (std::size_t i = 0; i < n; ++i) fitted[i] = vector[i];
  loaded_[identifier] = std::move(fitted);
}

Tensor EmbeddingTable::lookup(const std::string& identifier) const {
  auto it = loaded_.find(identifier);
  if (it != loaded_.end()) return it->second;
  return hashed_vector(identifier, seed_, dim_);
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, std::size_t dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read embeddings " + path.string());
  EmbeddingTable table(dim, seed);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string identifier;
    std::string rest;
    if (auto tab = line.find('\t'); tab != std::string::npos) {
      identifier = line.substr(0, tab);
      rest = line.substr(tab + 1);
    } else {
      std::istringstream head(line);
      head >> identifier;
      std::getline(head, rest);
    }
    std::vector<double> values;
    std::istringstream fields(rest);
    std::string token;
    while (fields >> token) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": bad value '" + token + "'");
      }
      values.push_back(v);
    }
    if (identifier.empty() || values.empty()) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": expected identifier and values");
    }
    table.set(identifier, Tensor::vector(std::move(values)));
  }
  return table;
}

}  // namespace mail::numeric
