#include "mail/numeric/parameter_store.hpp"

#include <fstream>

#include "mail/error.hpp"

namespace mail::numeric {

Parameter& ParameterStore::add(const std::string& name, Tensor init, bool frozen) {
  if (contains(name)) throw Error(ErrorCode::kInvalidConfig, "duplicate parameter '" + name + "'");
  Tensor grad(init.shape());
  auto [it, inserted] = entries_.emplace(name, Parameter{std::move(init), std::move(grad), frozen});
  return it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::kMissingEmbedding, "unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorCode::kMissingEmbedding, "unknown parameter '" + name + "'");
  return it->second;
}

void ParameterStore::accumulate_grad(const std::string& name, const Tensor& grad) {
  Parameter& p = at(name);
  if (p.frozen) return;
  require_same_shape(p.grad, grad, "accumulate_grad");
  auto dst = p.grad.data();
  auto src = grad.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void ParameterStore::zero_grad() {
  for (auto& [name, p] : entries_) p.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count(bool include_frozen) const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) {
    if (include_frozen || !p.frozen) n += p.value.numel();
  }
  return n;
}

nlohmann::json ParameterStore::to_json() const {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, p] : entries_) {
    params.push_back({{"name", name},
                      {"shape", p.value.shape()},
                      {"frozen", p.frozen},
                      {"data", std::vector<double>(p.value.data().begin(), p.value.data().end())}});
  }
  return {{"format", "mail-parameters"}, {"version", kFormatVersion}, {"parameters", std::move(params)}};
}

ParameterStore ParameterStore::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "mail-parameters") {
      throw Error(ErrorCode::kParseError, "not a parameter checkpoint");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw Error(ErrorCode::kParseError, "unsupported checkpoint version " + doc.at("version").dump());
    }
    ParameterStore store;
    for (const auto& entry : doc.at("parameters")) {
      store.add(entry.at("name").get<std::string>(),
                Tensor(entry.at("shape").get<Shape>(), entry.at("data").get<std::vector<double>>()),
                entry.at("frozen").get<bool>());
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed checkpoint: ") + e.what());
  }
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.frozen != ib->second.frozen ||
        !(ia->second.value == ib->second.value)) {
      return false;
    }
  }
  return true;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace mail::numeric
