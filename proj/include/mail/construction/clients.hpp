#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mail/graph/coupled_graph.hpp"

namespace mail::construction {

struct EndpointConfig {
  std::string base_url;  // e.g. http://localhost:8080
  std::string path;      // request path on that host
  std::string token_env;  // environment variable holding a bearer token; empty for none
  double timeout_seconds = 30.0;
  std::size_t retries = 2;  // extra attempts after the first
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Throws Error(kServiceUnavailable).
  virtual std::string complete(const std::string& prompt) = 0;
};

class KgClient {
 public:
  virtual ~KgClient() = default;
  // Triples within `hops` of entity. Throws Error(kServiceUnavailable).
  virtual std::vector<graph::Triple> neighbours(const std::string& entity, std::size_t hops) = 0;
};

// POST <path>, text/plain body, plain-text completion back.
class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(EndpointConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  EndpointConfig config_;
};

// GET <path>?entity=<e>&hops=<k>, JSON {"triples": [[h, r, t], ...]} back.
class HttpKgClient : public KgClient {
 public:
  explicit HttpKgClient(EndpointConfig config);
  std::vector<graph::Triple> neighbours(const std::string& entity, std::size_t hops) override;

 private:
  EndpointConfig config_;
};

std::string kg_request_key(const std::string& entity, std::size_t hops);
std::string triples_to_json(const std::vector<graph::Triple>& triples);
// Throws Error(kParseError).
std::vector<graph::Triple> triples_from_json(const std::string& text);

// Request/response store, one file per request hash. Writes go through a
// temporary file and a rename, so readers never see partial entries.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& kind, const std::string& request) const;
  void put(const std::string& kind, const std::string& request, const std::string& response);
  std::filesystem::path entry_path(const std::string& kind, const std::string& request) const;
  std::size_t size() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

// Cache in front of a live client. With no live client the cache is
// replay-only and a miss throws Error(kCacheMiss).
class CachedLlmClient : public LlmClient {
 public:
  CachedLlmClient(ResponseCache& cache, LlmClient* live) : cache_(cache), live_(live) {}
  std::string complete(const std::string& prompt) override;

 private:
  ResponseCache& cache_;
  LlmClient* live_;
};

class CachedKgClient : public KgClient {
 public:
  CachedKgClient(ResponseCache& cache, KgClient* live) : cache_(cache), live_(live) {}
  std::vector<graph::Triple> neighbours(const std::string& entity, std::size_t hops) override;

 private:
  ResponseCache& cache_;
  KgClient* live_;
};

}  // namespace mail::construction
