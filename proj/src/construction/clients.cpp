#include "mail/construction/clients.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "mail/error.hpp"
#include "mail/numeric/random.hpp"

namespace mail::construction {

namespace {

httplib::Client make_client(const EndpointConfig& config) {
  httplib::Client cli(config.base_url);
  if (!cli.is_valid()) throw Error(ErrorCode::kInvalidConfig, "bad endpoint '" + config.base_url + "'");
  const auto secs = static_cast<time_t>(config.timeout_seconds);
  const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  if (!config.token_env.empty()) {
    if (const char* token = std::getenv(config.token_env.c_str()); token != nullptr && *token != '\0') {
      cli.set_bearer_token_auth(token);
    }
  }
  return cli;
}

// 5xx, 429 and transport failures are retried; other statuses are final.
template <typename Send>
std::string with_retries(const EndpointConfig& config, const std::string& what, Send send) {
  std::string last;
  for (std::size_t attempt = 0; attempt <= config.retries; ++attempt) {
    httplib::Result res = send();
    if (!res) {
      last = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    last = "HTTP " + std::to_string(res->status);
    if (res->status < 500 && res->status != 429) break;
  }
  throw Error(ErrorCode::kServiceUnavailable, what + " at " + config.base_url + config.path + ": " + last);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

HttpLlmClient::HttpLlmClient(EndpointConfig config) : config_(std::move(config)) {}

std::string HttpLlmClient::complete(const std::string& prompt) {
  httplib::Client cli = make_client(config_);
  return with_retries(config_, "completion", [&] { return cli.Post(config_.path, prompt, "text/plain"); });
}

HttpKgClient::HttpKgClient(EndpointConfig config) : config_(std::move(config)) {}

std::vector<graph::Triple> HttpKgClient::neighbours(const std::string& entity, std::size_t hops) {
  httplib::Client cli = make_client(config_);
  const httplib::Params params = {{"entity", entity}, {"hops", std::to_string(hops)}};
  const std::string body =
      with_retries(config_, "kg query", [&] { return cli.Get(config_.path, params, httplib::Headers{}); });
  return triples_from_json(body);
}

std::string kg_request_key(const std::string& entity, std::size_t hops) {
  return entity + "\t" + std::to_string(hops);
}

std::string triples_to_json(const std::vector<graph::Triple>& triples) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : triples) rows.push_back({t.head, t.relation, t.tail});
  return nlohmann::json{{"triples", rows}}.dump();
}

std::vector<graph::Triple> triples_from_json(const std::string& text) {
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    std::vector<graph::Triple> out;
    for (const auto& row : doc.at("triples")) {
      if (!row.is_array() || row.size() != 3) throw Error(ErrorCode::kParseError, "triple must have 3 fields");
      out.push_back({row[0].get<std::string>(), row[1].get<std::string>(), row[2].get<std::string>()});
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("kg response: ") + e.what());
  }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create cache dir " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ResponseCache::entry_path(const std::string& kind, const std::string& request) const {
  return dir_ / (kind + "-" + hex64(numeric::fnv1a64(kind + "\n" + request)) + ".json");
}

std::optional<std::string> ResponseCache::get(const std::string& kind, const std::string& request) const {
  std::ifstream in(entry_path(kind, request), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    const nlohmann::json doc = nlohmann::json::parse(in);
    // a hash collision is a miss, not a wrong answer
    if (doc.at("kind") != kind || doc.at("request") != request) return std::nullopt;
    return doc.at("response").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "corrupt cache entry " + entry_path(kind, request).string());
  }
}

void ResponseCache::put(const std::string& kind, const std::string& request, const std::string& response) {
  static std::atomic<std::uint64_t> counter{0};
  const auto path = entry_path(kind, request);
  const std::string body = nlohmann::json{{"kind", kind}, {"request", request}, {"response", response}}.dump(2) + "\n";
  std::ostringstream tmp_name;
  tmp_name << path.string() << ".tmp." << std::this_thread::get_id() << "." << counter++;
  const std::filesystem::path tmp = tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary);
    out << body;
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::lock_guard lock(mutex_);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot store cache entry " + path.string() + ": " + ec.message());
}

std::size_t ResponseCache::size() const {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.path().extension() == ".json") ++n;
  return n;
}

std::string CachedLlmClient::complete(const std::string& prompt) {
  if (auto hit = cache_.get("llm", prompt)) return *hit;
  if (live_ == nullptr) throw Error(ErrorCode::kCacheMiss, "no cached completion for this prompt");
  std::string response = live_->complete(prompt);
  cache_.put("llm", prompt, response);
  return response;
}

std::vector<graph::Triple> CachedKgClient::neighbours(const std::string& entity, std::size_t hops) {
  const std::string key = kg_request_key(entity, hops);
  if (auto hit = cache_.get("kg", key)) return triples_from_json(*hit);
  if (live_ == nullptr) throw Error(ErrorCode::kCacheMiss, "no cached kg response for '" + entity + "'");
  std::vector<graph::Triple> triples = live_->neighbours(entity, hops);
  cache_.put("kg", key, triples_to_json(triples));
  return triples;
}

}  // namespace mail::construction
