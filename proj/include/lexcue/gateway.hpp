#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "lexcue/error.hpp"
#include "lexcue/hash.hpp"

namespace lexcue {

struct DecodeParams {
  std::optional<double> temperature;
  std::optional<int> max_tokens;

  bool operator==(const DecodeParams&) const = default;
};

struct ChatRequest {
  std::string system;
  std::string user;
  std::string provider_id;
  DecodeParams decode;

  /// Canonical JSON (sorted keys, unset decode params omitted).
  nlohmann::json canonical() const {
    nlohmann::json dp = nlohmann::json::object();
    if (decode.temperature) dp["temperature"] = *decode.temperature;
    if (decode.max_tokens) dp["max_tokens"] = *decode.max_tokens;
    return {{"system", system}, {"user", user}, {"provider_id", provider_id},
            {"decode_params", dp}};
  }
  std::string cache_key() const { return sha256_hex(canonical().dump()); }

  bool operator==(const ChatRequest&) const = default;
};

struct ProviderReply {
  std::string text;
  std::string timestamp;  // ISO-8601 UTC
};

struct ChatResponse {
  std::string text;
  std::string timestamp;
  std::string provider_id;
  bool from_cache = false;
  int retries = 0;
};

inline std::string utc_now_iso() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// A retryable or fatal failure reported by a provider.
class ProviderCallError : public ProviderError {
 public:
  ProviderCallError(const std::string& what, int status, bool retryable,
                    std::optional<double> retry_after_s = std::nullopt)
      : ProviderError(what, status), retryable_(retryable), retry_after_s_(retry_after_s) {}
  bool retryable() const noexcept { return retryable_; }
  std::optional<double> retry_after() const noexcept { return retry_after_s_; }

 private:
  bool retryable_;
  std::optional<double> retry_after_s_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string id() const = 0;
  /// One attempt. Throws ProviderCallError on failure.
  virtual ProviderReply call(const ChatRequest& req) = 0;
};

/// Deterministic offline provider: exact-request fixtures first, then an
/// optional responder function.
class MockProvider : public ChatProvider {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit MockProvider(std::string id = "mock", Responder responder = {})
      : id_(std::move(id)), responder_(std::move(responder)) {}

  /// Fixture keyed by (system, user); provider id and decode params ignored.
  void add_fixture(const std::string& system, const std::string& user,
                   std::string response) {
    std::lock_guard lock(mu_);
    fixtures_[fixture_key(system, user)] = std::move(response);
  }

  /// JSONL of {"system", "user", "response"} objects.
  void load_fixtures(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open mock fixtures " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        auto j = nlohmann::json::parse(line);
        add_fixture(j.at("system").get<std::string>(), j.at("user").get<std::string>(),
                    j.at("response").get<std::string>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  std::string id() const override { return id_; }

  ProviderReply call(const ChatRequest& req) override {
    ++calls_;
    {
      std::lock_guard lock(mu_);
      if (auto it = fixtures_.find(fixture_key(req.system, req.user)); it != fixtures_.end())
        return {it->second, "1970-01-01T00:00:00Z"};
    }
    if (responder_) return {responder_(req), "1970-01-01T00:00:00Z"};
    throw ProviderCallError("mock provider has no fixture for this request", 404, false);
  }

  std::size_t calls() const { return calls_.load(); }

 private:
  static std::string fixture_key(const std::string& s, const std::string& u) {
    return sha256_hex(nlohmann::json{{"system", s}, {"user", u}}.dump());
  }

  std::string id_;
  Responder responder_;
  std::mutex mu_;
  std::map<std::string, std::string> fixtures_;
  std::atomic<std::size_t> calls_{0};
};

struct RemoteConfig {
  std::string endpoint;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key;   // resolved from the environment by the caller
  double timeout_s = 120.0;
};

/// Splits "scheme://host[:port]/base/path" into ("scheme://host[:port]", "/base/path").
inline std::pair<std::string, std::string> split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

inline std::optional<double> parse_retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  try {
    return std::stod(res->get_header_value("Retry-After"));
  } catch (...) {
    return std::nullopt;
  }
}

/// OpenAI-compatible chat-completions endpoint.
class OpenAICompatProvider : public ChatProvider {
 public:
  explicit OpenAICompatProvider(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty()) throw Error("remote provider: endpoint is required");
    if (cfg_.model.empty()) throw Error("remote provider: model id is required");
    std::tie(host_, base_path_) = split_endpoint(cfg_.endpoint);
  }

  std::string id() const override { return "openai-compat:" + cfg_.model; }

  ProviderReply call(const ChatRequest& req) override {
    nlohmann::json body{{"model", cfg_.model},
                        {"messages",
                         {{{"role", "system"}, {"content", req.system}},
                          {{"role", "user"}, {"content", req.user}}}}};
    if (req.decode.temperature) body["temperature"] = *req.decode.temperature;
    if (req.decode.max_tokens) body["max_tokens"] = *req.decode.max_tokens;

    httplib::Client cli(host_);
    const auto secs = std::chrono::duration<double>(cfg_.timeout_s);
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(secs));
    cli.set_connection_timeout(10);
    httplib::Headers headers;
    if (!cfg_.api_key.empty())
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = cli.Post(base_path_ + "/chat/completions", headers, body.dump(),
                        "application/json");
    if (!res)
      throw ProviderCallError("request to " + host_ + " failed: " +
                                  httplib::to_string(res.error()),
                              0, true);
    if (res->status == 429 || res->status >= 500)
      throw ProviderCallError("HTTP " + std::to_string(res->status) + ": " + res->body,
                              res->status, true, parse_retry_after(res));
    if (res->status != 200)
      throw ProviderCallError("HTTP " + std::to_string(res->status) + ": " + res->body,
                              res->status, false);
    try {
      auto j = nlohmann::json::parse(res->body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      return {content.is_string() ? content.get<std::string>() : std::string{},
              utc_now_iso()};
    } catch (const nlohmann::json::exception& e) {
      throw ProviderCallError(std::string("malformed completion response: ") + e.what(),
                              res->status, false);
    }
  }

 private:
  RemoteConfig cfg_;
  std::string host_, base_path_;
};

/// Content-addressed on-disk store: <dir>/<sha256>.json holding
/// {request, response, timestamp, provider_id}.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::filesystem::path path_for(const std::string& key) const {
    return dir_ / (key + ".json");
  }

  std::optional<ChatResponse> get(const std::string& key) const {
    std::lock_guard lock(stripe(key));
    const auto p = path_for(key);
    if (!std::filesystem::exists(p)) return std::nullopt;
    try {
      auto j = nlohmann::json::parse(read_file(p));
      ChatResponse r;
      r.text = j.at("response").get<std::string>();
      r.timestamp = j.value("timestamp", std::string{});
      r.provider_id = j.value("provider_id", std::string{});
      r.from_cache = true;
      return r;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;  // unreadable entry; will be overwritten
    }
  }

  void put(const std::string& key, const ChatRequest& req, const ChatResponse& resp) {
    std::lock_guard lock(stripe(key));
    const nlohmann::json j{{"request", req.canonical()},
                           {"response", resp.text},
                           {"timestamp", resp.timestamp},
                           {"provider_id", resp.provider_id}};
    const auto final_path = path_for(key);
    auto tmp = final_path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error("cannot write cache entry " + tmp.string());
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, final_path);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::mutex& stripe(const std::string& key) const {
    return stripes_[fnv1a64(key) % stripes_.size()];
  }

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
};

struct RetryPolicy {
  int max_retries = 5;
  double base_delay_s = 1.0;
  double max_delay_s = 60.0;
};

/// Cached, retrying, concurrency-limited access to a chat provider.
class Gateway {
 public:
  Gateway(std::shared_ptr<ChatProvider> provider, std::optional<std::filesystem::path> cache_dir,
          std::size_t max_in_flight = 4, RetryPolicy retry = {})
      : provider_(std::move(provider)),
        permits_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, max_in_flight))),
        max_in_flight_(std::max<std::size_t>(1, max_in_flight)),
        retry_(retry) {
    if (!provider_) throw Error("gateway needs a provider");
    if (cache_dir) cache_.emplace(*cache_dir);
  }

  ChatResponse complete(ChatRequest req) {
    if (req.system.empty() || req.user.empty())
      throw Error("chat request needs non-empty system and user messages");
    if (req.provider_id.empty()) req.provider_id = provider_->id();
    const std::string key = req.cache_key();
    if (cache_)
      if (auto hit = cache_->get(key)) {
        ++cache_hits_;
        return *hit;
      }

    ChatResponse resp;
    resp.provider_id = req.provider_id;
    for (int attempt = 0;; ++attempt) {
      try {
        permits_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{permits_};
        ++provider_calls_;
        auto reply = provider_->call(req);
        resp.text = std::move(reply.text);
        resp.timestamp = std::move(reply.timestamp);
        resp.retries = attempt;
        break;
      } catch (const ProviderCallError& e) {
        if (!e.retryable() || attempt >= retry_.max_retries)
          throw ProviderError("provider '" + req.provider_id + "' failed after " +
                                  std::to_string(attempt + 1) + " attempt(s): " + e.what(),
                              e.status());
        ++retries_;
        double delay = std::min(retry_.max_delay_s, retry_.base_delay_s * std::pow(2.0, attempt));
        if (e.retry_after()) delay = std::max(delay, std::min(*e.retry_after(), retry_.max_delay_s));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
    }
    if (cache_) cache_->put(key, req, resp);
    return resp;
  }

  const ChatProvider& provider() const { return *provider_; }
  std::string provider_id() const { return provider_->id(); }
  std::size_t max_in_flight() const { return max_in_flight_; }
  std::size_t provider_calls() const { return provider_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  std::size_t retries() const { return retries_.load(); }

 private:
  std::shared_ptr<ChatProvider> provider_;
  std::optional<ResponseCache> cache_;
  std::counting_semaphore<> permits_;
  std::size_t max_in_flight_;
  RetryPolicy retry_;
  std::atomic<std::size_t> provider_calls_{0}, cache_hits_{0}, retries_{0};
};

}  // namespace lexcue
