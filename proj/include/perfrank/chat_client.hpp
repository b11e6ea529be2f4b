#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "perfrank/prompts.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{250};  // doubled after every failed attempt
};

/// Settings for any endpoint speaking the chat-completions JSON protocol.
struct ChatProviderConfig {
  std::string endpoint;  // full URL, e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model;
  std::string api_key_env;  // name of the environment variable holding the key; may be empty
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  bool request_logprobs = true;

  void validate() const;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
};

struct ChatReply {
  std::string content;
  std::vector<TokenLogprob> logprobs;  // empty when the endpoint does not return them
};

/// Outcome of one request after retries.
struct ChatResult {
  std::optional<ChatReply> reply;
  std::string error;
  bool unreachable = false;  // no HTTP response was ever received
};

/// Request/response log keyed by a hash of the request body. Lets every remote
/// experiment be replayed offline.
class TranscriptCache {
 public:
  explicit TranscriptCache(std::filesystem::path path);

  std::optional<json> find(const std::string& request_hash) const;
  bool contains(const std::string& request_hash) const;
  /// Appends one line to the cache file immediately.
  void record(const std::string& request_hash, const json& request, const json& response);
  /// Rewrites the file sorted by request hash (no-op when nothing was added).
  void compact();
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, std::pair<json, json>> entries_;
  bool dirty_ = false;
};

json build_chat_request(const ChatProviderConfig& config, std::span<const ChatMessage> messages);
std::string request_hash(const json& request);
ChatReply parse_chat_response(const json& response);

struct HttpJsonResult {
  std::optional<json> body;
  int status = 0;  // 0 when the connection failed
  std::string error;
};

/// POSTs a JSON body. `bearer` adds an Authorization header when non-empty.
HttpJsonResult post_json(const std::string& url, const json& body, const std::string& bearer,
                         std::chrono::milliseconds timeout);

/// Resolves the key from `env_var`; empty name means no key. Throws
/// InvalidConfig when a named variable is unset.
std::string resolve_api_key(const std::string& env_var);

/// Chat-completions client with retries, bounded parallelism and a transcript
/// cache. Offline clients answer only from the cache.
class ChatClient {
 public:
  ChatClient(ChatProviderConfig config, std::shared_ptr<TranscriptCache> cache, bool online);

  const ChatProviderConfig& config() const noexcept { return config_; }
  bool online() const noexcept { return online_; }

  ChatResult complete(std::span<const ChatMessage> messages);

  /// Runs all conversations with at most config().max_in_flight requests in
  /// flight. Results are positionally aligned with the input. Offline, throws
  /// OfflineCacheMiss before sending anything if any request is uncached.
  std::vector<ChatResult> complete_all(const std::vector<std::vector<ChatMessage>>& conversations);

 private:
  ChatResult send(const json& request, const std::string& hash);

  ChatProviderConfig config_;
  std::shared_ptr<TranscriptCache> cache_;
  bool online_;
  std::string api_key_;
};

}  // namespace perfrank
