#include "perfrank/chat_client.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

#include "perfrank/error.hpp"

namespace perfrank {

void ChatProviderConfig::validate() const {
  if (endpoint.empty()) throw Error(ErrorKind::InvalidConfig, "chat provider endpoint is empty");
  if (model.empty()) throw Error(ErrorKind::InvalidConfig, "chat provider model is empty");
  if (max_in_flight < 1) throw Error(ErrorKind::InvalidConfig, "max_in_flight must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorKind::InvalidConfig, "retry.max_attempts must be >= 1");
}

TranscriptCache::TranscriptCache(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) return;
  for_each_jsonl(path_, [&](std::size_t line, const json& r) {
    if (!r.contains("request_hash") || !r.contains("request") || !r.contains("response")) {
      throw Error(ErrorKind::Format, path_.string() + ":" + std::to_string(line) + ": incomplete transcript entry");
    }
    entries_[r["request_hash"].get<std::string>()] = {r["request"], r["response"]};
  });
}

std::optional<json> TranscriptCache::find(const std::string& hash) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(hash);
  if (it == entries_.end()) return std::nullopt;
  return it->second.second;
}

bool TranscriptCache::contains(const std::string& hash) const {
  std::lock_guard lock(mutex_);
  return entries_.contains(hash);
}

void TranscriptCache::record(const std::string& hash, const json& request, const json& response) {
  std::lock_guard lock(mutex_);
  if (!entries_.emplace(hash, std::make_pair(request, response)).second) return;
  dirty_ = true;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + path_.string());
  out << dump_json(json{{"request_hash", hash}, {"request", request}, {"response", response}}) << '\n';
}

void TranscriptCache::compact() {
  std::lock_guard lock(mutex_);
  if (!dirty_) return;
  std::vector<json> lines;
  lines.reserve(entries_.size());
  for (const auto& [hash, entry] : entries_) {
    lines.push_back(json{{"request_hash", hash}, {"request", entry.first}, {"response", entry.second}});
  }
  write_jsonl(path_, lines);
  dirty_ = false;
}

std::size_t TranscriptCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

json build_chat_request(const ChatProviderConfig& config, std::span<const ChatMessage> messages) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
  json request{{"model", config.model}, {"messages", std::move(msgs)}, {"temperature", config.temperature}};
  if (config.request_logprobs) request["logprobs"] = true;
  return request;
}

std::string request_hash(const json& request) { return sha256_hex(dump_json(request)); }

ChatReply parse_chat_response(const json& response) {
  try {
    const auto& choice = response.at("choices").at(0);
    ChatReply reply;
    reply.content = choice.at("message").at("content").get<std::string>();
    if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
      if (auto content = lp->find("content"); content != lp->end() && content->is_array()) {
        for (const auto& tok : *content) {
          reply.logprobs.push_back({tok.at("token").get<std::string>(), tok.at("logprob").get<double>()});
        }
      }
    }
    return reply;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed chat response: ") + e.what());
  }
}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorKind::InvalidConfig, "unsupported endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

}  // namespace

HttpJsonResult post_json(const std::string& url, const json& body, const std::string& bearer,
                         std::chrono::milliseconds timeout) {
  const auto target = parse_url(url);
  httplib::Client client(target.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
  auto res = client.Post(target.path, headers, dump_json(body), "application/json");
  HttpJsonResult out;
  if (!res) {
    out.error = "connection failed: " + httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  if (res->status != 200) {
    out.error = "HTTP " + std::to_string(res->status);
    return out;
  }
  try {
    out.body = json::parse(res->body);
  } catch (const json::exception& e) {
    out.error = std::string("response is not JSON: ") + e.what();
  }
  return out;
}

std::string resolve_api_key(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* value = std::getenv(env_var.c_str());
  if (value == nullptr) throw Error(ErrorKind::InvalidConfig, "environment variable " + env_var + " is not set");
  return value;
}

ChatClient::ChatClient(ChatProviderConfig config, std::shared_ptr<TranscriptCache> cache, bool online)
    : config_(std::move(config)), cache_(std::move(cache)), online_(online) {
  config_.validate();
  if (online_) api_key_ = resolve_api_key(config_.api_key_env);
}

ChatResult ChatClient::send(const json& request, const std::string& hash) {
  if (cache_) {
    if (auto cached = cache_->find(hash)) {
      try {
        return {parse_chat_response(*cached), {}, false};
      } catch (const Error& e) {
        return {std::nullopt, e.detail(), false};
      }
    }
  }
  if (!online_) throw Error(ErrorKind::OfflineCacheMiss, "request " + hash + " is not in the transcript cache");

  ChatResult result;
  result.unreachable = true;
  auto delay = config_.retry.backoff;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    auto http = post_json(config_.endpoint, request, api_key_, config_.timeout);
    if (http.status != 0) result.unreachable = false;
    if (http.body) {
      try {
        ChatReply reply = parse_chat_response(*http.body);
        if (cache_) cache_->record(hash, request, *http.body);
        return {std::move(reply), {}, false};
      } catch (const Error& e) {
        result.error = e.detail();
        return result;  // a malformed 200 will not improve on retry
      }
    }
    result.error = http.error;
    const bool retryable = http.status == 0 || http.status == 429 || http.status >= 500;
    if (!retryable) return result;
    if (attempt < config_.retry.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  return result;
}

ChatResult ChatClient::complete(std::span<const ChatMessage> messages) {
  const json request = build_chat_request(config_, messages);
  return send(request, request_hash(request));
}

std::vector<ChatResult> ChatClient::complete_all(const std::vector<std::vector<ChatMessage>>& conversations) {
  std::vector<json> requests;
  std::vector<std::string> hashes;
  requests.reserve(conversations.size());
  std::size_t misses = 0;
  for (const auto& conv : conversations) {
    requests.push_back(build_chat_request(config_, conv));
    hashes.push_back(request_hash(requests.back()));
    if (!cache_ || !cache_->contains(hashes.back())) ++misses;
  }
  if (!online_ && misses > 0) {
    throw Error(ErrorKind::OfflineCacheMiss, std::to_string(misses) + " of " + std::to_string(requests.size()) +
                                                 " requests are not in the transcript cache; rerun with --online");
  }

  std::vector<ChatResult> results(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        results[i] = send(requests[i], hashes[i]);
      } catch (const std::exception& e) {
        results[i] = {std::nullopt, e.what(), false};
      }
    }
  };
  const std::size_t n_threads = std::min(config_.max_in_flight, std::max<std::size_t>(misses, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (cache_) cache_->compact();
  return results;
}

}  // namespace perfrank
