#include "perfrank/embeddings.hpp"

#include <fstream>

#include "perfrank/chat_client.hpp"
#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

std::map<std::string, std::vector<double>> read_embedding_cache(const std::filesystem::path& path) {
  std::map<std::string, std::vector<double>> out;
  for_each_jsonl(path, [&](std::size_t line, const json& r) {
    try {
      out[r.at("key").get<std::string>()] = r.at("vector").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void write_embedding_cache(const std::filesystem::path& path,
                           const std::map<std::string, std::vector<double>>& vectors) {
  std::vector<json> lines;
  lines.reserve(vectors.size());
  for (const auto& [key, vec] : vectors) lines.push_back(json{{"key", key}, {"vector", vec}});
  write_jsonl(path, lines);
}

EmbeddingProvider::EmbeddingProvider(EmbeddingConfig config, bool online)
    : config_(std::move(config)), online_(online) {
  if (!config_.cache_path.empty() && std::filesystem::exists(config_.cache_path)) {
    cache_ = read_embedding_cache(config_.cache_path);
  }
  if (online_) {
    if (config_.endpoint.empty()) throw Error(ErrorKind::InvalidConfig, "online embedding provider needs an endpoint");
    api_key_ = resolve_api_key(config_.api_key_env);
  }
}

bool EmbeddingProvider::contains(const std::string& key) const {
  std::lock_guard lock(mutex_);
  return cache_.contains(key);
}

std::size_t EmbeddingProvider::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

std::vector<double> EmbeddingProvider::fetch(const std::string& text) const {
  json request{{"input", text}};
  if (!config_.model.empty()) request["model"] = config_.model;
  auto http = post_json(config_.endpoint, request, api_key_, config_.timeout);
  if (!http.body) throw Error(ErrorKind::ProviderUnavailable, "embedding request failed: " + http.error);
  try {
    return http.body->at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed embedding response: ") + e.what());
  }
}

std::vector<double> EmbeddingProvider::embed(const std::string& key, const std::string& text) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  if (!online_) throw Error(ErrorKind::MissingEmbedding, key);
  auto vec = fetch(text);
  std::lock_guard lock(mutex_);
  cache_.emplace(key, vec);
  if (!config_.cache_path.empty()) {
    if (config_.cache_path.has_parent_path()) std::filesystem::create_directories(config_.cache_path.parent_path());
    std::ofstream out(config_.cache_path, std::ios::binary | std::ios::app);
    out << dump_json(json{{"key", key}, {"vector", vec}}) << '\n';
  }
  return vec;
}

}  // namespace perfrank
