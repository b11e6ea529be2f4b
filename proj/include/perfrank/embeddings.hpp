#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace perfrank {

struct EmbeddingConfig {
  std::filesystem::path cache_path;
  std::string endpoint;  // embeddings route; may be empty for cache-only use
  std::string model;
  std::string api_key_env;
  std::chrono::milliseconds timeout{60000};
};

/// Key -> vector store backed by a line-delimited `{"key","vector"}` file.
/// Online providers fetch misses from the endpoint and append them; offline
/// providers raise MissingEmbedding.
class EmbeddingProvider {
 public:
  EmbeddingProvider(EmbeddingConfig config, bool online);

  std::vector<double> embed(const std::string& key, const std::string& text);
  bool contains(const std::string& key) const;
  std::size_t size() const;

 private:
  std::vector<double> fetch(const std::string& text) const;

  EmbeddingConfig config_;
  bool online_;
  std::string api_key_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<double>> cache_;
};

std::map<std::string, std::vector<double>> read_embedding_cache(const std::filesystem::path& path);
void write_embedding_cache(const std::filesystem::path& path,
                           const std::map<std::string, std::vector<double>>& vectors);

}  // namespace perfrank
