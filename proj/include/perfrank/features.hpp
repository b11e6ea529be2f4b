#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "perfrank/corpus.hpp"

namespace perfrank {

enum class Weighting { Count, TfIdf };

std::string_view to_string(Weighting weighting) noexcept;
Weighting weighting_from_string(std::string_view name);

struct FeatureConfig {
  int ngram_order = 1;
  bool remove_stopwords = false;
  Weighting weighting = Weighting::TfIdf;
  std::size_t min_doc_freq = 1;
  bool lowercase = true;

  void validate() const;
  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Unigram TF-IDF with stop-word removal (base classifier).
FeatureConfig base_feature_config();
/// Bigram TF-IDF with stop-word removal (error model).
FeatureConfig error_feature_config();

/// Built-in English stop-word list (data/stopwords_en.txt, compiled in).
const std::unordered_set<std::string>& english_stopwords();
/// Parses a one-token-per-line resource; '#' lines and blanks are skipped.
std::unordered_set<std::string> parse_stopword_list(std::string_view resource);

/// Splits on runs of non-alphanumeric code points. Non-ASCII letters count as
/// alphanumeric; Latin-1, Latin Extended-A, Greek and Cyrillic are lowercased.
std::vector<std::string> tokenize(std::string_view text, const FeatureConfig& config);

/// Contiguous n-token windows joined by a single space.
std::vector<std::string> ngrams(std::span<const std::string> tokens, int n);

/// Sparse row; entries strictly increasing by index, no explicit zeros.
struct SparseVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t nnz() const noexcept { return entries.size(); }
  double norm() const noexcept;
  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Frozen n-gram index: lexicographically ordered terms, document frequencies
/// and the number of documents it was built from.
class Vocabulary {
 public:
  Vocabulary() = default;

  std::size_t size() const noexcept { return terms_.size(); }
  std::optional<std::uint32_t> lookup(std::string_view term) const;
  const std::string& term(std::uint32_t index) const { return terms_.at(index); }
  std::size_t doc_freq(std::uint32_t index) const { return doc_freq_.at(index); }
  std::size_t n_docs() const noexcept { return n_docs_; }
  const FeatureConfig& config() const noexcept { return config_; }
  double idf(std::uint32_t index) const;

  /// SHA-256 over the config, terms and document frequencies.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  friend Vocabulary build_vocabulary(std::span<const std::vector<std::string>> docs,
                                     const FeatureConfig& config);
  Vocabulary(FeatureConfig config, std::vector<std::string> terms, std::vector<std::size_t> doc_freq,
             std::size_t n_docs);

  FeatureConfig config_;
  std::vector<std::string> terms_;
  std::vector<std::size_t> doc_freq_;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::string fingerprint_;
};

/// `docs` are token lists; n-grams of config.ngram_order are formed here.
Vocabulary build_vocabulary(std::span<const std::vector<std::string>> docs, const FeatureConfig& config);

/// Count mode: raw n-gram counts. TF-IDF mode: count * (ln((1+N)/(1+df)) + 1),
/// then L2-normalized. Unseen n-grams are dropped.
SparseVector vectorize(std::span<const std::string> doc, const Vocabulary& vocab);

/// tokenize + vectorize with the vocabulary's own config.
SparseVector featurize(std::string_view text, const Vocabulary& vocab);

struct TokenDistribution {
  std::map<std::string, double> probs;
};

/// Relative unigram frequencies over every token of the instance set.
TokenDistribution token_distribution(std::span<const Instance> instances, const FeatureConfig& config);

/// Base-2 Jensen-Shannon divergence over the union support; lies in [0, 1].
double js_divergence(const TokenDistribution& p, const TokenDistribution& q);

}  // namespace perfrank
