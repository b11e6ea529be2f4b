#include "perfrank/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

namespace detail {
extern const std::string_view kEnglishStopwordsResource;
}

std::string_view to_string(Weighting weighting) noexcept {
  return weighting == Weighting::Count ? "count" : "tfidf";
}

Weighting weighting_from_string(std::string_view name) {
  if (name == "count") return Weighting::Count;
  if (name == "tfidf") return Weighting::TfIdf;
  throw Error(ErrorKind::InvalidConfig, "unknown weighting '" + std::string(name) + "'");
}

void FeatureConfig::validate() const {
  if (ngram_order < 1 || ngram_order > 3) {
    throw Error(ErrorKind::InvalidConfig, "ngram_order must be 1, 2 or 3");
  }
  if (min_doc_freq < 1) throw Error(ErrorKind::InvalidConfig, "min_doc_freq must be >= 1");
}

FeatureConfig base_feature_config() {
  return FeatureConfig{.ngram_order = 1, .remove_stopwords = true, .weighting = Weighting::TfIdf};
}

FeatureConfig error_feature_config() {
  return FeatureConfig{.ngram_order = 2, .remove_stopwords = true, .weighting = Weighting::TfIdf};
}

std::unordered_set<std::string> parse_stopword_list(std::string_view resource) {
  std::unordered_set<std::string> words;
  std::size_t pos = 0;
  while (pos < resource.size()) {
    auto end = resource.find('\n', pos);
    if (end == std::string_view::npos) end = resource.size();
    auto line = resource.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.remove_suffix(1);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    words.emplace(line);
  }
  return words;
}

const std::unordered_set<std::string>& english_stopwords() {
  static const auto words = parse_stopword_list(detail::kEnglishStopwordsResource);
  return words;
}

namespace {

constexpr char32_t kInvalid = 0xFFFD;

// Decodes one code point starting at text[i], advancing i. Malformed input
// yields U+FFFD and consumes one byte.
char32_t next_codepoint(std::string_view text, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + static_cast<std::size_t>(extra) >= text.size()) {
    ++i;
    return kInvalid;
  }
  for (int k = 1; k <= extra; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(extra) + 1;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_word_codepoint(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp == kInvalid) return false;
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;  // punctuation, currency, arrows, math, symbols
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return false;
  if (cp >= 0xFE00 && cp <= 0xFE0F) return false;  // variation selectors
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if ((cp >= 0xFF01 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20)) return false;
  if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0x80) return cp;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137) return cp | 1U;
  if (cp >= 0x139 && cp <= 0x148) return (cp & 1U) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return cp | 1U;
  if (cp >= 0x179 && cp <= 0x17E) return (cp & 1U) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, const FeatureConfig& config) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    if (!config.remove_stopwords || !english_stopwords().contains(current)) {
      tokens.push_back(std::move(current));
    }
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = next_codepoint(text, i);
    if (is_word_codepoint(cp)) {
      append_utf8(current, config.lowercase ? to_lower(cp) : cp);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

std::vector<std::string> ngrams(std::span<const std::string> tokens, int n) {
  if (n < 1) throw Error(ErrorKind::OutOfRange, "n-gram order must be >= 1");
  std::vector<std::string> out;
  const auto order = static_cast<std::size_t>(n);
  if (tokens.size() < order) return out;
  out.reserve(tokens.size() - order + 1);
  for (std::size_t start = 0; start + order <= tokens.size(); ++start) {
    std::string gram = tokens[start];
    for (std::size_t k = 1; k < order; ++k) {
      gram += ' ';
      gram += tokens[start + k];
    }
    out.push_back(std::move(gram));
  }
  return out;
}

double SparseVector::norm() const noexcept {
  double sum = 0.0;
  for (const auto& [idx, w] : entries) sum += w * w;
  return std::sqrt(sum);
}

Vocabulary::Vocabulary(FeatureConfig config, std::vector<std::string> terms,
                       std::vector<std::size_t> doc_freq, std::size_t n_docs)
    : config_(config), terms_(std::move(terms)), doc_freq_(std::move(doc_freq)), n_docs_(n_docs) {
  index_.reserve(terms_.size());
  std::string canonical = "perfrank-vocab-v1\n";
  canonical += "ngram_order=" + std::to_string(config_.ngram_order) +
               " remove_stopwords=" + std::to_string(config_.remove_stopwords) +
               " weighting=" + std::string(to_string(config_.weighting)) +
               " min_doc_freq=" + std::to_string(config_.min_doc_freq) +
               " lowercase=" + std::to_string(config_.lowercase) + " n_docs=" + std::to_string(n_docs_) + "\n";
  for (std::uint32_t i = 0; i < terms_.size(); ++i) {
    index_.emplace(terms_[i], i);
    canonical += terms_[i];
    canonical += '\t';
    canonical += std::to_string(doc_freq_[i]);
    canonical += '\n';
  }
  fingerprint_ = sha256_hex(canonical);
}

std::optional<std::uint32_t> Vocabulary::lookup(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double Vocabulary::idf(std::uint32_t index) const {
  const auto df = static_cast<double>(doc_freq_.at(index));
  return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df)) + 1.0;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  json header{{"format", "perfrank-vocabulary"},
              {"version", 1},
              {"ngram_order", config_.ngram_order},
              {"remove_stopwords", config_.remove_stopwords},
              {"weighting", to_string(config_.weighting)},
              {"min_doc_freq", config_.min_doc_freq},
              {"lowercase", config_.lowercase},
              {"n_docs", n_docs_},
              {"fingerprint", fingerprint_}};
  std::string out = dump_json(header) + "\n";
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    out += dump_json(json::array({terms_[i], doc_freq_[i]}));
    out += '\n';
  }
  write_text_file(path, out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": empty vocabulary file");
  json header;
  try {
    header = json::parse(line);
    if (header.at("format") != "perfrank-vocabulary" || header.at("version") != 1) {
      throw Error(ErrorKind::Format, path.string() + ": not a perfrank vocabulary v1");
    }
    FeatureConfig config;
    config.ngram_order = header.at("ngram_order").get<int>();
    config.remove_stopwords = header.at("remove_stopwords").get<bool>();
    config.weighting = weighting_from_string(header.at("weighting").get<std::string>());
    config.min_doc_freq = header.at("min_doc_freq").get<std::size_t>();
    config.lowercase = header.at("lowercase").get<bool>();
    std::vector<std::string> terms;
    std::vector<std::size_t> dfs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto row = json::parse(line);
      terms.push_back(row.at(0).get<std::string>());
      dfs.push_back(row.at(1).get<std::size_t>());
    }
    Vocabulary vocab(config, std::move(terms), std::move(dfs), header.at("n_docs").get<std::size_t>());
    if (vocab.fingerprint() != header.at("fingerprint").get<std::string>()) {
      throw Error(ErrorKind::FingerprintMismatch, path.string() + ": vocabulary content does not match its fingerprint");
    }
    return vocab;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": " + e.what());
  }
}

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> docs, const FeatureConfig& config) {
  config.validate();
  if (docs.empty()) throw Error(ErrorKind::EmptyVocabulary, "no documents");
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    auto grams = ngrams(doc, config.ngram_order);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> doc_freq;
  for (auto& [term, count] : df) {
    if (count >= config.min_doc_freq) {
      terms.push_back(term);
      doc_freq.push_back(count);
    }
  }
  if (terms.empty()) {
    throw Error(ErrorKind::EmptyVocabulary,
                "no n-gram reaches min_doc_freq=" + std::to_string(config.min_doc_freq));
  }
  return Vocabulary(config, std::move(terms), std::move(doc_freq), docs.size());
}

SparseVector vectorize(std::span<const std::string> doc, const Vocabulary& vocab) {
  std::map<std::uint32_t, double> counts;
  for (const auto& gram : ngrams(doc, vocab.config().ngram_order)) {
    if (auto idx = vocab.lookup(gram)) counts[*idx] += 1.0;
  }
  SparseVector v;
  v.entries.assign(counts.begin(), counts.end());
  if (vocab.config().weighting == Weighting::TfIdf && !v.entries.empty()) {
    for (auto& [idx, w] : v.entries) w *= vocab.idf(idx);
    const double norm = v.norm();
    for (auto& [idx, w] : v.entries) w /= norm;
  }
  return v;
}

SparseVector featurize(std::string_view text, const Vocabulary& vocab) {
  return vectorize(tokenize(text, vocab.config()), vocab);
}

TokenDistribution token_distribution(std::span<const Instance> instances, const FeatureConfig& config) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& inst : instances) {
    for (auto& tok : tokenize(inst.text, config)) {
      counts[std::move(tok)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw Error(ErrorKind::NoTokens, "instance set yields no tokens");
  TokenDistribution dist;
  for (auto& [tok, c] : counts) dist.probs.emplace(tok, c / total);
  return dist;
}

namespace {

double kl_term(double p, double m) { return p > 0.0 ? p * std::log2(p / m) : 0.0; }

}  // namespace

double js_divergence(const TokenDistribution& p, const TokenDistribution& q) {
  double total = 0.0;
  auto ip = p.probs.begin();
  auto iq = q.probs.begin();
  // Merge walk over the sorted union support.
  while (ip != p.probs.end() || iq != q.probs.end()) {
    double pv = 0.0;
    double qv = 0.0;
    if (iq == q.probs.end() || (ip != p.probs.end() && ip->first < iq->first)) {
      pv = (ip++)->second;
    } else if (ip == p.probs.end() || iq->first < ip->first) {
      qv = (iq++)->second;
    } else {
      pv = (ip++)->second;
      qv = (iq++)->second;
    }
    const double m = 0.5 * (pv + qv);
    total += 0.5 * kl_term(pv, m) + 0.5 * kl_term(qv, m);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace perfrank
