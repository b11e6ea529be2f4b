#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace perfrank {

enum class ErrorKind {
  // corpus
  MissingField,
  UnknownLabel,
  DuplicateId,
  InvalidRecord,
  OutOfRange,
  InsufficientInstances,
  TooFewInstances,
  // features
  EmptyVocabulary,
  NoTokens,
  // linear
  DegenerateLabels,
  NonFinite,
  DimensionMismatch,
  FingerprintMismatch,
  // adapters
  Unparseable,
  ProviderUnavailable,
  PartialFailure,
  MissingPrediction,
  MissingEmbedding,
  OfflineCacheMiss,
  // estimator / ranking
  EmptyDomain,
  MissingConfidence,
  ZeroVector,
  LengthMismatch,
  ZeroVariance,
  TooFew,
  // variation
  TooManyErrors,
  PreconditionViolated,
  // plumbing
  InvalidConfig,
  Io,
  Format,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

/// A batch finished but some items could not be produced.
class PartialFailure : public Error {
 public:
  explicit PartialFailure(std::vector<std::string> failed_ids, std::string detail = {});

  const std::vector<std::string>& failed_ids() const noexcept { return failed_ids_; }

 private:
  std::vector<std::string> failed_ids_;
};

/// True for kinds caused by bad input data or configuration (CLI exit code 2).
bool is_validation_error(ErrorKind kind) noexcept;

}  // namespace perfrank
