#include "perfrank/error.hpp"

namespace perfrank {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::InvalidRecord: return "InvalidRecord";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::InsufficientInstances: return "InsufficientInstances";
    case ErrorKind::TooFewInstances: return "TooFewInstances";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::NoTokens: return "NoTokens";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorKind::Unparseable: return "Unparseable";
    case ErrorKind::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorKind::PartialFailure: return "PartialFailure";
    case ErrorKind::MissingPrediction: return "MissingPrediction";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::OfflineCacheMiss: return "OfflineCacheMiss";
    case ErrorKind::EmptyDomain: return "EmptyDomain";
    case ErrorKind::MissingConfidence: return "MissingConfidence";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::TooFew: return "TooFew";
    case ErrorKind::TooManyErrors: return "TooManyErrors";
    case ErrorKind::PreconditionViolated: return "PreconditionViolated";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

namespace {

std::string describe_failures(const std::vector<std::string>& ids, const std::string& detail) {
  std::string msg = std::to_string(ids.size()) + " item(s) failed";
  if (!ids.empty()) {
    msg += " [";
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i > 0) msg += ", ";
      msg += ids[i];
    }
    msg += "]";
  }
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

PartialFailure::PartialFailure(std::vector<std::string> failed_ids, std::string detail)
    : Error(ErrorKind::PartialFailure, describe_failures(failed_ids, detail)),
      failed_ids_(std::move(failed_ids)) {}

bool is_validation_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::PartialFailure:
    case ErrorKind::ProviderUnavailable:
    case ErrorKind::NonFinite:
      return false;
    default:
      return true;
  }
}

}  // namespace perfrank
