#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "perfrank/corpus.hpp"
#include "perfrank/records.hpp"

namespace perfrank {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline constexpr std::string_view kCorrectLabel = "correct";
inline constexpr std::string_view kErrorLabel = "error";

/// Two-class schema {correct, error} used by error models.
LabelSchema error_label_schema();

/// Chat prompt with `{text}`, `{label}` and `{predicted}` slots.
struct PromptTemplate {
  std::string system;
  std::string exemplar_user;
  std::string exemplar_assistant;
  std::string user;
};

/// Few-shot base prompts for the offensive-language and sentiment tasks,
/// and a generic one built from the label list for custom schemas.
PromptTemplate base_prompt_template(const LabelSchema& schema);
/// Few-shot correctness-judgment prompt.
PromptTemplate error_prompt_template();

struct BaseExemplar {
  std::string text;
  Label label;
};

struct ErrorExemplar {
  std::string text;
  Label predicted;
  std::string error_label;  // "correct" | "error"
};

/// Substitutes `{name}` slots in one left-to-right pass; substituted text is
/// never rescanned. Unknown slots are left verbatim.
std::string fill_slots(std::string_view format, std::span<const std::pair<std::string_view, std::string_view>> slots);

std::vector<ChatMessage> render_base_prompt(const PromptTemplate& tmpl, std::span<const BaseExemplar> exemplars,
                                            std::string_view text);

std::vector<ChatMessage> render_error_prompt(const PromptTemplate& tmpl, std::span<const ErrorExemplar> exemplars,
                                             std::string_view text, std::string_view predicted);

/// Case-insensitive match of a model reply against `labels` after stripping
/// punctuation and an optional "label:" / "error label:" prefix. Longer labels
/// win, so "not offensive" never resolves to "offensive". Throws Unparseable.
Label parse_llm_label(std::string_view raw, std::span<const Label> labels);

/// k exemplars per label (fewer when a label has fewer instances), drawn from
/// `pool` by seed.
std::vector<BaseExemplar> select_base_exemplars(std::span<const Instance> pool, const LabelSchema& schema,
                                                std::size_t k_per_class, std::uint64_t seed);

/// k exemplars per error label from instances paired with the base model's
/// predictions on them. `predictions` is matched to `pool` by instance id.
std::vector<ErrorExemplar> select_error_exemplars(std::span<const Instance> pool,
                                                  std::span<const Prediction> predictions,
                                                  std::size_t k_per_class, std::uint64_t seed);

}  // namespace perfrank
