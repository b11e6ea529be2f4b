#include "perfrank/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>

#include "perfrank/error.hpp"
#include "perfrank/util.hpp"

namespace perfrank {

namespace {

constexpr std::string_view kOffensiveSystem =
    "You are a helpful assistant. Your task is to provide sound judgement on the nature of the text that will be "
    "provided to you. If you think the text is offensive, please say 'offensive'. If you think the text is not "
    "offensive, please say 'not offensive'. Take into consideration human tone. Here are some examples:";

constexpr std::string_view kSentimentSystem =
    "You are a helpful assistant. Your task is to provide sound judgement on the nature of the text that will be "
    "provided to you. Your task is sentiment analysis. If you think the text is positive, please say 'positive'. "
    "If you think the text is neutral, please say 'neutral'. If you think it is negative, please say 'negative'. "
    "Only say 'positive', 'negative', or 'neutral'. Here are some examples:";

constexpr std::string_view kErrorSystem =
    "You are a helpful assistant. Your task is to check whether our prediction is an error or not based on sound "
    "judgment about the nature of the text. You will check if the predicted label is correct for the given text. "
    "If you think the predicted label is correct, please say 'correct'. If you think the predicted label is wrong, "
    "please say 'error'. Only say 'error' or 'correct'. Please note that the order of the examples does not matter "
    "- the content matters. Here are some examples:";

std::string generic_system(const LabelSchema& schema) {
  std::string s =
      "You are a helpful assistant. Your task is to provide sound judgement on the nature of the text that will be "
      "provided to you.";
  for (const auto& label : schema.labels) {
    s += " If you think the text is " + label + ", please say '" + label + "'.";
  }
  s += " Only say ";
  for (std::size_t i = 0; i < schema.labels.size(); ++i) {
    if (i > 0) s += (i + 1 == schema.labels.size()) ? ", or " : ", ";
    s += "'" + schema.labels[i] + "'";
  }
  s += ". Here are some examples:";
  return s;
}

bool is_label_char(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

// Lowercases ASCII, maps every other non-label byte to a space and collapses
// runs of whitespace.
std::string normalize_reply(std::string_view raw) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (is_label_char(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

bool contains_word_sequence(std::string_view haystack, std::string_view needle, std::size_t& position) {
  std::size_t pos = haystack.find(needle);
  while (pos != std::string_view::npos) {
    const bool left_ok = pos == 0 || haystack[pos - 1] == ' ';
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == haystack.size() || haystack[end] == ' ';
    if (left_ok && right_ok) {
      position = pos;
      return true;
    }
    pos = haystack.find(needle, pos + 1);
  }
  return false;
}

}  // namespace

LabelSchema error_label_schema() {
  return LabelSchema::custom({std::string(kCorrectLabel), std::string(kErrorLabel)});
}

PromptTemplate base_prompt_template(const LabelSchema& schema) {
  PromptTemplate t;
  switch (schema.task) {
    case Task::OffensiveLanguage: t.system = kOffensiveSystem; break;
    case Task::Sentiment: t.system = kSentimentSystem; break;
    case Task::Custom: t.system = generic_system(schema); break;
  }
  t.exemplar_user = "Text: {text}";
  t.exemplar_assistant = "Label: {label}";
  t.user = "Text: {text}";
  return t;
}

PromptTemplate error_prompt_template() {
  PromptTemplate t;
  t.system = kErrorSystem;
  t.exemplar_user = "Text: {text} -> Predicted Label: {predicted}";
  t.exemplar_assistant = "Error Label: {label}";
  t.user = "Text: {text} -> Predicted Label: {predicted}";
  return t;
}

std::string fill_slots(std::string_view format, std::span<const std::pair<std::string_view, std::string_view>> slots) {
  std::string out;
  out.reserve(format.size());
  std::size_t i = 0;
  while (i < format.size()) {
    if (format[i] == '{') {
      const auto close = format.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = format.substr(i + 1, close - i - 1);
        auto it = std::find_if(slots.begin(), slots.end(), [&](const auto& s) { return s.first == name; });
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(format[i++]);
  }
  return out;
}

std::vector<ChatMessage> render_base_prompt(const PromptTemplate& tmpl, std::span<const BaseExemplar> exemplars,
                                            std::string_view text) {
  std::vector<ChatMessage> messages;
  messages.push_back({"system", tmpl.system});
  for (const auto& ex : exemplars) {
    const std::pair<std::string_view, std::string_view> slots[] = {{"text", ex.text}, {"label", ex.label}};
    messages.push_back({"user", fill_slots(tmpl.exemplar_user, slots)});
    messages.push_back({"assistant", fill_slots(tmpl.exemplar_assistant, slots)});
  }
  const std::pair<std::string_view, std::string_view> slots[] = {{"text", text}};
  messages.push_back({"user", fill_slots(tmpl.user, slots)});
  return messages;
}

std::vector<ChatMessage> render_error_prompt(const PromptTemplate& tmpl, std::span<const ErrorExemplar> exemplars,
                                             std::string_view text, std::string_view predicted) {
  std::vector<ChatMessage> messages;
  messages.push_back({"system", tmpl.system});
  for (const auto& ex : exemplars) {
    const std::pair<std::string_view, std::string_view> slots[] = {
        {"text", ex.text}, {"predicted", ex.predicted}, {"label", ex.error_label}};
    messages.push_back({"user", fill_slots(tmpl.exemplar_user, slots)});
    messages.push_back({"assistant", fill_slots(tmpl.exemplar_assistant, slots)});
  }
  const std::pair<std::string_view, std::string_view> slots[] = {{"text", text}, {"predicted", predicted}};
  messages.push_back({"user", fill_slots(tmpl.user, slots)});
  return messages;
}

Label parse_llm_label(std::string_view raw, std::span<const Label> labels) {
  std::string reply = normalize_reply(raw);
  for (std::string_view prefix : {"error label ", "label ", "predicted label "}) {
    if (reply.starts_with(prefix)) {
      reply.erase(0, prefix.size());
      break;
    }
  }
  std::vector<std::pair<std::string, const Label*>> candidates;
  for (const auto& label : labels) candidates.emplace_back(normalize_reply(label), &label);
  for (const auto& [norm, label] : candidates) {
    if (reply == norm) return *label;
  }
  // Longest label first; among equal lengths the earliest occurrence wins.
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  const Label* best = nullptr;
  std::size_t best_len = 0;
  std::size_t best_pos = std::string::npos;
  for (const auto& [norm, label] : candidates) {
    if (norm.empty() || norm.size() < best_len) continue;
    std::size_t pos = 0;
    if (contains_word_sequence(reply, norm, pos) && (best == nullptr || pos < best_pos)) {
      best = label;
      best_len = norm.size();
      best_pos = pos;
    }
  }
  if (best == nullptr) throw Error(ErrorKind::Unparseable, "'" + std::string(raw) + "'");
  return *best;
}

std::vector<BaseExemplar> select_base_exemplars(std::span<const Instance> pool, const LabelSchema& schema,
                                                std::size_t k_per_class, std::uint64_t seed) {
  Engine engine(derive_seed(seed, "base-exemplars"));
  std::vector<BaseExemplar> out;
  for (const auto& label : schema.labels) {
    std::vector<const Instance*> cell;
    for (const auto& inst : pool) {
      if (inst.label == label) cell.push_back(&inst);
    }
    std::sort(cell.begin(), cell.end(), [](const Instance* a, const Instance* b) { return a->id < b->id; });
    const std::size_t take = std::min(k_per_class, cell.size());
    for (auto idx : sample_without_replacement(cell.size(), take, engine)) {
      out.push_back({cell[idx]->text, cell[idx]->label});
    }
  }
  shuffle(out, engine);
  return out;
}

std::vector<ErrorExemplar> select_error_exemplars(std::span<const Instance> pool,
                                                  std::span<const Prediction> predictions,
                                                  std::size_t k_per_class, std::uint64_t seed) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.instance_id, &p);
  std::map<std::string, std::vector<ErrorExemplar>> cells;
  std::vector<const Instance*> sorted;
  for (const auto& inst : pool) sorted.push_back(&inst);
  std::sort(sorted.begin(), sorted.end(), [](const Instance* a, const Instance* b) { return a->id < b->id; });
  for (const auto* inst : sorted) {
    auto it = by_id.find(inst->id);
    if (it == by_id.end()) throw Error(ErrorKind::MissingPrediction, inst->id);
    const bool wrong = it->second->predicted != inst->label;
    cells[std::string(wrong ? kErrorLabel : kCorrectLabel)].push_back(
        {inst->text, it->second->predicted, std::string(wrong ? kErrorLabel : kCorrectLabel)});
  }
  Engine engine(derive_seed(seed, "error-exemplars"));
  std::vector<ErrorExemplar> out;
  for (std::string_view label : {kCorrectLabel, kErrorLabel}) {
    auto& cell = cells[std::string(label)];
    const std::size_t take = std::min(k_per_class, cell.size());
    for (auto idx : sample_without_replacement(cell.size(), take, engine)) out.push_back(cell[idx]);
  }
  shuffle(out, engine);
  return out;
}

}  // namespace perfrank
