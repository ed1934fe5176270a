#include "pgki/prompt_injection.hpp"

#include <charconv>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "pgki/error.hpp"

namespace pgki {
namespace {

std::optional<Label> optional_label(const nlohmann::json& record, const std::string& where) {
  auto it = record.find("label");
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::MalformedRecord, where + "label must be a string");
  return parse_label(it->get_ref<const std::string&>());
}

void check_sample(const ConversationSample& s, const std::string& where) {
  if (s.image_id.empty() || s.user_text.empty()) {
    throw Error(Errc::MalformedRecord, where + "image_id and user text must be non-empty");
  }
}

}  // namespace

std::string format_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(Errc::OutOfRange, "probability must lie in [0, 1]");
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, p, std::chars_format::fixed);
  std::string digits(buf, res.ptr);  // "d" or "d.ddd..."
  std::string whole = digits.substr(0, digits.find('.'));
  std::string frac = digits.find('.') == std::string::npos
                         ? std::string()
                         : digits.substr(digits.find('.') + 1);
  frac.resize(std::max<std::size_t>(frac.size(), 3), '0');

  std::string kept = whole + frac.substr(0, 3);
  const std::string rest = frac.substr(3);
  bool round_up = false;
  if (!rest.empty() && rest[0] > '5') {
    round_up = true;
  } else if (!rest.empty() && rest[0] == '5') {
    const bool exact_half = rest.find_first_not_of('0', 1) == std::string::npos;
    round_up = !exact_half || ((kept.back() - '0') % 2 == 1);
  }
  if (round_up) {
    std::size_t k = kept.size();
    while (k > 0) {
      --k;
      if (kept[k] == '9') {
        kept[k] = '0';
      } else {
        ++kept[k];
        break;
      }
    }
  }
  return kept.substr(0, kept.size() - 3) + "." + kept.substr(kept.size() - 3);
}

InjectedPrompt render_prompt(double p) {
  std::string rendered(kPromptPrefix);
  rendered += format_probability(p);
  rendered += '.';
  return {p, std::move(rendered)};
}

std::vector<ConversationSample> augment_dataset(std::span<const ConversationSample> samples,
                                                std::span<const HeadPrediction> predictions,
                                                Placement placement) {
  std::unordered_map<std::string_view, double> by_id;
  by_id.reserve(predictions.size());
  for (const auto& pred : predictions) {
    if (!by_id.emplace(pred.image_id, pred.probability_fake).second) {
      throw Error(Errc::DuplicatePrediction,
                  "more than one prediction for image '" + pred.image_id + "'");
    }
  }
  std::vector<ConversationSample> out;
  out.reserve(samples.size());
  for (const auto& sample : samples) {
    auto it = by_id.find(sample.image_id);
    if (it == by_id.end()) {
      throw Error(Errc::MissingPrediction, "no prediction for image '" + sample.image_id + "'");
    }
    const std::string prompt = render_prompt(it->second).rendered;
    ConversationSample augmented = sample;
    augmented.user_text = placement == Placement::Prepend
                              ? prompt + "\n" + sample.user_text
                              : sample.user_text + "\n" + prompt;
    out.push_back(std::move(augmented));
  }
  return out;
}

std::vector<ConversationSample> parse_conversations(std::string_view ndjson) {
  std::vector<ConversationSample> samples;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    std::string_view line = ndjson.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const std::string where = "dataset line " + std::to_string(line_no) + ": ";
    const auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw Error(Errc::MalformedRecord, where + "not a JSON object");
    }
    ConversationSample sample;
    try {
      sample.image_id = record.at("image_id").get<std::string>();
      sample.user_text = record.at("user").get<std::string>();
      sample.assistant_text = record.value("assistant", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::MalformedRecord, where + e.what());
    }
    sample.label = optional_label(record, where);
    check_sample(sample, where);
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::string dump_conversations(std::span<const ConversationSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    nlohmann::ordered_json record;
    record["image_id"] = s.image_id;
    record["user"] = s.user_text;
    record["assistant"] = s.assistant_text;
    record["label"] = s.label ? nlohmann::ordered_json(to_string(*s.label))
                              : nlohmann::ordered_json(nullptr);
    out += record.dump();
    out += '\n';
  }
  return out;
}

std::vector<ConversationSample> parse_llava_conversations(std::string_view json_text) {
  const auto doc = nlohmann::json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw Error(Errc::MalformedRecord, "LLaVA dataset must be a JSON array");
  }
  std::vector<ConversationSample> samples;
  samples.reserve(doc.size());
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const auto& item = doc[k];
    const std::string where = "LLaVA item " + std::to_string(k) + ": ";
    if (!item.is_object()) throw Error(Errc::MalformedRecord, where + "not an object");
    ConversationSample sample;
    if (auto id = item.find("id"); id != item.end() && id->is_string()) {
      sample.image_id = id->get<std::string>();
    } else if (auto image = item.find("image"); image != item.end() && image->is_string()) {
      sample.image_id = image->get<std::string>();
    }
    auto turns = item.find("conversations");
    if (turns == item.end() || !turns->is_array()) {
      throw Error(Errc::MalformedRecord, where + "missing conversations array");
    }
    bool have_human = false, have_gpt = false;
    for (const auto& turn : *turns) {
      const std::string from = turn.value("from", std::string());
      if (!have_human && from == "human") {
        sample.user_text = turn.value("value", std::string());
        have_human = true;
      } else if (have_human && from == "gpt") {
        sample.assistant_text = turn.value("value", std::string());
        have_gpt = true;
        break;
      }
    }
    if (!have_human || !have_gpt) {
      throw Error(Errc::MalformedRecord, where + "no human/gpt exchange");
    }
    sample.label = optional_label(item, where);
    check_sample(sample, where);
    samples.push_back(std::move(sample));
  }
  return samples;
}

Placement parse_placement(std::string_view text) {
  if (text == "prepend") return Placement::Prepend;
  if (text == "append") return Placement::Append;
  throw Error(Errc::InvalidConfig, "placement must be prepend or append");
}

}  // namespace pgki
