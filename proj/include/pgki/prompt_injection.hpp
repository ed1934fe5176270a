#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pgki/feature_store.hpp"
#include "pgki/linear_head.hpp"

namespace pgki {

inline constexpr std::string_view kPromptPrefix =
    "From Binary Classifier: The probability that this image is fake is ";

struct ConversationSample {
  std::string image_id;
  std::string user_text;
  std::string assistant_text;
  std::optional<Label> label;
};

struct InjectedPrompt {
  double probability_fake = 0.0;
  std::string rendered;
};

enum class Placement { Prepend, Append };

/// Exactly three fractional digits. The shortest decimal that round-trips
/// `p` is rounded half-to-even, so 0.93375 renders as "0.934".
std::string format_probability(double p);

/// kPromptPrefix + format_probability(p) + "."
InjectedPrompt render_prompt(double p);

/// Joins the rendered prompt and the original user text with a single "\n".
/// Every sample must have exactly one prediction; extra predictions are
/// ignored.
std::vector<ConversationSample> augment_dataset(std::span<const ConversationSample> samples,
                                                std::span<const HeadPrediction> predictions,
                                                Placement placement = Placement::Prepend);

/// Flat NDJSON: {image_id, user, assistant, label?}.
std::vector<ConversationSample> parse_conversations(std::string_view ndjson);
std::string dump_conversations(std::span<const ConversationSample> samples);

/// LLaVA-style JSON array; keeps the first human/gpt exchange per item. The
/// image id is taken from "id", falling back to "image".
std::vector<ConversationSample> parse_llava_conversations(std::string_view json_text);

Placement parse_placement(std::string_view text);

}  // namespace pgki
