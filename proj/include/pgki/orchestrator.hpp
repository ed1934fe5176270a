#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pgki/feature_store.hpp"
#include "pgki/linear_head.hpp"
#include "pgki/prompt_injection.hpp"

namespace pgki {

inline constexpr std::string_view kDefaultQuestion =
    "Is this image real or fake? Explain the artifacts that support your answer.";

struct GenerationConfig {
  std::size_t max_tokens = 512;
  double temperature = 0.0;
};

struct ChatRequest {
  std::string image_ref;
  std::string prompt_text;
  GenerationConfig generation;
};

struct ChatResponse {
  std::string image_ref;
  std::string text;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
  std::size_t retries = 0;
};

enum class BackendKind { Mock, Http };

struct BackendConfig {
  BackendKind kind = BackendKind::Mock;
  std::string endpoint;  // http://host[:port]/path
  std::string model_name = "df-llava";
  std::chrono::milliseconds timeout{60000};
  std::size_t max_in_flight = 4;
  std::size_t retries = 3;
  std::chrono::milliseconds backoff_base{500};
  double backoff_factor = 2.0;
  /// Environment variable holding a bearer token; unset or empty sends none.
  std::string auth_env = "PGKI_API_KEY";

  void validate() const;
};

BackendKind parse_backend_kind(std::string_view text);

/// Parses the first injected clause "...is fake is d.ddd." and returns its
/// value; nullopt if absent, malformed or above 1.
std::optional<double> extract_injected_probability(std::string_view prompt_text);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  /// Must be safe to call concurrently. Throws pgki::Error on failure.
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

/// Stands in for the fine-tuned model: answers Fake iff the injected
/// probability is >= 0.5, and Real when nothing is injected.
class MockBackend final : public ChatBackend {
 public:
  static constexpr std::string_view kFakeAnswer =
      "This image is fake. The skin and background textures are overly smooth, the "
      "lighting direction is inconsistent between the subject and the scene, and fine "
      "structures such as fingers and text are distorted.";
  static constexpr std::string_view kRealAnswer =
      "This image is real. Lighting, shadows and reflections are physically consistent, "
      "textures carry natural sensor noise, and fine structures are intact.";

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "mock"; }
};

/// Serializes the chat-completion request body:
/// {model, messages:[{role:"user", content:[image_url part, text part]}],
///  max_tokens, temperature}
std::string chat_request_body(const ChatRequest& request, std::string_view model);

/// Reads choices[0].message.content; throws MalformedResponse.
std::string parse_chat_completion(std::string_view body);

/// Delay before retry number `retry` (0-based): base * factor^retry scaled by
/// a jitter multiplier in (0.75, 1]. `jitter_unit` is a uniform draw in [0, 1).
std::chrono::milliseconds backoff_delay(std::size_t retry, const BackendConfig& config,
                                        double jitter_unit);

class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(BackendConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string id() const override { return "http:" + config_.model_name; }

 private:
  BackendConfig config_;
  std::string base_url_;
  std::string path_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config);

struct InferenceOptions {
  bool inject = true;
  Placement placement = Placement::Prepend;
  std::string question{kDefaultQuestion};
  GenerationConfig generation;
  std::size_t max_in_flight = 4;
  bool l2_normalize = false;
};

struct InferenceRecord {
  std::string image_id;
  double probability_fake = 0.0;
  std::string prompt;
  std::optional<std::string> response;
  std::optional<std::string> error;  // "<ErrorCode>: message"
  std::size_t retries = 0;
};

struct InferenceSummary {
  std::size_t total = 0;
  std::size_t failures = 0;
};

struct InferenceRun {
  std::vector<InferenceRecord> records;  // manifest order
  InferenceSummary summary;
};

/// Builds the prompt for one image: the question alone, or the question
/// joined with the injected clause when `inject` is set.
std::string build_prompt(double probability_fake, const InferenceOptions& options);

/// Runs every test-split record through head -> prompt -> backend with at
/// most max_in_flight concurrent calls. A failed item becomes an error line
/// and never aborts the run.
InferenceRun run_inference(const DatasetManifest& manifest, const FeatureMatrix& features,
                           const HeadParams& head, ChatBackend& backend,
                           const InferenceOptions& options);

/// Success lines: {image_id, probability_fake, prompt, response}.
/// Failure lines: {image_id, error}.
std::string dump_inference(const InferenceRun& run);

}  // namespace pgki
