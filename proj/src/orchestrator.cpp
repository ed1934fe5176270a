#include "pgki/orchestrator.hpp"

#include <atomic>
#include <cctype>
#include <charconv>
#include <thread>

#include <json.hpp>

#include "pgki/error.hpp"

namespace pgki {

void BackendConfig::validate() const {
  if (max_in_flight < 1) throw Error(Errc::InvalidConfig, "max_in_flight must be >= 1");
  if (timeout.count() <= 0) throw Error(Errc::InvalidConfig, "timeout must be positive");
  if (kind == BackendKind::Http && endpoint.empty()) {
    throw Error(Errc::InvalidConfig, "http backend needs an endpoint");
  }
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "mock") return BackendKind::Mock;
  if (text == "http") return BackendKind::Http;
  throw Error(Errc::InvalidConfig, "backend must be mock or http");
}

std::optional<double> extract_injected_probability(std::string_view prompt_text) {
  const std::size_t at = prompt_text.find(kPromptPrefix);
  if (at == std::string_view::npos) return std::nullopt;
  const std::string_view tail = prompt_text.substr(at + kPromptPrefix.size());
  // d.ddd followed by the closing period
  if (tail.size() < 6 || tail[1] != '.' || tail[5] != '.') return std::nullopt;
  for (std::size_t k : {0, 2, 3, 4}) {
    if (!std::isdigit(static_cast<unsigned char>(tail[k]))) return std::nullopt;
  }
  double value = 0.0;
  const auto res = std::from_chars(tail.data(), tail.data() + 5, value);
  if (res.ec != std::errc() || res.ptr != tail.data() + 5 || value > 1.0) return std::nullopt;
  return value;
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
  const auto p = extract_injected_probability(request.prompt_text);
  const bool fake = p && *p >= 0.5;
  ChatResponse response;
  response.image_ref = request.image_ref;
  response.text = std::string(fake ? kFakeAnswer : kRealAnswer);
  response.backend_id = id();
  return response;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::Http) return std::make_unique<HttpBackend>(config);
  return std::make_unique<MockBackend>();
}

std::string build_prompt(double probability_fake, const InferenceOptions& options) {
  if (!options.inject) return options.question;
  const std::string clause = render_prompt(probability_fake).rendered;
  return options.placement == Placement::Prepend ? clause + "\n" + options.question
                                                 : options.question + "\n" + clause;
}

InferenceRun run_inference(const DatasetManifest& manifest, const FeatureMatrix& features,
                           const HeadParams& head, ChatBackend& backend,
                           const InferenceOptions& options) {
  if (options.max_in_flight < 1) {
    throw Error(Errc::InvalidConfig, "max_in_flight must be >= 1");
  }
  const auto test = select_split(join(features, manifest), Split::Test);
  const auto predictions = predict_batch(test, head, options.l2_normalize);

  InferenceRun run;
  run.records.resize(test.size());
  for (std::size_t k = 0; k < test.size(); ++k) {
    auto& rec = run.records[k];
    rec.image_id = predictions[k].image_id;
    rec.probability_fake = predictions[k].probability_fake;
    rec.prompt = build_prompt(rec.probability_fake, options);
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < run.records.size(); k = next++) {
      auto& rec = run.records[k];
      try {
        const auto reply = backend.complete({rec.image_id, rec.prompt, options.generation});
        rec.response = reply.text;
        rec.retries = reply.retries;
      } catch (const Error& e) {
        rec.error = std::string(to_string(e.code())) + ": " + e.what();
      } catch (const std::exception& e) {
        rec.error = std::string("TransportError: ") + e.what();
      }
    }
  };
  const std::size_t workers = std::min(options.max_in_flight, run.records.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  run.summary.total = run.records.size();
  for (const auto& rec : run.records) {
    if (rec.error) ++run.summary.failures;
  }
  return run;
}

std::string dump_inference(const InferenceRun& run) {
  std::string out;
  for (const auto& rec : run.records) {
    nlohmann::ordered_json line;
    line["image_id"] = rec.image_id;
    if (rec.error) {
      line["error"] = *rec.error;
    } else {
      line["probability_fake"] = rec.probability_fake;
      line["prompt"] = rec.prompt;
      line["response"] = rec.response.value_or("");
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace pgki
