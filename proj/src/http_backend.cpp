#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pgki/error.hpp"
#include "pgki/orchestrator.hpp"

namespace pgki {
namespace {

double jitter_draw() {
  thread_local std::mt19937_64 rng(std::random_device{}());
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

struct Attempt {
  std::optional<std::string> text;
  std::optional<Error> error;
  bool retryable = false;
};

}  // namespace

std::string chat_request_body(const ChatRequest& request, std::string_view model) {
  using nlohmann::ordered_json;
  ordered_json content = ordered_json::array();
  content.push_back({{"type", "image_url"}, {"image_url", {{"url", request.image_ref}}}});
  content.push_back({{"type", "text"}, {"text", request.prompt_text}});
  ordered_json body;
  body["model"] = model;
  body["messages"] = ordered_json::array({{{"role", "user"}, {"content", content}}});
  body["max_tokens"] = request.generation.max_tokens;
  body["temperature"] = request.generation.temperature;
  return body.dump();
}

std::string parse_chat_completion(std::string_view body) {
  const auto doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::MalformedResponse, "response is not JSON");
  try {
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string() || content.get_ref<const std::string&>().empty()) {
      throw Error(Errc::MalformedResponse, "choices[0].message.content is empty");
    }
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedResponse, std::string("unexpected response shape: ") + e.what());
  }
}

std::chrono::milliseconds backoff_delay(std::size_t retry, const BackendConfig& config,
                                        double jitter_unit) {
  const double base = static_cast<double>(config.backoff_base.count());
  const double scaled = base * std::pow(config.backoff_factor, static_cast<double>(retry));
  const double jitter = 1.0 - 0.25 * jitter_unit;
  return std::chrono::milliseconds(static_cast<long long>(scaled * jitter));
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::string& url = config_.endpoint;
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw Error(Errc::InvalidConfig, "endpoint must be an http:// URL: " + url);
  }
  const std::size_t slash = url.find('/', scheme.size());
  base_url_ = slash == std::string::npos ? url : url.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  const std::string body = chat_request_body(request, config_.model_name);
  httplib::Headers headers;
  if (const char* token = std::getenv(config_.auth_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
  const auto started = std::chrono::steady_clock::now();

  const auto attempt_once = [&]() -> Attempt {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out =
          err == httplib::Error::ConnectionTimeout ||
          ((err == httplib::Error::Read || err == httplib::Error::Write) &&
           std::chrono::steady_clock::now() - t0 >= config_.timeout * 9 / 10);
      return {std::nullopt,
              Error(timed_out ? Errc::Timeout : Errc::TransportError,
                    "request to " + base_url_ + path_ + " failed: " + httplib::to_string(err)),
              true};
    }
    if (res->status == 429) {
      return {std::nullopt, Error(Errc::RateLimited, "backend returned 429"), true};
    }
    if (res->status >= 500) {
      return {std::nullopt,
              Error(Errc::TransportError, "backend returned " + std::to_string(res->status)),
              true};
    }
    if (res->status != 200) {
      return {std::nullopt,
              Error(Errc::TransportError, "backend returned " + std::to_string(res->status)),
              false};
    }
    try {
      return {parse_chat_completion(res->body), std::nullopt, false};
    } catch (const Error& e) {
      return {std::nullopt, e, false};
    }
  };

  for (std::size_t retry = 0;; ++retry) {
    Attempt attempt = attempt_once();
    if (attempt.text) {
      ChatResponse response;
      response.image_ref = request.image_ref;
      response.text = std::move(*attempt.text);
      response.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      response.backend_id = id();
      response.retries = retry;
      return response;
    }
    if (!attempt.retryable || retry >= config_.retries) throw *attempt.error;
    std::this_thread::sleep_for(backoff_delay(retry, config_, jitter_draw()));
  }
}

}  // namespace pgki
