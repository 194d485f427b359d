#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/error.hpp"

namespace multisql {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfigInvalid, "endpoint url needs a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// POSTs `body` and returns the parsed JSON reply. Transport failures, 429
// and 5xx are retried with exponential backoff; other statuses fail fast.
json post_json(const HttpEndpoint& endpoint, const json& body) {
  const SplitUrl url = split_url(endpoint.url);
  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    if (const char* key = std::getenv(endpoint.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  std::string last_error;
  auto delay = endpoint.backoff;
  for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(url.origin);
    client.set_connection_timeout(seconds.count(), 0);
    client.set_read_timeout(seconds.count(), 0);
    client.set_write_timeout(seconds.count(), 0);
    auto result = client.Post(url.path, headers, body.dump(), "application/json");
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw Error(ErrorCode::kBackendFailure,
                  "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 500));
    }
    try {
      return json::parse(result->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kBackendFailure, std::string("malformed provider reply: ") + e.what());
    }
  }
  throw Error(ErrorCode::kProviderExhausted,
              endpoint.url + " failed after " + std::to_string(endpoint.retries + 1) +
                  " attempts: " + last_error);
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpChatBackend::chat(const ChatRequest& request) {
  request.validate();
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", speaker_name(m.speaker)}, {"content", m.text}});
  }
  json body = {{"model", endpoint_.model},
               {"messages", std::move(messages)},
               {"temperature", request.temperature},
               {"max_tokens", request.max_tokens}};
  json reply = post_json(endpoint_, body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendFailure, std::string("unexpected chat reply shape: ") + e.what());
  }
}

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dimension)
    : endpoint_(std::move(endpoint)), dimension_(dimension) {}

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
  validate_inputs(texts);
  json reply = post_json(endpoint_, {{"model", endpoint_.model}, {"input", texts}});
  std::vector<EmbeddingVector> out;
  try {
    const auto& data = reply.at("data");
    if (data.size() != texts.size()) {
      throw Error(ErrorCode::kBackendFailure, "embedding count does not match input count");
    }
    for (const auto& item : data) {
      out.emplace_back(item.at("embedding").get<std::vector<double>>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendFailure, std::string("unexpected embedding reply shape: ") + e.what());
  }
  check_dimensions(out);
  return out;
}

}  // namespace multisql
