#include <chrono>
#include <cstdlib>
#include <memory>
#include <thread>

#ifdef TAPS_HAS_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <json.hpp>

#include "taps/gateway.hpp"
#include "taps/util.hpp"

namespace taps {

namespace detail {
GenerationTrace parse_chat_completion(const std::string& body, bool require_logprobs);
}

namespace {

using nlohmann::json;

struct ParsedEndpoint {
  std::string scheme_host_port;  // https://host:port
  std::string base_path;         // e.g. /v1
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
  std::size_t scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint needs a scheme: " + endpoint);
  std::size_t path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string path = endpoint.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {endpoint.substr(0, path_start), path};
}

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(ModelConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.remote.endpoint.empty()) throw Error("remote backend needs an endpoint");
    if (cfg_.remote.model.empty()) throw Error("remote backend needs a model id");
    endpoint_ = split_endpoint(cfg_.remote.endpoint);
#ifndef TAPS_HAS_OPENSSL
    if (cfg_.remote.endpoint.rfind("https://", 0) == 0) {
      throw Error("built without TLS support; use an http endpoint or rebuild with OpenSSL");
    }
#endif
  }

  std::string id() const override {
    return "remote:" + cfg_.remote.endpoint + ":" + cfg_.remote.model;
  }

  Capabilities capabilities() const override {
    return {cfg_.topk_logprobs > 0, cfg_.generation.candidate_count >= 2};
  }

  GenerationTrace complete(const std::string& prompt) override {
    json body;
    body["model"] = cfg_.remote.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    if (cfg_.topk_logprobs > 0) {
      body["logprobs"] = true;
      body["top_logprobs"] = cfg_.topk_logprobs;
    }
    if (cfg_.generation.candidate_count > 1) body["n"] = cfg_.generation.candidate_count;
    if (cfg_.generation.sample) {
      body["temperature"] = cfg_.generation.temperature;
      body["top_p"] = cfg_.generation.top_p;
      if (cfg_.generation.top_k > 0) body["top_k"] = cfg_.generation.top_k;
    } else {
      body["temperature"] = 0.0;
    }

    std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
      httplib::Client client(endpoint_.scheme_host_port);
      client.set_connection_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
      client.set_read_timeout(std::chrono::milliseconds(cfg_.timeout_ms));
      client.set_write_timeout(std::chrono::milliseconds(cfg_.timeout_ms));

      httplib::Headers headers;
      if (const char* key = std::getenv(cfg_.remote.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }

      auto res = client.Post(endpoint_.base_path + "/chat/completions", headers, payload,
                             "application/json");
      if (res && res->status == 200) {
        return detail::parse_chat_completion(res->body, cfg_.topk_logprobs > 0);
      }
      if (res) {
        last_error = "status " + std::to_string(res->status) + ": " + res->body.substr(0, 300);
        bool retryable = res->status == 429 || res->status >= 500;
        if (!retryable) break;
      } else {
        last_error = "transport error: " + httplib::to_string(res.error());
      }
      if (attempt < cfg_.retry.max_attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.retry.backoff_ms * attempt));
      }
    }
    throw Error("remote completion failed after " + std::to_string(cfg_.retry.max_attempts) +
                " attempts (" + last_error + ")");
  }

 private:
  ModelConfig cfg_;
  ParsedEndpoint endpoint_;
};

}  // namespace

std::unique_ptr<Backend> make_remote_backend(const ModelConfig& cfg) {
  return std::make_unique<RemoteBackend>(cfg);
}

}  // namespace taps
