#include "layoutrev/backend.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "layoutrev/hash.hpp"

namespace layoutrev {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

// Splits "scheme://host[:port]/path" into the client base and the request path.
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(BackendError::Kind::kConfig, "remote url '" + url + "' has no scheme");
  }
  std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw BackendError(BackendError::Kind::kConfig, "remote url scheme must be http or https");
  }
  auto path_start = url.find('/', scheme_end + 3);
  std::string base = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (base.size() <= scheme_end + 3) {
    throw BackendError(BackendError::Kind::kConfig, "remote url '" + url + "' has no host");
  }
  return {base, path};
}

bool retryable(int status) { return status == 429 || status >= 500; }

std::string refusal_message(const std::string& body) {
  auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_object() && j.contains("error") && j["error"].is_string()) {
    return j["error"].get<std::string>();
  }
  return body;
}

struct SemaphoreGuard {
  std::counting_semaphore<>& sem;
  explicit SemaphoreGuard(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
};

}  // namespace

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig cfg;
  cfg.url = env_or_empty("LAYOUTREV_REMOTE_URL");
  if (cfg.url.empty()) {
    throw BackendError(BackendError::Kind::kConfig, "LAYOUTREV_REMOTE_URL is not set");
  }
  cfg.token = env_or_empty("LAYOUTREV_REMOTE_TOKEN");
  std::string timeout = env_or_empty("LAYOUTREV_REMOTE_TIMEOUT_MS");
  if (!timeout.empty()) {
    char* end = nullptr;
    long ms = std::strtol(timeout.c_str(), &end, 10);
    if (end == timeout.c_str() || *end != '\0' || ms <= 0) {
      throw BackendError(BackendError::Kind::kConfig,
                         "LAYOUTREV_REMOTE_TIMEOUT_MS must be a positive integer");
    }
    cfg.read_timeout = std::chrono::milliseconds(ms);
  }
  cfg.check();
  return cfg;
}

void RemoteConfig::check() const {
  split_url(url);
  for (unsigned char c : token) {
    if (c <= 0x20 || c == 0x7f) {
      throw BackendError(BackendError::Kind::kConfig,
                         "remote token contains whitespace or control characters");
    }
  }
  if (max_attempts < 1) throw BackendError(BackendError::Kind::kConfig, "max_attempts must be >= 1");
  if (max_in_flight < 1) {
    throw BackendError(BackendError::Kind::kConfig, "max_in_flight must be >= 1");
  }
}

RemoteReviser::RemoteReviser(RemoteConfig cfg, ClassConfig classes)
    : cfg_((cfg.check(), std::move(cfg))),
      classes_(std::move(classes)),
      in_flight_(cfg_.max_in_flight) {
  std::tie(scheme_host_port_, path_) = split_url(cfg_.url);
}

std::string RemoteReviser::request_body(const PromptBundle& bundle) const {
  auto j = nlohmann::ordered_json::parse(bundle_to_json(bundle));
  j["images"] = nlohmann::ordered_json::array();
  if (cfg_.send_images) {
    for (const PromptPart& p : bundle.parts) {
      if (p.kind != PartKind::kImageRef) continue;
      auto it = bundle.images.find(p.payload);
      if (it == bundle.images.end()) {
        throw std::invalid_argument("no layout behind image '" + p.payload + "'");
      }
      std::string png = encode_png(render(it->second, classes_.legend, 1, RenderMode::kClip));
      j["images"].push_back({{"id", p.payload}, {"png_base64", base64_encode(png)}});
    }
  }
  return j.dump();
}

GenerationResult RemoteReviser::revise(const PromptBundle& bundle) const {
  const std::string body = request_body(bundle);
  SemaphoreGuard guard(in_flight_);
  auto start = std::chrono::steady_clock::now();

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(cfg_.connect_timeout);
  client.set_read_timeout(cfg_.read_timeout);
  client.set_write_timeout(cfg_.read_timeout);
  httplib::Headers headers;
  if (!cfg_.token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.token);

  std::string last_failure;
  auto backoff = cfg_.initial_backoff;
  for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable(res->status)) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw BackendError(BackendError::Kind::kRefusal, refusal_message(res->body), res->status);
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      throw BackendError(BackendError::Kind::kRefusal, j["error"].get<std::string>(), res->status);
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw BackendError(BackendError::Kind::kBadResponse,
                         "remote response has no \"text\" field", res->status);
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - start);
    return finish_generation(j["text"].get<std::string>(), bundle.decoding, classes_.registry,
                             name(), elapsed);
  }
  throw BackendError(BackendError::Kind::kNetwork,
                     "remote backend failed after " + std::to_string(cfg_.max_attempts) +
                         " attempts: " + last_failure);
}

}  // namespace layoutrev
