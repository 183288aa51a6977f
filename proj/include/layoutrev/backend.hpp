#pragma once

// Reviser backends: PromptBundle in, design code out.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/layout.hpp"
#include "layoutrev/prompt.hpp"
#include "layoutrev/render.hpp"

namespace layoutrev {

struct BackendCapabilities {
  bool supports_temperature = false;
  bool supports_images = false;
};

struct GenerationResult {
  std::string code_text;  // after max_tokens truncation
  // Present when code_text parses. Geometry violations are clipped away and
  // listed in `violations`.
  std::optional<LayoutDoc> parsed;
  std::optional<std::string> parse_error;
  std::vector<Violation> violations;
  std::chrono::microseconds latency{0};
  std::string backend;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { kConfig, kNetwork, kRefusal, kBadResponse };

  BackendError(Kind kind, const std::string& message, int status = 0)
      : std::runtime_error(message), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  int status() const { return status_; }  // HTTP status when one was received

 private:
  Kind kind_;
  int status_;
};

class ReviserBackend {
 public:
  virtual ~ReviserBackend() = default;

  virtual std::string_view name() const = 0;
  virtual BackendCapabilities capabilities() const = 0;
  /// Safe to call concurrently. Throws BackendError.
  virtual GenerationResult revise(const PromptBundle& bundle) const = 0;
};

/// Truncates `text` to the decoding budget and parses it leniently.
GenerationResult finish_generation(std::string text, const DecodingParams& decoding,
                                   const ClassRegistry& registry, std::string_view backend,
                                   std::chrono::microseconds latency);

/// Parses the bundle's working layout (last code part) without geometry checks.
LayoutDoc working_layout(const PromptBundle& bundle, const ClassRegistry& registry);

struct HeuristicConfig {
  int grid = 8;
  int tolerance = 8;
  // Fraction of elements jittered per unit of temperature, capped at 1.
  double jitter_per_temperature = 0.1;
  std::uint64_t seed = 0;
  int max_passes = 8;

  void check() const;
};

/// Off-grid x and y coordinates, plus pairs of elements whose x differ by a
/// non-zero amount within tolerance, plus same-class pairs whose widths or
/// heights differ that way.
std::size_t alignment_cost(const LayoutDoc& doc, const HeuristicConfig& cfg = {});

/// Snap, unify sizes, left-align, dedupe, clip; repeated until nothing
/// changes (or max_passes). Temperature adds seeded jitter first.
LayoutDoc heuristic_revise(const LayoutDoc& doc, const HeuristicConfig& cfg = {},
                           double temperature = 0.0);

class HeuristicReviser : public ReviserBackend {
 public:
  explicit HeuristicReviser(HeuristicConfig cfg = {},
                            ClassRegistry registry = ClassRegistry::defaults());

  std::string_view name() const override { return "heuristic"; }
  BackendCapabilities capabilities() const override { return {true, false}; }
  GenerationResult revise(const PromptBundle& bundle) const override;

 private:
  HeuristicConfig cfg_;
  ClassRegistry registry_;
};

class EchoReviser : public ReviserBackend {
 public:
  explicit EchoReviser(ClassRegistry registry = ClassRegistry::defaults());

  std::string_view name() const override { return "echo"; }
  BackendCapabilities capabilities() const override { return {false, false}; }
  GenerationResult revise(const PromptBundle& bundle) const override;

 private:
  ClassRegistry registry_;
};

struct RemoteConfig {
  std::string url;    // http://host[:port][/path]
  std::string token;  // sent as a bearer token when non-empty
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds read_timeout{60000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  int max_in_flight = 4;
  bool send_images = true;

  /// LAYOUTREV_REMOTE_URL (required), LAYOUTREV_REMOTE_TOKEN,
  /// LAYOUTREV_REMOTE_TIMEOUT_MS.
  static RemoteConfig from_env();
  void check() const;
};

/// Request body: {"parts":[...],"decoding":{...},"images":[{"id","png_base64"}]}.
/// Success: {"text": "..."}. Refusals carry {"error": "..."} and are surfaced
/// verbatim. 5xx, 429 and transport errors are retried with doubling backoff.
class RemoteReviser : public ReviserBackend {
 public:
  RemoteReviser(RemoteConfig cfg, ClassConfig classes = default_class_config());

  std::string_view name() const override { return "remote"; }
  BackendCapabilities capabilities() const override { return {true, cfg_.send_images}; }
  GenerationResult revise(const PromptBundle& bundle) const override;

  /// The JSON body revise() would send.
  std::string request_body(const PromptBundle& bundle) const;

 private:
  RemoteConfig cfg_;
  ClassConfig classes_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::counting_semaphore<> in_flight_;
};

/// "heuristic", "echo" or "remote" (configured from the environment).
std::unique_ptr<ReviserBackend> make_backend(std::string_view name, std::uint64_t seed = 0);

}  // namespace layoutrev
