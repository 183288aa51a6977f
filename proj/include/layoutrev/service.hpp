#pragma once

// JSON-over-HTTP service for interactive revision sessions. See
// docs/openapi.yaml for the wire contract.

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

#include "layoutrev/backend.hpp"
#include "layoutrev/orchestrator.hpp"
#include "layoutrev/render.hpp"

namespace layoutrev {

using BackendRegistry = std::map<std::string, std::shared_ptr<const ReviserBackend>, std::less<>>;

/// heuristic and echo always; remote when LAYOUTREV_REMOTE_URL is set.
BackendRegistry default_backends(std::uint64_t seed = 0);

struct ServiceConfig {
  std::filesystem::path data_dir = "data";      // holds sessions.db
  std::filesystem::path corpus_dir = "corpora";  // <name>.jsonl for /metrics/fid
  std::chrono::seconds session_ttl{24 * 3600};
  ClassConfig classes = default_class_config();
  ChainConfig chain_defaults;
  EvalConfig eval;
  std::string default_backend = "heuristic";

  /// LAYOUTREV_DATA_DIR, LAYOUTREV_CORPUS_DIR, LAYOUTREV_SESSION_TTL (seconds).
  static ServiceConfig from_env();
};

class Service {
 public:
  Service(ServiceConfig cfg, BackendRegistry backends);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Port 0 picks a free port. Returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace layoutrev
