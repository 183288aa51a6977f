#pragma once

// SQLite-backed key-value store for service sessions and the layouts behind
// render ids. One connection, serialized internally.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

struct sqlite3;

namespace layoutrev {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StoredSession {
  std::string json;
  std::int64_t created = 0;  // unix seconds
  std::int64_t updated = 0;
};

class SessionStore {
 public:
  using Clock = std::function<std::int64_t()>;

  /// ":memory:" opens a private in-memory database.
  explicit SessionStore(const std::filesystem::path& db_path, Clock clock = {});
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Inserts or replaces; `created` is kept on replace.
  void put(const std::string& token, const std::string& json);
  std::optional<StoredSession> get(const std::string& token) const;
  bool erase(const std::string& token);
  /// Removes sessions not updated within `ttl`; returns how many.
  std::size_t purge_idle(std::chrono::seconds ttl);
  std::size_t size() const;

  void put_layout(const std::string& id, const std::string& code);
  std::optional<std::string> get_layout(const std::string& id) const;

  std::int64_t now() const { return clock_(); }

 private:
  void exec(const char* sql);

  sqlite3* db_ = nullptr;
  Clock clock_;
  mutable std::mutex mu_;
};

}  // namespace layoutrev
