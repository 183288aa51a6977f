#include "layoutrev/session_store.hpp"

#include <sqlite3.h>

namespace layoutrev {

namespace {

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw StoreError(std::string("sqlite prepare: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(stmt_, i, v));
    return *this;
  }

  // True while a row is available.
  bool step() {
    int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw StoreError(std::string("sqlite step: ") + sqlite3_errmsg(db_));
  }

  std::string text(int col) const {
    const auto* p = reinterpret_cast<const char*>(sqlite3_column_text(stmt_, col));
    return p == nullptr ? std::string() : std::string(p, sqlite3_column_bytes(stmt_, col));
  }
  std::int64_t int64(int col) const { return sqlite3_column_int64(stmt_, col); }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) throw StoreError(std::string("sqlite bind: ") + sqlite3_errmsg(db_));
  }

  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

}  // namespace

SessionStore::SessionStore(const std::filesystem::path& db_path, Clock clock)
    : clock_(clock ? std::move(clock) : Clock(system_now)) {
  const std::string path = db_path.string();
  if (path != ":memory:" && db_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(db_path.parent_path(), ec);
    if (ec) throw StoreError("cannot create " + db_path.parent_path().string() + ": " + ec.message());
  }
  int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
  if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
    std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw StoreError("cannot open session store " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec(
      "CREATE TABLE IF NOT EXISTS sessions ("
      " token TEXT PRIMARY KEY, json TEXT NOT NULL,"
      " created INTEGER NOT NULL, updated INTEGER NOT NULL)");
  exec("CREATE TABLE IF NOT EXISTS layouts (id TEXT PRIMARY KEY, code TEXT NOT NULL)");
}

SessionStore::~SessionStore() { sqlite3_close(db_); }

void SessionStore::exec(const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw StoreError("sqlite: " + msg);
  }
}

void SessionStore::put(const std::string& token, const std::string& json) {
  std::lock_guard lock(mu_);
  const std::int64_t t = clock_();
  Statement(db_,
            "INSERT INTO sessions(token, json, created, updated) VALUES(?1, ?2, ?3, ?3) "
            "ON CONFLICT(token) DO UPDATE SET json = excluded.json, updated = excluded.updated")
      .bind(1, token)
      .bind(2, json)
      .bind(3, t)
      .step();
}

std::optional<StoredSession> SessionStore::get(const std::string& token) const {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT json, created, updated FROM sessions WHERE token = ?1");
  st.bind(1, token);
  if (!st.step()) return std::nullopt;
  return StoredSession{st.text(0), st.int64(1), st.int64(2)};
}

bool SessionStore::erase(const std::string& token) {
  std::lock_guard lock(mu_);
  Statement(db_, "DELETE FROM sessions WHERE token = ?1").bind(1, token).step();
  return sqlite3_changes(db_) > 0;
}

std::size_t SessionStore::purge_idle(std::chrono::seconds ttl) {
  std::lock_guard lock(mu_);
  Statement(db_, "DELETE FROM sessions WHERE updated < ?1").bind(1, clock_() - ttl.count()).step();
  return static_cast<std::size_t>(sqlite3_changes(db_));
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT COUNT(*) FROM sessions");
  st.step();
  return static_cast<std::size_t>(st.int64(0));
}

void SessionStore::put_layout(const std::string& id, const std::string& code) {
  std::lock_guard lock(mu_);
  Statement(db_, "INSERT OR IGNORE INTO layouts(id, code) VALUES(?1, ?2)")
      .bind(1, id)
      .bind(2, code)
      .step();
}

std::optional<std::string> SessionStore::get_layout(const std::string& id) const {
  std::lock_guard lock(mu_);
  Statement st(db_, "SELECT code FROM layouts WHERE id = ?1");
  st.bind(1, id);
  if (!st.step()) return std::nullopt;
  return st.text(0);
}

}  // namespace layoutrev
