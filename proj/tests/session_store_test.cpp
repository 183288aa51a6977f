#include "layoutrev/session_store.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

namespace layoutrev {
namespace {

namespace fs = std::filesystem;

struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> t = std::make_shared<std::atomic<std::int64_t>>(1000);
  SessionStore::Clock fn() const {
    return [t = t] { return t->load(); };
  }
};

TEST(SessionStore, PutGetKeepsCreated) {
  FakeClock clock;
  SessionStore store(":memory:", clock.fn());
  EXPECT_FALSE(store.get("a"));
  store.put("a", R"({"v":1})");
  *clock.t = 1500;
  store.put("a", R"({"v":2})");
  auto s = store.get("a");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->json, R"({"v":2})");
  EXPECT_EQ(s->created, 1000);
  EXPECT_EQ(s->updated, 1500);
  EXPECT_EQ(store.size(), 1u);
  EXPECT_TRUE(store.erase("a"));
  EXPECT_FALSE(store.erase("a"));
  EXPECT_EQ(store.size(), 0u);
}

TEST(SessionStore, PurgeIdle) {
  FakeClock clock;
  SessionStore store(":memory:", clock.fn());
  store.put("old", "{}");
  *clock.t = 2000;
  store.put("new", "{}");
  *clock.t = 2500;
  EXPECT_EQ(store.purge_idle(std::chrono::seconds(1000)), 1u);
  EXPECT_FALSE(store.get("old"));
  EXPECT_TRUE(store.get("new"));
}

TEST(SessionStore, LayoutsInsertOnce) {
  SessionStore store(":memory:");
  store.put_layout("abc", "CANVAS 1 1\n");
  store.put_layout("abc", "CANVAS 2 2\n");
  EXPECT_EQ(store.get_layout("abc"), "CANVAS 1 1\n");
  EXPECT_FALSE(store.get_layout("zzz"));
}

TEST(SessionStore, PersistsAcrossReopen) {
  fs::path dir = fs::temp_directory_path() / "layoutrev_store_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    SessionStore store(dir / "s.db");
    store.put("tok", "{\"x\":\"\\u00e9 quote ' and \\\"\"}");
    store.put_layout("id", "CANVAS 3 3\n");
  }
  {
    SessionStore store(dir / "s.db");
    EXPECT_EQ(store.get("tok")->json, "{\"x\":\"\\u00e9 quote ' and \\\"\"}");
    EXPECT_EQ(store.get_layout("id"), "CANVAS 3 3\n");
  }
  fs::remove_all(dir);
}

TEST(SessionStore, BadPathThrows) {
  fs::path file = fs::temp_directory_path() / "layoutrev_store_not_a_dir";
  std::ofstream(file) << "x";
  EXPECT_THROW(SessionStore(file / "s.db"), StoreError);
  fs::remove(file);
}

TEST(SessionStore, ConcurrentWriters) {
  SessionStore store(":memory:");
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 100; ++i) {
        store.put(std::to_string(t) + "-" + std::to_string(i), "{}");
        store.get(std::to_string(t) + "-" + std::to_string(i / 2));
      }
    });
  }
  threads.clear();
  EXPECT_EQ(store.size(), 400u);
}

}  // namespace
}  // namespace layoutrev
