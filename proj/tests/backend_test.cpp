#include "layoutrev/backend.hpp"

// httplib after the project headers: glibc's resolv.h defines a `_res`
// macro that breaks Eigen otherwise.
#include "httplib.h"

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "test_util.hpp"

namespace layoutrev {
namespace {

using testing::element;

LayoutDoc doc_of(std::initializer_list<Element> els, int w = 360, int h = 800) {
  return LayoutDoc{w, h, std::vector<Element>(els)};
}

TEST(Heuristic, SnapTiesGoDown) {
  HeuristicConfig cfg;
  auto x_after = [&](int x) {
    return heuristic_revise(doc_of({element("BUTTON", x, 0, 16, 16)}), cfg).elements[0].x;
  };
  EXPECT_EQ(x_after(10), 8);
  EXPECT_EQ(x_after(12), 8);
  EXPECT_EQ(x_after(13), 16);
  EXPECT_EQ(x_after(4), 0);
  EXPECT_EQ(x_after(5), 8);
}

TEST(Heuristic, UnifiesSameClassSizes) {
  LayoutDoc out = heuristic_revise(doc_of({element("BUTTON", 0, 0, 40, 20), element("BUTTON", 0, 64, 46, 24),
                                           element("CARD", 0, 128, 44, 20)}));
  EXPECT_EQ(out.elements[0].w, 40);
  EXPECT_EQ(out.elements[1].w, 40);
  EXPECT_EQ(out.elements[0].h, 20);
  EXPECT_EQ(out.elements[1].h, 20);
  EXPECT_EQ(out.elements[2].w, 44);  // other class untouched
}

TEST(Heuristic, SingleLinkageChainsToMinimum) {
  LayoutDoc out = heuristic_revise(doc_of({element("TEXT", 16, 0, 8, 8), element("TEXT", 24, 16, 8, 8),
                                           element("TEXT", 32, 32, 8, 8), element("TEXT", 48, 48, 8, 8)}));
  EXPECT_EQ(out.elements[0].x, 16);
  EXPECT_EQ(out.elements[1].x, 16);
  EXPECT_EQ(out.elements[2].x, 16);
  EXPECT_EQ(out.elements[3].x, 48);
}

TEST(Heuristic, DedupesAfterSnapping) {
  LayoutDoc out = heuristic_revise(doc_of({element("CHIP", 7, 9, 32, 16), element("CHIP", 8, 8, 32, 16),
                                           element("CHIP", 8, 40, 32, 16)}));
  ASSERT_EQ(out.elements.size(), 2u);
  EXPECT_EQ(out.elements[0], element("CHIP", 8, 8, 32, 16));
}

TEST(Heuristic, ClipKeepsOriginOnGrid) {
  LayoutDoc out = heuristic_revise(doc_of({element("ICON", 97, 0, 3, 3)}, 100, 100));
  ASSERT_EQ(out.elements.size(), 1u);
  EXPECT_EQ(out.elements[0].x, 96);
  EXPECT_EQ(out.elements[0].w, 3);
  EXPECT_TRUE(validate_layout(out).ok());
}

TEST(Heuristic, FixpointProperties) {
  std::mt19937_64 rng(101);
  HeuristicConfig cfg;
  for (int t = 0; t < 2000; ++t) {
    LayoutDoc doc = testing::random_doc(rng, 16);
    LayoutDoc once = heuristic_revise(doc, cfg);
    ASSERT_TRUE(validate_layout(once).ok());
    EXPECT_EQ(heuristic_revise(once, cfg), once) << serialize_layout_code(doc);
    EXPECT_EQ(alignment_cost(once, cfg), 0u) << serialize_layout_code(doc);
    EXPECT_LE(alignment_cost(once, cfg), alignment_cost(doc, cfg));
    EXPECT_LE(once.elements.size(), doc.elements.size());
  }
}

TEST(Heuristic, AlignmentCostCounts) {
  HeuristicConfig cfg;
  EXPECT_EQ(alignment_cost(doc_of({element("TEXT", 0, 0, 8, 8)}), cfg), 0u);
  EXPECT_EQ(alignment_cost(doc_of({element("TEXT", 1, 3, 8, 8)}), cfg), 2u);
  // x near-miss (0 vs 8) plus same-class width near-miss (8 vs 12).
  EXPECT_EQ(alignment_cost(doc_of({element("TEXT", 0, 0, 8, 8), element("TEXT", 8, 16, 12, 8)}), cfg), 2u);
  EXPECT_EQ(alignment_cost(doc_of({element("TEXT", 0, 0, 8, 8), element("CARD", 16, 16, 12, 8)}), cfg), 0u);
}

TEST(Heuristic, TemperatureJitterIsSeededByContent) {
  std::mt19937_64 rng(7);
  HeuristicConfig cfg;
  cfg.seed = 5;
  HeuristicConfig other = cfg;
  other.seed = 6;
  int differs = 0, seed_differs = 0;
  for (int t = 0; t < 100; ++t) {
    LayoutDoc doc = heuristic_revise(testing::random_doc(rng, 16), cfg);
    if (doc.elements.size() < 4) continue;
    LayoutDoc cold = heuristic_revise(doc, cfg, 0.0);
    LayoutDoc hot = heuristic_revise(doc, cfg, 5.0);
    EXPECT_EQ(hot, heuristic_revise(doc, cfg, 5.0));
    EXPECT_TRUE(validate_layout(hot).ok());
    differs += hot != cold ? 1 : 0;
    seed_differs += hot != heuristic_revise(doc, other, 5.0) ? 1 : 0;
  }
  EXPECT_GT(differs, 50);
  EXPECT_GT(seed_differs, 25);
}

TEST(Heuristic, ConfigChecks) {
  HeuristicConfig cfg;
  cfg.grid = 0;
  EXPECT_THROW(cfg.check(), std::invalid_argument);
  cfg = {};
  cfg.max_passes = 0;
  EXPECT_THROW(HeuristicReviser{cfg}, std::invalid_argument);
}

PromptBundle direct(const char* code, DecodingParams decoding = {}) {
  PromptOptions opts;
  opts.decoding = decoding;
  return build_direct_prompt("task", parse_layout_code(code, ClassRegistry::defaults(), ParseMode::kRaw), opts);
}

TEST(HeuristicReviser, RevisesWorkingLayout) {
  HeuristicReviser backend;
  GenerationResult r = backend.revise(direct("CANVAS 64 64\nBUTTON 3 3 10 10\n"));
  EXPECT_EQ(r.code_text, "CANVAS 64 64\nBUTTON 0 0 10 10\n");
  ASSERT_TRUE(r.parsed);
  EXPECT_EQ(r.backend, "heuristic");
  EXPECT_TRUE(backend.capabilities().supports_temperature);
}

TEST(EchoReviser, ReturnsLastCodeVerbatim) {
  EchoReviser echo;
  std::vector<LayoutDoc> edits = {parse_layout_code("CANVAS 9 9\nTEXT 1 1 2 2\n")};
  PromptBundle b = build_revision_prompt("t", parse_layout_code("CANVAS 9 9\n"), edits);
  GenerationResult r = echo.revise(b);
  EXPECT_EQ(r.code_text, "CANVAS 9 9\nTEXT 1 1 2 2\n");
  EXPECT_EQ(*r.parsed, edits[0]);
  EXPECT_FALSE(echo.capabilities().supports_temperature);
}

TEST(FinishGeneration, TruncatesClipsAndReportsParseErrors) {
  std::string longer = "CANVAS 10 10\n";
  for (int i = 0; i < 200; ++i) longer += "TEXT 0 0 1 1\n";
  GenerationResult r = finish_generation(longer, {400, 0}, ClassRegistry::defaults(), "x", {});
  EXPECT_LE(token_count(r.code_text), 400u);
  EXPECT_EQ(r.parsed->elements.size(), 79u);

  GenerationResult clipped =
      finish_generation("CANVAS 10 10\nTEXT 5 5 10 10\n", {}, ClassRegistry::defaults(), "x", {});
  ASSERT_TRUE(clipped.parsed);
  EXPECT_EQ(clipped.parsed->elements[0].w, 5);
  EXPECT_FALSE(clipped.violations.empty());

  GenerationResult bad = finish_generation("I'd rather not.", {}, ClassRegistry::defaults(), "x", {});
  EXPECT_FALSE(bad.parsed);
  ASSERT_TRUE(bad.parse_error);
  EXPECT_NE(bad.parse_error->find("line 1"), std::string::npos);
}

TEST(Backends, OutputRespectsMaxTokens) {
  std::mt19937_64 rng(9);
  HeuristicReviser heuristic;
  EchoReviser echo;
  for (int t = 0; t < 200; ++t) {
    LayoutDoc doc = testing::random_doc(rng, 40);
    std::size_t max_tokens = 1 + rng() % 120;
    PromptOptions opts;
    opts.decoding = {max_tokens, 0.5};
    PromptBundle b = build_direct_prompt("t", doc, opts);
    for (const ReviserBackend* be : {static_cast<const ReviserBackend*>(&heuristic),
                                     static_cast<const ReviserBackend*>(&echo)}) {
      GenerationResult r = be->revise(b);
      EXPECT_LE(token_count(r.code_text), max_tokens);
      if (max_tokens >= 3) {
        EXPECT_TRUE(r.parsed) << be->name();
      }
    }
  }
}

TEST(MakeBackend, Names) {
  EXPECT_EQ(make_backend("heuristic")->name(), "heuristic");
  EXPECT_EQ(make_backend("echo")->name(), "echo");
  EXPECT_THROW(make_backend("gpt"), std::invalid_argument);
  unsetenv("LAYOUTREV_REMOTE_URL");
  try {
    make_backend("remote");
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kConfig);
  }
}

TEST(RemoteConfig, FromEnvAndChecks) {
  setenv("LAYOUTREV_REMOTE_URL", "https://models.example.com/v1/revise", 1);
  setenv("LAYOUTREV_REMOTE_TOKEN", "abc123", 1);
  setenv("LAYOUTREV_REMOTE_TIMEOUT_MS", "1500", 1);
  RemoteConfig cfg = RemoteConfig::from_env();
  EXPECT_EQ(cfg.url, "https://models.example.com/v1/revise");
  EXPECT_EQ(cfg.token, "abc123");
  EXPECT_EQ(cfg.read_timeout, std::chrono::milliseconds(1500));
  setenv("LAYOUTREV_REMOTE_TIMEOUT_MS", "soon", 1);
  EXPECT_THROW(RemoteConfig::from_env(), BackendError);
  unsetenv("LAYOUTREV_REMOTE_TIMEOUT_MS");
  setenv("LAYOUTREV_REMOTE_TOKEN", "bad token", 1);
  EXPECT_THROW(RemoteConfig::from_env(), BackendError);
  unsetenv("LAYOUTREV_REMOTE_TOKEN");
  unsetenv("LAYOUTREV_REMOTE_URL");

  for (const char* url : {"ftp://x/y", "nohost", "http://"}) {
    RemoteConfig c;
    c.url = url;
    EXPECT_THROW(c.check(), BackendError) << url;
  }
}

// A local stand-in for a hosted model endpoint.
class MockModel : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/fixed", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu_);
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      res.set_content(R"({"text":"CANVAS 40 40\nBUTTON 0 0 8 8\n"})", "application/json");
    });
    server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
      ++calls_;
      res.status = 500;
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      if (++calls_ < 3) {
        res.status = calls_ == 1 ? 503 : 429;
        return;
      }
      res.set_content(R"({"text":"CANVAS 8 8\n"})", "application/json");
    });
    server_.Post("/long", [](const httplib::Request&, httplib::Response& res) {
      std::string text = "CANVAS 400 400\n";
      for (int i = 0; i < 100; ++i) text += "BUTTON 0 0 8 8\n";
      res.set_content(nlohmann::json{{"text", text}}.dump(), "application/json");
    });
    server_.Post("/refuse", [](const httplib::Request&, httplib::Response& res) {
      res.status = 400;
      res.set_content(R"({"error":"I can't help with that layout."})", "application/json");
    });
    server_.Post("/refuse-ok", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"error":"content policy"})", "application/json");
    });
    server_.Post("/plain-403", [](const httplib::Request&, httplib::Response& res) {
      res.status = 403;
      res.set_content("forbidden", "text/plain");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[]})", "application/json");
    });
    server_.Post("/slow", [this](const httplib::Request&, httplib::Response& res) {
      int now = ++active_;
      int seen = max_active_.load();
      while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(60));
      --active_;
      res.set_content(R"({"text":"CANVAS 8 8\n"})", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  RemoteConfig config(const std::string& path) {
    RemoteConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port_) + path;
    cfg.initial_backoff = std::chrono::milliseconds(1);
    cfg.read_timeout = std::chrono::milliseconds(5000);
    return cfg;
  }

  static BackendError error_from(const RemoteReviser& r, const PromptBundle& b) {
    try {
      r.revise(b);
    } catch (const BackendError& e) {
      return e;
    }
    ADD_FAILURE() << "expected BackendError";
    return BackendError(BackendError::Kind::kConfig, "none");
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::string last_auth_, last_body_;
  std::atomic<int> calls_{0}, active_{0}, max_active_{0};
};

TEST_F(MockModel, FixedResponseWithAuthAndImages) {
  RemoteConfig cfg = config("/fixed");
  cfg.token = "sekrit";
  RemoteReviser remote(cfg);
  PromptBundle b = direct("CANVAS 40 40\nBUTTON 3 3 8 8\n", {400, 0.7});
  GenerationResult r = remote.revise(b);
  EXPECT_EQ(r.code_text, "CANVAS 40 40\nBUTTON 0 0 8 8\n");
  ASSERT_TRUE(r.parsed);
  EXPECT_EQ(r.backend, "remote");
  std::lock_guard lock(mu_);
  EXPECT_EQ(last_auth_, "Bearer sekrit");
  auto body = nlohmann::json::parse(last_body_);
  EXPECT_EQ(body["decoding"]["max_tokens"], 400);
  EXPECT_EQ(body["decoding"]["temperature"], 0.7);
  EXPECT_EQ(body["parts"].size(), 6u);
  ASSERT_EQ(body["images"].size(), 1u);
  EXPECT_EQ(body["images"][0]["id"], b.parts.back().payload);
  // base64 of the PNG signature
  EXPECT_EQ(body["images"][0]["png_base64"].get<std::string>().rfind("iVBORw0KGgo", 0), 0u);
}

TEST_F(MockModel, NoTokenNoAuthHeaderAndImagesOptional) {
  RemoteConfig cfg = config("/fixed");
  cfg.send_images = false;
  RemoteReviser remote(cfg);
  remote.revise(direct("CANVAS 40 40\n"));
  std::lock_guard lock(mu_);
  EXPECT_EQ(last_auth_, "");
  EXPECT_TRUE(nlohmann::json::parse(last_body_)["images"].empty());
  EXPECT_FALSE(remote.capabilities().supports_images);
}

TEST_F(MockModel, ServerErrorsExhaustRetries) {
  RemoteReviser remote(config("/down"));
  BackendError e = error_from(remote, direct("CANVAS 8 8\n"));
  EXPECT_EQ(e.kind(), BackendError::Kind::kNetwork);
  EXPECT_EQ(calls_.load(), 3);
  EXPECT_NE(std::string(e.what()).find("after 3 attempts"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos) << e.what();
}

TEST_F(MockModel, RetriesThenSucceeds) {
  RemoteReviser remote(config("/flaky"));
  GenerationResult r = remote.revise(direct("CANVAS 8 8\n"));
  EXPECT_EQ(r.code_text, "CANVAS 8 8\n");
  EXPECT_EQ(calls_.load(), 3);
}

TEST_F(MockModel, LongOutputTruncated) {
  RemoteReviser remote(config("/long"));
  GenerationResult r = remote.revise(direct("CANVAS 8 8\n"));
  EXPECT_LE(token_count(r.code_text), 400u);
  ASSERT_TRUE(r.parsed);
  EXPECT_EQ(r.parsed->elements.size(), 79u);
}

TEST_F(MockModel, RefusalsSurfaceVerbatim) {
  BackendError e = error_from(RemoteReviser(config("/refuse")), direct("CANVAS 8 8\n"));
  EXPECT_EQ(e.kind(), BackendError::Kind::kRefusal);
  EXPECT_EQ(std::string(e.what()), "I can't help with that layout.");
  EXPECT_EQ(e.status(), 400);

  e = error_from(RemoteReviser(config("/refuse-ok")), direct("CANVAS 8 8\n"));
  EXPECT_EQ(e.kind(), BackendError::Kind::kRefusal);
  EXPECT_EQ(std::string(e.what()), "content policy");

  e = error_from(RemoteReviser(config("/plain-403")), direct("CANVAS 8 8\n"));
  EXPECT_EQ(std::string(e.what()), "forbidden");
  EXPECT_EQ(e.status(), 403);

  e = error_from(RemoteReviser(config("/bad")), direct("CANVAS 8 8\n"));
  EXPECT_EQ(e.kind(), BackendError::Kind::kBadResponse);
}

TEST_F(MockModel, ConcurrencyIsCapped) {
  RemoteConfig cfg = config("/slow");
  cfg.max_in_flight = 2;
  RemoteReviser remote(cfg);
  PromptBundle b = direct("CANVAS 8 8\n");
  std::vector<std::jthread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { remote.revise(b); });
  threads.clear();
  EXPECT_EQ(max_active_.load(), 2);
}

TEST(Remote, UnreachableHostIsNetworkError) {
  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:1/x";  // nothing listens on port 1
  cfg.initial_backoff = std::chrono::milliseconds(1);
  cfg.connect_timeout = std::chrono::milliseconds(200);
  cfg.read_timeout = std::chrono::milliseconds(500);
  cfg.max_attempts = 2;
  RemoteReviser remote(cfg);
  try {
    remote.revise(direct("CANVAS 8 8\n"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::kNetwork);
    EXPECT_NE(std::string(e.what()).find("after 2 attempts: transport error"), std::string::npos)
        << e.what();
  }
}

}  // namespace
}  // namespace layoutrev
