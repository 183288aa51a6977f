#include "layoutrev/service.hpp"

#include <cstdlib>
#include <mutex>
#include <regex>
#include <shared_mutex>

#include "httplib.h"
#include "json.hpp"
#include "layoutrev/hash.hpp"
#include "layoutrev/session_store.hpp"

namespace layoutrev {

using ojson = nlohmann::ordered_json;

BackendRegistry default_backends(std::uint64_t seed) {
  BackendRegistry out;
  HeuristicConfig h;
  h.seed = seed;
  out.emplace("heuristic", std::make_shared<HeuristicReviser>(h));
  out.emplace("echo", std::make_shared<EchoReviser>());
  if (std::getenv("LAYOUTREV_REMOTE_URL") != nullptr) {
    out.emplace("remote", std::make_shared<RemoteReviser>(RemoteConfig::from_env()));
  }
  return out;
}

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig cfg;
  if (const char* v = std::getenv("LAYOUTREV_DATA_DIR")) cfg.data_dir = v;
  if (const char* v = std::getenv("LAYOUTREV_CORPUS_DIR")) cfg.corpus_dir = v;
  if (const char* v = std::getenv("LAYOUTREV_SESSION_TTL")) {
    char* end = nullptr;
    long s = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || s <= 0) {
      throw std::invalid_argument("LAYOUTREV_SESSION_TTL must be a positive number of seconds");
    }
    cfg.session_ttl = std::chrono::seconds(s);
  }
  return cfg;
}

namespace {

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, ojson body)
      : std::runtime_error(body.value("error", "error")), status(status), body(std::move(body)) {}
  int status;
  ojson body;
};

ojson violations_body(const std::string& error, const std::vector<Violation>& vs) {
  ojson arr = ojson::array();
  for (const Violation& v : vs) {
    arr.push_back({{"element", v.element}, {"rule", v.rule}, {"message", v.message}});
  }
  return {{"error", error}, {"violations", arr}};
}

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

ojson parse_body(const httplib::Request& req) {
  if (req.body.empty()) return ojson::object();
  auto j = ojson::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw HttpError(400, {{"error", "request body is not a JSON object"}});
  }
  return j;
}

std::string render_url(const std::string& id) { return "/renders/" + id + ".png"; }

}  // namespace

struct Service::Impl {
  ServiceConfig cfg;
  BackendRegistry backends;
  SessionStore store;
  httplib::Server server;

  std::mutex locks_mu;
  std::map<std::string, std::shared_ptr<std::mutex>> session_locks;

  mutable std::shared_mutex render_mu;
  std::map<std::string, std::string> png_cache;

  std::mutex corpus_mu;
  std::map<std::string, std::shared_ptr<const Corpus>> corpora;

  Impl(ServiceConfig c, BackendRegistry b)
      : cfg(std::move(c)), backends(std::move(b)), store(cfg.data_dir / "sessions.db") {
    if (backends.empty()) throw std::invalid_argument("service needs at least one backend");
    routes();
  }

  // --- helpers --------------------------------------------------------------

  LayoutDoc parse_dsl(const std::string& dsl) {
    LayoutDoc doc;
    try {
      doc = parse_layout_code(dsl, cfg.classes.registry, ParseMode::kRaw);
    } catch (const ParseError& e) {
      ojson body = violations_body("invalid DSL", {});
      body["line"] = e.line();
      body["reason"] = e.reason();
      throw HttpError(400, body);
    }
    ValidationReport report = validate_layout(doc);
    if (!report.ok()) throw HttpError(400, violations_body("invalid layout", report.violations));
    return doc;
  }

  std::string register_layout(const LayoutDoc& doc) {
    std::string code = serialize_layout_code(doc);
    std::string id = layout_id(code);
    store.put_layout(id, code);
    return id;
  }

  std::shared_ptr<std::mutex> lock_for(const std::string& token) {
    std::lock_guard g(locks_mu);
    auto& slot = session_locks[token];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
  }

  struct Loaded {
    std::string backend;
    SessionState state;
    StoredSession row;
  };

  Loaded load(const std::string& token) {
    auto row = store.get(token);
    if (row && row->updated + cfg.session_ttl.count() < store.now()) {
      store.erase(token);
      row.reset();
    }
    if (!row) throw HttpError(404, {{"error", "unknown session"}, {"token", token}});
    auto j = nlohmann::json::parse(row->json);
    return {j.at("backend").get<std::string>(),
            session_from_json(j.at("state").dump(), cfg.classes.registry), *row};
  }

  void save(const std::string& token, const std::string& backend, const SessionState& state) {
    ojson j;
    j["backend"] = backend;
    j["state"] = ojson::parse(session_to_json(state));
    store.put(token, j.dump());
  }

  const ReviserBackend& backend_named(const std::string& name) {
    auto it = backends.find(name);
    if (it == backends.end()) {
      throw HttpError(400, {{"error", "unknown backend"}, {"backend", name}});
    }
    return *it->second;
  }

  ojson session_view(const std::string& token, const Loaded& l) {
    ojson j = ojson::parse(session_to_json(l.state));
    ojson renders = {{"s0", render_url(layout_id(serialize_layout_code(l.state.s0)))}};
    renders["rounds"] = ojson::array();
    for (const RoundRecord& r : l.state.rounds) {
      renders["rounds"].push_back(render_url(layout_id(r.output_code)));
    }
    return {{"token", token},
            {"backend", l.backend},
            {"created", l.row.created},
            {"updated", l.row.updated},
            {"renders", renders},
            {"state", j}};
  }

  // Runs one round under the session's lock; 409 when another round holds it.
  template <class Fn>
  void with_round(const std::string& token, httplib::Response& res, Fn&& fn) {
    auto mu = lock_for(token);
    std::unique_lock lock(*mu, std::try_to_lock);
    if (!lock.owns_lock()) {
      throw HttpError(409, {{"error", "a round is already in progress"}, {"token", token}});
    }
    Loaded l = load(token);
    const ReviserBackend& backend = backend_named(l.backend);
    ChainSession session(std::move(l.state), cfg.classes.registry);
    try {
      fn(session, backend);
    } catch (const BackendError& e) {
      throw HttpError(502, {{"error", e.what()}, {"status", e.status()}});
    }
    const SessionState& state = session.state();
    save(token, l.backend, state);
    const RoundRecord& rec = state.rounds.back();
    std::string id = register_layout(parse_layout_code(rec.output_code, cfg.classes.registry,
                                                       ParseMode::kRaw));
    ojson all = ojson::parse(session_to_json(state));
    send_json(res, 200,
              {{"round", all["rounds"].back()},
               {"rendered_png_url", render_url(id)},
               {"echo_flagged", state.echo_flagged},
               {"status", to_string(state.status)}});
  }

  std::shared_ptr<const Corpus> corpus_named(const std::string& name) {
    static const std::regex ok("[A-Za-z0-9_][A-Za-z0-9_.-]*");
    if (!std::regex_match(name, ok)) {
      throw HttpError(400, {{"error", "invalid corpus name"}, {"corpus", name}});
    }
    std::lock_guard g(corpus_mu);
    if (auto it = corpora.find(name); it != corpora.end()) return it->second;
    auto path = cfg.corpus_dir / (name + ".jsonl");
    if (!std::filesystem::exists(path)) {
      throw HttpError(404, {{"error", "unknown corpus"}, {"corpus", name}});
    }
    auto c = std::make_shared<const Corpus>(load_corpus(path, cfg.classes.registry));
    corpora.emplace(name, c);
    return c;
  }

  // "<corpus>[@initial|@final]"
  std::vector<LayoutDoc> population(const std::string& selector) {
    auto at = selector.find('@');
    std::string name = selector.substr(0, at);
    std::string which = at == std::string::npos ? "final" : selector.substr(at + 1);
    if (which != "final" && which != "initial") {
      throw HttpError(400, {{"error", "state selector must be initial or final"},
                            {"selector", selector}});
    }
    auto corpus = corpus_named(name);
    std::vector<LayoutDoc> out;
    for (const RevisionTrajectory& t : corpus->trajectories) {
      out.push_back(which == "final" ? t.final_state() : t.initial());
    }
    return out;
  }

  // --- routes ---------------------------------------------------------------

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const HttpError& e) {
            send_json(res, e.status, e.body);
          } catch (const InvalidLayout& e) {
            send_json(res, 400, violations_body(e.what(), e.report().violations));
          } catch (const std::invalid_argument& e) {
            send_json(res, 400, {{"error", e.what()}});
          } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
          }
        });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      ojson body = parse_body(req);
      if (!body.contains("s0_dsl") || !body["s0_dsl"].is_string()) {
        throw HttpError(400, {{"error", "s0_dsl is required"}});
      }
      LayoutDoc s0 = parse_dsl(body["s0_dsl"].get<std::string>());
      ChainConfig cc = cfg.chain_defaults;
      if (body.contains("setup")) cc.setup = parse_model_setup(body["setup"].get<std::string>());
      if (body.contains("temperature")) cc.temperature = body["temperature"].get<double>();
      std::string backend = body.value("backend", cfg.default_backend);
      backend_named(backend);
      ChainSession session(body.value("trajectory_id", std::string()),
                           body.value("prompt", std::string()), s0, cc);
      store.purge_idle(cfg.session_ttl);
      std::string token = random_token();
      save(token, backend, session.state());
      std::string id = register_layout(s0);
      send_json(res, 201, {{"token", token}, {"rendered_png_url", render_url(id)}});
    });

    server.Post("/sessions/:token/rounds",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const std::string& token = req.path_params.at("token");
                  with_round(token, res, [](ChainSession& s, const ReviserBackend& b) { s.step(b); });
                });

    server.Post("/sessions/:token/human-edit",
                [this](const httplib::Request& req, httplib::Response& res) {
                  const std::string& token = req.path_params.at("token");
                  ojson body = parse_body(req);
                  if (!body.contains("dsl") || !body["dsl"].is_string()) {
                    throw HttpError(400, {{"error", "dsl is required"}});
                  }
                  LayoutDoc edit = parse_dsl(body["dsl"].get<std::string>());
                  register_layout(edit);
                  with_round(token, res, [&edit](ChainSession& s, const ReviserBackend& b) {
                    s.human_step(b, edit);
                  });
                });

    server.Get("/sessions/:token", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string& token = req.path_params.at("token");
      send_json(res, 200, session_view(token, load(token)));
    });

    server.Get(R"(/renders/([0-9a-f]{16})\.png)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 std::string id = req.matches[1];
                 res.set_content(png_for(id), "image/png");
               });

    server.Get("/metrics/fid", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.has_param("a") || !req.has_param("b")) {
        throw HttpError(400, {{"error", "query parameters a and b are required"}});
      }
      auto a = subsample(population(req.get_param_value("a")), cfg.eval.fid_samples,
                         cfg.eval.seed);
      auto b = subsample(population(req.get_param_value("b")), cfg.eval.fid_samples,
                         cfg.eval.seed + 1);
      auto fa = embed_all(a, cfg.classes.registry, cfg.eval.embed);
      auto fb = embed_all(b, cfg.classes.registry, cfg.eval.embed);
      FidResult f = fid(fa, fb, cfg.eval.fid);
      send_json(res, 200,
                {{"score", f.score},
                 {"mean_term", f.mean_term},
                 {"trace_term", f.trace_term},
                 {"n1", f.n1},
                 {"n2", f.n2},
                 {"eps", f.eps},
                 {"warnings", f.warnings}});
    });

    server.Get("/legend", [this](const httplib::Request&, httplib::Response& res) {
      ojson classes = ojson::array();
      for (const ElementClass& c : cfg.classes.registry.classes()) {
        classes.push_back({{"id", c.id},
                           {"name", c.name},
                           {"color", "#" + to_hex(cfg.classes.legend.color(c.id))}});
      }
      send_json(res, 200,
                {{"background", "#" + to_hex(cfg.classes.legend.background())},
                 {"classes", classes}});
    });
  }

  std::string png_for(const std::string& id) {
    {
      std::shared_lock r(render_mu);
      if (auto it = png_cache.find(id); it != png_cache.end()) return it->second;
    }
    auto code = store.get_layout(id);
    if (!code) throw HttpError(404, {{"error", "unknown render id"}, {"id", id}});
    LayoutDoc doc = parse_layout_code(*code, cfg.classes.registry, ParseMode::kRaw);
    std::string png = encode_png(render(doc, cfg.classes.legend, 1, RenderMode::kClip));
    std::unique_lock w(render_mu);
    return png_cache.emplace(id, std::move(png)).first->second;
  }
};

Service::Service(ServiceConfig cfg, BackendRegistry backends)
    : impl_(std::make_unique<Impl>(std::move(cfg), std::move(backends))) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool Service::listen() { return impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace layoutrev
