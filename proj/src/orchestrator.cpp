#include "layoutrev/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"

namespace layoutrev {

using ojson = nlohmann::ordered_json;

void require_valid(const LayoutDoc& doc, std::string_view what) {
  ValidationReport report = validate_layout(doc);
  if (!report.ok()) {
    std::string message = std::string(what) + ": " + report.violations.front().message;
    throw InvalidLayout(message, std::move(report));
  }
}

namespace {

BackendError with_context(const BackendError& e, std::string_view context) {
  return BackendError(e.kind(), std::string(context) + ": " + e.what(), e.status());
}

GenerationResult call(const ReviserBackend& backend, const PromptBundle& bundle,
                      std::string_view context) {
  try {
    return backend.revise(bundle);
  } catch (const BackendError& e) {
    throw with_context(e, context);
  }
}

}  // namespace

GenerationResult direct_infer(const ReviserBackend& backend, std::string_view task,
                              const LayoutDoc& s0, ModelSetup setup,
                              const PromptOptions& opts) {
  require_valid(s0, "S0");
  if (uses_revision_prompt(setup)) {
    std::vector<LayoutDoc> dup{s0};
    return call(backend, build_revision_prompt(task, s0, dup, opts), "direct inference");
  }
  return call(backend, build_direct_prompt(task, s0, opts), "direct inference");
}

GenerationResult guided_infer(const ReviserBackend& backend, std::string_view task,
                              const LayoutDoc& s0, std::span<const LayoutDoc> edits,
                              ModelSetup setup, const PromptOptions& opts) {
  if (!uses_revision_prompt(setup)) {
    throw std::invalid_argument("guided inference needs the single or multi setup");
  }
  if (edits.empty()) throw std::invalid_argument("guided inference needs at least one edit");
  if (setup == ModelSetup::kSingleRevision && edits.size() != 1) {
    throw std::invalid_argument("the single setup takes exactly one edit");
  }
  require_valid(s0, "S0");
  for (const LayoutDoc& e : edits) require_valid(e, "edit");
  return call(backend, build_revision_prompt(task, s0, edits, opts), "guided inference");
}

void ChainConfig::check() const {
  if (rounds < 1) throw std::invalid_argument("ChainConfig: rounds must be >= 1");
  if (echo_window < 1) throw std::invalid_argument("ChainConfig: echo_window must be >= 1");
  if (multi_context_cap < 1) {
    throw std::invalid_argument("ChainConfig: multi_context_cap must be >= 1");
  }
  if (!(temperature >= 0.0)) throw std::invalid_argument("ChainConfig: temperature must be >= 0");
  if (max_tokens < 1) throw std::invalid_argument("ChainConfig: max_tokens must be >= 1");
}

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::kActive: return "active";
    case SessionStatus::kEchoFlagged: return "echo_flagged";
    case SessionStatus::kDone: return "done";
  }
  return "active";
}

SessionStatus parse_session_status(std::string_view text) {
  for (auto s : {SessionStatus::kActive, SessionStatus::kEchoFlagged, SessionStatus::kDone}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown session status '" + std::string(text) + "'");
}

LayoutDoc SessionState::current(const ClassRegistry& registry) const {
  if (rounds.empty()) return s0;
  return parse_layout_code(rounds.back().output_code, registry, ParseMode::kRaw);
}

// --- JSON -------------------------------------------------------------------

namespace {

ojson config_json(const ChainConfig& c) {
  return {{"rounds", c.rounds},
          {"setup", to_string(c.setup)},
          {"temperature", c.temperature},
          {"echo_rouge_threshold", c.echo_rouge_threshold},
          {"echo_window", c.echo_window},
          {"multi_context_cap", c.multi_context_cap},
          {"max_tokens", c.max_tokens},
          {"fix_typos", c.fix_typos}};
}

ChainConfig config_from(const nlohmann::json& j) {
  ChainConfig c;
  c.rounds = j.at("rounds").get<std::size_t>();
  c.setup = parse_model_setup(j.at("setup").get<std::string>());
  c.temperature = j.at("temperature").get<double>();
  c.echo_rouge_threshold = j.at("echo_rouge_threshold").get<double>();
  c.echo_window = j.at("echo_window").get<std::size_t>();
  c.multi_context_cap = j.at("multi_context_cap").get<std::size_t>();
  c.max_tokens = j.at("max_tokens").get<std::size_t>();
  c.fix_typos = j.at("fix_typos").get<bool>();
  return c;
}

ojson optional_string(const std::optional<std::string>& s) {
  return s ? ojson(*s) : ojson(nullptr);
}

std::optional<std::string> optional_string_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

ojson violations_json(const std::vector<Violation>& vs) {
  ojson arr = ojson::array();
  for (const Violation& v : vs) {
    arr.push_back({{"element", v.element}, {"rule", v.rule}, {"message", v.message}});
  }
  return arr;
}

}  // namespace

std::string session_to_json(const SessionState& state, bool pretty) {
  ojson j;
  j["id"] = state.id;
  j["prompt"] = state.prompt;
  j["s0"] = serialize_layout_code(state.s0);
  j["config"] = config_json(state.config);
  j["status"] = to_string(state.status);
  j["echo_flagged"] = state.echo_flagged;
  j["error"] = optional_string(state.error);
  j["rounds"] = ojson::array();
  for (const RoundRecord& r : state.rounds) {
    j["rounds"].push_back({{"round", r.round},
                           {"human", r.human},
                           {"input_codes", r.input_codes},
                           {"code_text", r.code_text},
                           {"output_code", r.output_code},
                           {"parse_error", optional_string(r.parse_error)},
                           {"violations", violations_json(r.violations)},
                           {"latency_ms", r.latency_ms},
                           {"backend", r.backend},
                           {"metrics",
                            {{"rouge_l", r.metrics.rouge_l_f1},
                             {"identical", r.metrics.identical}}}});
  }
  j["human_injections"] = ojson::array();
  for (const HumanInjection& h : state.human_injections) {
    j["human_injections"].push_back({{"round", h.round}, {"dsl", serialize_layout_code(h.edit)}});
  }
  j["multi_context"] = ojson::array();
  for (const LayoutDoc& d : state.multi_context) {
    j["multi_context"].push_back(serialize_layout_code(d));
  }
  return pretty ? j.dump(2) : j.dump();
}

SessionState session_from_json(std::string_view json, const ClassRegistry& registry) {
  auto j = nlohmann::json::parse(json);
  auto parse = [&](const nlohmann::json& code) {
    return parse_layout_code(code.get<std::string>(), registry, ParseMode::kRaw);
  };
  SessionState s;
  s.id = j.at("id").get<std::string>();
  s.prompt = j.at("prompt").get<std::string>();
  s.s0 = parse(j.at("s0"));
  s.config = config_from(j.at("config"));
  s.status = parse_session_status(j.at("status").get<std::string>());
  s.echo_flagged = j.at("echo_flagged").get<bool>();
  s.error = optional_string_from(j.at("error"));
  for (const auto& r : j.at("rounds")) {
    RoundRecord rec;
    rec.round = r.at("round").get<std::size_t>();
    rec.human = r.at("human").get<bool>();
    rec.input_codes = r.at("input_codes").get<std::vector<std::string>>();
    rec.code_text = r.at("code_text").get<std::string>();
    rec.output_code = r.at("output_code").get<std::string>();
    rec.parse_error = optional_string_from(r.at("parse_error"));
    for (const auto& v : r.at("violations")) {
      rec.violations.push_back({v.at("element").get<std::size_t>(), v.at("rule").get<std::string>(),
                                v.at("message").get<std::string>()});
    }
    rec.latency_ms = r.at("latency_ms").get<double>();
    rec.backend = r.at("backend").get<std::string>();
    rec.metrics.rouge_l_f1 = r.at("metrics").at("rouge_l").get<double>();
    rec.metrics.identical = r.at("metrics").at("identical").get<bool>();
    s.rounds.push_back(std::move(rec));
  }
  for (const auto& h : j.at("human_injections")) {
    s.human_injections.push_back({h.at("round").get<std::size_t>(), parse(h.at("dsl"))});
  }
  for (const auto& c : j.at("multi_context")) s.multi_context.push_back(parse(c));
  return s;
}

// --- ChainSession -----------------------------------------------------------

ChainSession::ChainSession(std::string id, std::string prompt, LayoutDoc s0, ChainConfig cfg)
    : registry_(&ClassRegistry::defaults()) {
  cfg.check();
  require_valid(s0, "S0");
  state_.id = std::move(id);
  state_.prompt = std::move(prompt);
  state_.s0 = std::move(s0);
  state_.config = cfg;
}

ChainSession::ChainSession(SessionState state, const ClassRegistry& registry)
    : state_(std::move(state)), registry_(&registry) {
  state_.config.check();
}

PromptOptions ChainSession::options() const {
  PromptOptions opts = PromptOptions::for_setup(state_.config.setup);
  opts.fix_typos = state_.config.fix_typos;
  opts.decoding.temperature = state_.config.temperature;
  opts.decoding.max_tokens = state_.config.max_tokens;
  return opts;
}

PromptBundle ChainSession::revision_prompt(std::vector<LayoutDoc> edits) const {
  return build_revision_prompt(state_.prompt, state_.s0, edits, options());
}

PromptBundle ChainSession::next_prompt() const {
  const LayoutDoc cur = state_.current(*registry_);
  switch (state_.config.setup) {
    case ModelSetup::kDirect:
    case ModelSetup::kHop:
      return build_direct_prompt(state_.prompt, cur, options());
    case ModelSetup::kSingleRevision:
      return revision_prompt({cur});
    case ModelSetup::kMultiRevision:
      // Before any output exists, S0 fills the edit slot.
      if (state_.multi_context.empty()) return revision_prompt({state_.s0});
      return revision_prompt(state_.multi_context);
  }
  throw std::logic_error("unhandled model setup");
}

PromptBundle ChainSession::human_prompt(const LayoutDoc& edit) const {
  switch (state_.config.setup) {
    case ModelSetup::kDirect:
    case ModelSetup::kHop:
      return build_direct_prompt(state_.prompt, edit, options());
    case ModelSetup::kSingleRevision:
      return revision_prompt({edit});
    case ModelSetup::kMultiRevision: {
      std::vector<LayoutDoc> ctx = state_.multi_context;
      ctx.push_back(edit);
      std::size_t cap = state_.config.multi_context_cap;
      if (ctx.size() > cap) ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(cap));
      return revision_prompt(std::move(ctx));
    }
  }
  throw std::logic_error("unhandled model setup");
}

const RoundRecord& ChainSession::run(const ReviserBackend& backend, const PromptBundle& bundle,
                                     bool human) {
  const std::size_t round = state_.rounds.size() + 1;
  GenerationResult res = call(backend, bundle, "round " + std::to_string(round));

  RoundRecord rec;
  rec.round = round;
  rec.human = human;
  for (const PromptPart& p : bundle.parts) {
    if (p.kind == PartKind::kCode) rec.input_codes.push_back(p.payload);
  }
  const std::string& working = rec.input_codes.back();
  rec.code_text = res.code_text;
  rec.parse_error = res.parse_error;
  rec.violations = res.violations;
  rec.latency_ms = static_cast<double>(res.latency.count()) / 1000.0;
  rec.backend = res.backend;
  // Unparseable output leaves the working layout in place.
  rec.output_code = res.parsed ? serialize_layout_code(*res.parsed) : working;
  rec.metrics = compare_codes(working, rec.output_code);
  state_.rounds.push_back(std::move(rec));
  update_echo();
  return state_.rounds.back();
}

void ChainSession::update_echo() {
  // Round 1 repeats S0 by construction under the duplication rule, so only
  // rounds from 2 on count as evidence.
  std::size_t streak = 0;
  for (auto it = state_.rounds.rbegin(); it != state_.rounds.rend(); ++it) {
    if (it->round < 2 || it->metrics.rouge_l_f1 < state_.config.echo_rouge_threshold) break;
    ++streak;
  }
  if (streak >= state_.config.echo_window) {
    state_.echo_flagged = true;
    state_.status = SessionStatus::kEchoFlagged;
  }
}

namespace {

void push_capped(std::vector<LayoutDoc>& ctx, LayoutDoc doc, std::size_t cap) {
  ctx.push_back(std::move(doc));
  if (ctx.size() > cap) ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(cap));
}

}  // namespace

const RoundRecord& ChainSession::step(const ReviserBackend& backend) {
  const RoundRecord& rec = run(backend, next_prompt(), false);
  if (state_.config.setup == ModelSetup::kMultiRevision) {
    push_capped(state_.multi_context,
                parse_layout_code(rec.output_code, *registry_, ParseMode::kRaw),
                state_.config.multi_context_cap);
  }
  return rec;
}

const RoundRecord& ChainSession::human_step(const ReviserBackend& backend, const LayoutDoc& edit) {
  require_valid(edit, "human edit");
  const RoundRecord& rec = run(backend, human_prompt(edit), true);
  state_.human_injections.push_back({rec.round, edit});
  if (state_.config.setup == ModelSetup::kMultiRevision) {
    const std::size_t cap = state_.config.multi_context_cap;
    push_capped(state_.multi_context, edit, cap);
    push_capped(state_.multi_context,
                parse_layout_code(rec.output_code, *registry_, ParseMode::kRaw), cap);
  }
  return rec;
}

// --- chains -----------------------------------------------------------------

namespace {

ChainReport finish(ChainSession&& session) {
  SessionState s = std::move(session).release();
  if (s.status == SessionStatus::kActive && !s.error) s.status = SessionStatus::kDone;
  return s;
}

}  // namespace

ChainReport run_chain(const ReviserBackend& backend, std::string_view task, const LayoutDoc& s0,
                      const ChainConfig& cfg, std::string id) {
  ChainSession session(std::move(id), std::string(task), s0, cfg);
  try {
    for (std::size_t r = 0; r < cfg.rounds; ++r) session.step(backend);
  } catch (const BackendError& e) {
    SessionState partial = std::move(session).release();
    partial.error = e.what();
    return partial;
  }
  return finish(std::move(session));
}

ChainReport run_chain_with_human(const ReviserBackend& backend, std::string_view task,
                                 const LayoutDoc& s0, const LayoutDoc& human_edit,
                                 const ChainConfig& cfg, std::string id) {
  ChainSession session(std::move(id), std::string(task), s0, cfg);
  try {
    session.human_step(backend, human_edit);
    for (std::size_t r = 1; r < cfg.rounds; ++r) session.step(backend);
  } catch (const BackendError& e) {
    SessionState partial = std::move(session).release();
    partial.error = e.what();
    return partial;
  }
  return finish(std::move(session));
}

HumanSource parse_human_source(std::string_view text) {
  if (text == "none") return HumanSource::kNone;
  if (text == "final") return HumanSource::kFinal;
  if (text == "penultimate") return HumanSource::kPenultimate;
  throw std::invalid_argument("unknown human edit source '" + std::string(text) + "'");
}

std::vector<ChainReport> run_corpus_chains(const ReviserBackend& backend, const Corpus& corpus,
                                           const ChainConfig& cfg, HumanSource human,
                                           std::size_t workers) {
  const auto& trajs = corpus.trajectories;
  std::vector<ChainReport> out(trajs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (std::size_t k = next++; k < trajs.size(); k = next++) {
      try {
        const RevisionTrajectory& t = trajs[k];
        if (human == HumanSource::kNone) {
          out[k] = run_chain(backend, t.prompt, t.initial(), cfg, t.id);
        } else {
          const LayoutDoc& edit = human == HumanSource::kFinal || t.states.size() < 2
                                      ? t.final_state()
                                      : t.states[t.states.size() - 2];
          out[k] = run_chain_with_human(backend, t.prompt, t.initial(), edit, cfg, t.id);
        }
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = trajs.size();
      }
    }
  };
  std::vector<std::jthread> pool;
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, trajs.size()));
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// --- evaluation -------------------------------------------------------------

std::vector<LayoutDoc> subsample(std::span<const LayoutDoc> docs, std::size_t limit,
                                 std::uint64_t seed) {
  if (docs.size() <= limit) return {docs.begin(), docs.end()};
  std::mt19937_64 rng(seed);
  std::vector<LayoutDoc> out;
  out.reserve(limit);
  std::sample(docs.begin(), docs.end(), std::back_inserter(out), limit, rng);
  return out;
}

std::vector<EvalRow> evaluate_run(std::span<const ChainReport> reports,
                                  std::span<const LayoutDoc> reference, const EvalConfig& cfg,
                                  const ClassRegistry& registry) {
  if (reports.empty()) throw std::invalid_argument("evaluate_run: no reports");
  if (reference.size() < 2) {
    throw std::invalid_argument("evaluate_run: reference needs at least two layouts");
  }
  std::size_t max_round = 0;
  for (const ChainReport& r : reports) max_round = std::max(max_round, r.rounds.size());

  std::vector<LayoutDoc> ref = subsample(reference, cfg.fid_samples, cfg.seed ^ 0x5eedULL);
  std::vector<FeatureVector> ref_features = embed_all(ref, registry, cfg.embed);

  std::vector<EvalRow> rows;
  for (std::size_t round = 1; round <= max_round; ++round) {
    EvalRow row;
    row.round = round;
    std::vector<LayoutDoc> outputs;
    double rouge_sum = 0.0;
    std::size_t identical = 0;
    for (const ChainReport& rep : reports) {
      if (rep.rounds.size() < round) continue;
      const RoundRecord& rec = rep.rounds[round - 1];
      outputs.push_back(parse_layout_code(rec.output_code, registry, ParseMode::kRaw));
      rouge_sum += rec.metrics.rouge_l_f1;
      identical += rec.metrics.identical ? 1 : 0;
    }
    row.sessions = outputs.size();
    row.rouge_l = rouge_sum / static_cast<double>(row.sessions);
    row.identical_rate = 100.0 * static_cast<double>(identical) / static_cast<double>(row.sessions);
    if (outputs.size() < cfg.fid_samples) {
      row.warnings.push_back("round " + std::to_string(round) + ": " +
                             std::to_string(outputs.size()) + " outputs, fewer than " +
                             std::to_string(cfg.fid_samples) + " FID samples");
    }
    if (outputs.size() < 2) {
      row.fid = std::numeric_limits<double>::quiet_NaN();
      row.warnings.push_back("round " + std::to_string(round) + ": too few outputs for FID");
    } else {
      std::vector<LayoutDoc> sample = subsample(outputs, cfg.fid_samples, cfg.seed + round);
      std::vector<FeatureVector> features = embed_all(sample, registry, cfg.embed);
      FidResult f = fid(features, ref_features, cfg.fid);
      row.fid = f.score;
      for (std::string& w : f.warnings) row.warnings.push_back(std::move(w));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_eval_csv(std::span<const EvalRow> rows) {
  std::string out = "round,sessions,fid,identical_rate,rouge_l\n";
  char buf[128];
  for (const EvalRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.4f,%.2f,%.2f\n", r.round, r.sessions, r.fid,
                  r.identical_rate, r.rouge_l);
    out += buf;
  }
  return out;
}

}  // namespace layoutrev
