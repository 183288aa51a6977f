#pragma once

// Inference entry points and the multi-round revision chain.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/backend.hpp"
#include "layoutrev/metrics.hpp"
#include "layoutrev/prompt.hpp"
#include "layoutrev/trajectory.hpp"

namespace layoutrev {

/// Raised for an invalid S0 or human edit.
class InvalidLayout : public std::invalid_argument {
 public:
  InvalidLayout(const std::string& what, ValidationReport report)
      : std::invalid_argument(what), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

void require_valid(const LayoutDoc& doc, std::string_view what);

/// One backend call on S0 with the setup's prompt; revision setups get S0 in
/// the edit slot as well.
GenerationResult direct_infer(const ReviserBackend& backend, std::string_view task,
                              const LayoutDoc& s0, ModelSetup setup,
                              const PromptOptions& opts);

/// Revision prompt with the given edits. The single setup takes exactly one.
GenerationResult guided_infer(const ReviserBackend& backend, std::string_view task,
                              const LayoutDoc& s0, std::span<const LayoutDoc> edits,
                              ModelSetup setup, const PromptOptions& opts);

struct ChainConfig {
  std::size_t rounds = 3;
  ModelSetup setup = ModelSetup::kSingleRevision;
  double temperature = 0.0;
  double echo_rouge_threshold = 99.0;
  std::size_t echo_window = 1;
  std::size_t multi_context_cap = 20;
  std::size_t max_tokens = kDefaultMaxTokens;
  bool fix_typos = false;

  void check() const;
};

enum class SessionStatus { kActive, kEchoFlagged, kDone };

std::string_view to_string(SessionStatus status);
SessionStatus parse_session_status(std::string_view text);

struct RoundRecord {
  std::size_t round = 0;  // 1-based
  bool human = false;     // prompt carried a human edit
  std::vector<std::string> input_codes;  // code parts of the prompt, in order
  std::string code_text;                 // raw backend output
  std::string output_code;               // canonical code of the round's layout
  std::optional<std::string> parse_error;
  std::vector<Violation> violations;
  double latency_ms = 0.0;
  std::string backend;
  TextMetrics metrics;  // against the prompt's working layout

  bool operator==(const RoundRecord&) const = default;
};

struct HumanInjection {
  std::size_t round = 0;
  LayoutDoc edit;

  bool operator==(const HumanInjection&) const = default;
};

struct SessionState {
  std::string id;  // trajectory id, or empty for an ad-hoc S0
  std::string prompt;
  LayoutDoc s0;
  ChainConfig config;
  std::vector<RoundRecord> rounds;
  std::vector<HumanInjection> human_injections;
  std::vector<LayoutDoc> multi_context;  // revisions fed to the multi setup
  SessionStatus status = SessionStatus::kActive;
  bool echo_flagged = false;
  std::optional<std::string> error;

  /// Output of the last round, or S0.
  LayoutDoc current(const ClassRegistry& registry = ClassRegistry::defaults()) const;
};

using ChainReport = SessionState;

std::string session_to_json(const SessionState& state, bool pretty = false);
SessionState session_from_json(std::string_view json,
                               const ClassRegistry& registry = ClassRegistry::defaults());

/// Holds one chain. Rounds are appended, never rewritten.
class ChainSession {
 public:
  ChainSession(std::string id, std::string prompt, LayoutDoc s0, ChainConfig cfg);
  explicit ChainSession(SessionState state,
                        const ClassRegistry& registry = ClassRegistry::defaults());

  /// Prompt the next self-revision round would send.
  PromptBundle next_prompt() const;
  /// Prompt for a round that carries `edit`.
  PromptBundle human_prompt(const LayoutDoc& edit) const;

  /// Propagates BackendError; the state is unchanged in that case.
  const RoundRecord& step(const ReviserBackend& backend);
  const RoundRecord& human_step(const ReviserBackend& backend, const LayoutDoc& edit);

  const SessionState& state() const { return state_; }
  SessionState release() && { return std::move(state_); }

 private:
  PromptOptions options() const;
  PromptBundle revision_prompt(std::vector<LayoutDoc> edits) const;
  const RoundRecord& run(const ReviserBackend& backend, const PromptBundle& bundle, bool human);
  void update_echo();

  SessionState state_;
  const ClassRegistry* registry_;
};

/// Runs cfg.rounds self-revision rounds. A backend failure ends the chain
/// early with the error recorded.
ChainReport run_chain(const ReviserBackend& backend, std::string_view task, const LayoutDoc& s0,
                      const ChainConfig& cfg, std::string id = {});

/// Round 1 carries `human_edit`; later rounds self-revise.
ChainReport run_chain_with_human(const ReviserBackend& backend, std::string_view task,
                                 const LayoutDoc& s0, const LayoutDoc& human_edit,
                                 const ChainConfig& cfg, std::string id = {});

enum class HumanSource { kNone, kFinal, kPenultimate };

HumanSource parse_human_source(std::string_view text);

/// One chain per trajectory, on a pool of `workers` threads. Output order
/// follows the corpus.
std::vector<ChainReport> run_corpus_chains(const ReviserBackend& backend, const Corpus& corpus,
                                           const ChainConfig& cfg, HumanSource human,
                                           std::size_t workers = 4);

struct EvalConfig {
  std::size_t fid_samples = 512;
  std::uint64_t seed = 0;
  FidConfig fid;
  EmbedConfig embed;
};

struct EvalRow {
  std::size_t round = 0;
  std::size_t sessions = 0;
  double fid = 0.0;
  double identical_rate = 0.0;  // percent of sessions whose output repeats the working layout
  double rouge_l = 0.0;         // mean
  std::vector<std::string> warnings;
};

/// Per-round FID of the outputs against `reference`, with both sides
/// subsampled to cfg.fid_samples.
std::vector<EvalRow> evaluate_run(std::span<const ChainReport> reports,
                                  std::span<const LayoutDoc> reference,
                                  const EvalConfig& cfg = {},
                                  const ClassRegistry& registry = ClassRegistry::defaults());

std::string format_eval_csv(std::span<const EvalRow> rows);

/// Deterministic subsample of at most `limit` items (order preserved).
std::vector<LayoutDoc> subsample(std::span<const LayoutDoc> docs, std::size_t limit,
                                 std::uint64_t seed);

}  // namespace layoutrev
