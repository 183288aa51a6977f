#include "layoutrev/prompt.hpp"

#include <cmath>

#include "json.hpp"
#include "layoutrev/hash.hpp"

namespace layoutrev {

std::string_view to_string(ModelSetup setup) {
  switch (setup) {
    case ModelSetup::kDirect: return "direct";
    case ModelSetup::kHop: return "hop";
    case ModelSetup::kSingleRevision: return "single";
    case ModelSetup::kMultiRevision: return "multi";
  }
  return "direct";
}

ModelSetup parse_model_setup(std::string_view text) {
  for (auto s : {ModelSetup::kDirect, ModelSetup::kHop, ModelSetup::kSingleRevision,
                 ModelSetup::kMultiRevision}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown model setup '" + std::string(text) + "'");
}

bool uses_revision_prompt(ModelSetup setup) {
  return setup == ModelSetup::kSingleRevision || setup == ModelSetup::kMultiRevision;
}

std::string_view to_string(PartKind kind) {
  switch (kind) {
    case PartKind::kText: return "text";
    case PartKind::kCode: return "code";
    case PartKind::kImageRef: return "image_ref";
  }
  return "text";
}

void DecodingParams::check() const {
  if (max_tokens < 1) throw std::invalid_argument("DecodingParams: max_tokens must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("DecodingParams: temperature must be >= 0");
  }
}

std::size_t PromptBundle::prefix_tokens() const {
  std::size_t total = 0;
  for (const PromptPart& p : parts) {
    total += p.kind == PartKind::kImageRef ? kImageTokenAllowance : token_count(p.payload);
  }
  return total;
}

std::size_t PromptBundle::image_count() const {
  std::size_t n = 0;
  for (const PromptPart& p : parts) n += p.kind == PartKind::kImageRef ? 1 : 0;
  return n;
}

const PromptPart* PromptBundle::last_code() const {
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (it->kind == PartKind::kCode) return &*it;
  }
  return nullptr;
}

BudgetExceeded::BudgetExceeded(std::size_t tokens, std::size_t budget)
    : std::runtime_error("prompt needs " + std::to_string(tokens) + " tokens, budget is " +
                         std::to_string(budget)),
      tokens_(tokens),
      budget_(budget) {}

PromptOptions PromptOptions::for_setup(ModelSetup setup) {
  PromptOptions opts;
  if (setup == ModelSetup::kMultiRevision) opts.budget = kMultiRevisionPromptBudget;
  return opts;
}

std::string image_id_for(const LayoutDoc& doc) { return layout_id(serialize_layout_code(doc)); }

namespace {

PromptPart text(std::string_view s) { return {PartKind::kText, std::string(s)}; }
PromptPart code(const LayoutDoc& d) { return {PartKind::kCode, serialize_layout_code(d)}; }

PromptBundle start(std::string_view task, const LayoutDoc& initial, const PromptOptions& opts) {
  opts.decoding.check();
  PromptBundle b;
  b.decoding = opts.decoding;
  b.budget = opts.budget;
  b.parts.push_back(text(opts.fix_typos ? prompt_text::kIntroFixed : prompt_text::kIntro));
  b.parts.push_back(text(task));
  b.parts.push_back(text(prompt_text::kInitialLayout));
  b.parts.push_back(code(initial));
  return b;
}

void finish(PromptBundle& b, const LayoutDoc& screenshot_of) {
  std::string id = image_id_for(screenshot_of);
  b.parts.push_back({PartKind::kImageRef, id});
  b.images.emplace(std::move(id), screenshot_of);
  std::size_t tokens = b.prefix_tokens();
  if (tokens > b.budget) throw BudgetExceeded(tokens, b.budget);
}

}  // namespace

PromptBundle build_direct_prompt(std::string_view task, const LayoutDoc& state,
                                 const PromptOptions& opts) {
  PromptBundle b = start(task, state, opts);
  b.parts.push_back(text(prompt_text::kImproveFromScreenshot));
  finish(b, state);
  return b;
}

PromptBundle build_revision_prompt(std::string_view task, const LayoutDoc& initial,
                                   std::span<const LayoutDoc> edits, const PromptOptions& opts) {
  if (edits.empty()) throw std::invalid_argument("revision prompt needs at least one edit");
  PromptBundle b = start(task, initial, opts);
  b.parts.push_back(text(prompt_text::kEditsIntro));
  for (const LayoutDoc& e : edits) b.parts.push_back(code(e));
  b.parts.push_back(text(prompt_text::kFollowEdits));
  finish(b, initial);
  return b;
}

PromptBundle build_example_prompt(const RevisionTrajectory& traj, const TrainingExample& ex,
                                  const PromptOptions& opts) {
  check_example(ex, traj);
  const auto& s = traj.states;
  switch (ex.setup) {
    case ExampleSetup::kDirectS0:
    case ExampleSetup::kDirectSi:
    case ExampleSetup::kHop:
      return build_direct_prompt(traj.prompt, s[ex.input_indices[0]], opts);
    case ExampleSetup::kSingleRevision:
    case ExampleSetup::kMultiRevision: {
      std::vector<LayoutDoc> edits;
      for (std::size_t k = 1; k < ex.input_indices.size(); ++k) {
        edits.push_back(s[ex.input_indices[k]]);
      }
      if (edits.empty()) edits.push_back(s[0]);
      return build_revision_prompt(traj.prompt, s[0], edits, opts);
    }
  }
  throw std::logic_error("unhandled example setup");
}

std::string render_prompt_text(const PromptBundle& bundle) {
  std::string out;
  const PromptPart* prev = nullptr;
  for (const PromptPart& p : bundle.parts) {
    if (prev != nullptr) {
      if (prev->kind == PartKind::kCode) {
        // Code payloads end with a newline already.
        if (p.kind == PartKind::kCode) out.push_back('\n');
      } else {
        out.push_back(p.kind == PartKind::kCode ? '\n' : ' ');
      }
    }
    if (p.kind == PartKind::kImageRef) {
      out += "<image:" + p.payload + ">";
    } else {
      out += p.payload;
    }
    prev = &p;
  }
  return out;
}

std::string bundle_to_json(const PromptBundle& bundle) {
  nlohmann::ordered_json j;
  j["parts"] = nlohmann::ordered_json::array();
  for (const PromptPart& p : bundle.parts) {
    j["parts"].push_back({{"kind", to_string(p.kind)}, {"payload", p.payload}});
  }
  j["decoding"] = {{"max_tokens", bundle.decoding.max_tokens},
                   {"temperature", bundle.decoding.temperature}};
  return j.dump();
}

PromptBundle bundle_from_json(std::string_view json) {
  auto j = nlohmann::json::parse(json);
  PromptBundle b;
  for (const auto& p : j.at("parts")) {
    std::string kind = p.at("kind").get<std::string>();
    PromptPart part;
    if (kind == "text") {
      part.kind = PartKind::kText;
    } else if (kind == "code") {
      part.kind = PartKind::kCode;
    } else if (kind == "image_ref") {
      part.kind = PartKind::kImageRef;
    } else {
      throw std::invalid_argument("unknown part kind '" + kind + "'");
    }
    part.payload = p.at("payload").get<std::string>();
    b.parts.push_back(std::move(part));
  }
  const auto& d = j.at("decoding");
  b.decoding.max_tokens = d.at("max_tokens").get<std::size_t>();
  b.decoding.temperature = d.at("temperature").get<double>();
  b.decoding.check();
  return b;
}

}  // namespace layoutrev
