#pragma once

// Interleaved text / design-code / image prompts for the reviser. The
// wording of the instruction slots is fixed; golden tests pin it.

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/layout.hpp"
#include "layoutrev/sampler.hpp"

namespace layoutrev {

enum class ModelSetup { kDirect, kHop, kSingleRevision, kMultiRevision };

std::string_view to_string(ModelSetup setup);
ModelSetup parse_model_setup(std::string_view text);
bool uses_revision_prompt(ModelSetup setup);

namespace prompt_text {
inline constexpr std::string_view kIntro = "Your are improving the layout design of an app.";
inline constexpr std::string_view kIntroFixed = "You are improving the layout design of an app.";
inline constexpr std::string_view kInitialLayout = "The initial layout is:";
inline constexpr std::string_view kImproveFromScreenshot =
    "Now, improve the layout based on the initial layout's screenshot:";
inline constexpr std::string_view kEditsIntro = "You made some edits to the initial layout:";
inline constexpr std::string_view kFollowEdits =
    "Now, follow the edits and make further improvements. As a reference, here is the "
    "screenshot of the initial layout:";
}  // namespace prompt_text

inline constexpr std::size_t kDefaultPromptBudget = 8192;
inline constexpr std::size_t kMultiRevisionPromptBudget = 16384;
inline constexpr std::size_t kImageTokenAllowance = 256;
inline constexpr std::size_t kDefaultMaxTokens = 400;

enum class PartKind { kText, kCode, kImageRef };

std::string_view to_string(PartKind kind);

struct PromptPart {
  PartKind kind = PartKind::kText;
  std::string payload;  // text, canonical design code, or image id

  bool operator==(const PromptPart&) const = default;
};

struct DecodingParams {
  std::size_t max_tokens = kDefaultMaxTokens;
  double temperature = 0.0;

  void check() const;
  bool operator==(const DecodingParams&) const = default;
};

struct PromptBundle {
  std::vector<PromptPart> parts;
  DecodingParams decoding;
  std::size_t budget = kDefaultPromptBudget;
  // Layouts behind each image_ref, for backends that attach rendered images.
  // Not part of the wire form.
  std::map<std::string, LayoutDoc> images;

  /// Text and code tokens plus a fixed allowance per image.
  std::size_t prefix_tokens() const;
  std::size_t image_count() const;
  /// The working layout: the payload of the last code part, if any.
  const PromptPart* last_code() const;

  bool operator==(const PromptBundle&) const = default;
};

class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(std::size_t tokens, std::size_t budget);
  std::size_t tokens() const { return tokens_; }
  std::size_t budget() const { return budget_; }

 private:
  std::size_t tokens_;
  std::size_t budget_;
};

struct PromptOptions {
  bool fix_typos = false;
  std::size_t budget = kDefaultPromptBudget;
  DecodingParams decoding;

  /// 16k budget for multi-revision, 8k otherwise.
  static PromptOptions for_setup(ModelSetup setup);
};

/// Image id used for a layout's screenshot: the render-cache id of its
/// canonical design code.
std::string image_id_for(const LayoutDoc& doc);

PromptBundle build_direct_prompt(std::string_view task, const LayoutDoc& state,
                                 const PromptOptions& opts = {});

/// `edits` must be non-empty; only the initial layout contributes an image.
PromptBundle build_revision_prompt(std::string_view task, const LayoutDoc& initial,
                                   std::span<const LayoutDoc> edits,
                                   const PromptOptions& opts = {});

/// Prompt for one training example. Revision examples without sampled
/// intermediates reuse S0 as the edit.
PromptBundle build_example_prompt(const RevisionTrajectory& traj, const TrainingExample& ex,
                                  const PromptOptions& opts);

/// Parts joined by single spaces, except that code blocks sit on their own
/// lines with one blank line between consecutive blocks. Images become
/// `<image:ID>`.
std::string render_prompt_text(const PromptBundle& bundle);

/// {"parts":[{"kind","payload"}],"decoding":{"max_tokens","temperature"}}
std::string bundle_to_json(const PromptBundle& bundle);
PromptBundle bundle_from_json(std::string_view json);

}  // namespace layoutrev
