#pragma once

// Layout design code: a canvas plus an ordered list of typed rectangles,
// with a line-based textual form.
//
//   CANVAS <w> <h>
//   <CLASS> <x> <y> <w> <h> ["label"]
//
// Lines starting with '#' are comments; blank lines are ignored. The full
// grammar lives in docs/dsl.md.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace layoutrev {

inline constexpr int kDefaultCanvasWidth = 360;
inline constexpr int kDefaultCanvasHeight = 800;
inline constexpr int kMaxCanvasExtent = 16384;

struct ElementClass {
  std::uint16_t id = 0;
  std::string name;

  bool operator==(const ElementClass&) const = default;
};

/// Known element classes, in a stable order. The order defines feature
/// channel layout in metrics::embed, so two registries with the same
/// classes in a different order are not interchangeable.
class ClassRegistry {
 public:
  ClassRegistry() = default;

  /// Throws std::invalid_argument on a malformed name or a duplicate id/name.
  void add(ElementClass cls);

  const ElementClass* find(std::string_view name) const;
  const ElementClass* find_id(std::uint16_t id) const;
  std::optional<std::size_t> index_of(std::uint16_t id) const;

  std::span<const ElementClass> classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }

  /// The 20 built-in Material-style classes (ids 0..19).
  static const ClassRegistry& defaults();

 private:
  std::vector<ElementClass> classes_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::uint16_t, std::size_t> by_id_;
};

bool is_valid_class_name(std::string_view name);

struct Element {
  ElementClass cls;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  std::optional<std::string> label;

  bool operator==(const Element&) const = default;
};

struct LayoutDoc {
  int canvas_w = kDefaultCanvasWidth;
  int canvas_h = kDefaultCanvasHeight;
  std::vector<Element> elements;

  bool operator==(const LayoutDoc&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason);

  std::size_t line() const { return line_; }
  const std::string& reason() const { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

struct Violation {
  std::size_t element = 0;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

enum class ParseMode {
  kStrict,  // every element must satisfy the canvas invariants
  kRaw,     // grammar only; geometry is left for validate_layout
};

/// Throws ParseError (with a 1-based line number) on any grammar error, and
/// in strict mode on the first element that violates the geometry rules.
LayoutDoc parse_layout_code(std::string_view text,
                            const ClassRegistry& registry = ClassRegistry::defaults(),
                            ParseMode mode = ParseMode::kStrict);

std::string serialize_layout_code(const LayoutDoc& doc);

ValidationReport validate_layout(const LayoutDoc& doc);

/// Intersects every element with the canvas and drops the ones that end up
/// empty. The result always validates.
LayoutDoc clip_to_canvas(const LayoutDoc& doc);

/// Whitespace-delimited token count; stands in for the backbone tokenizer.
std::size_t token_count(std::string_view text);

/// Keeps the first `max_tokens` whitespace tokens of `text`. If the cut
/// falls inside a line, that partial line is dropped as well, so truncated
/// design code never ends with half an element.
std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens);

}  // namespace layoutrev
