#include "layoutrev/layout.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>

namespace layoutrev {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits a line into bare fields plus an optional trailing quoted label.
struct LineFields {
  std::vector<std::string_view> fields;
  std::optional<std::string> label;
};

LineFields split_line(std::string_view line, std::size_t line_no) {
  LineFields out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (is_space(line[i])) {
      ++i;
      continue;
    }
    if (line[i] == '"') {
      std::string label;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '\\') {
          if (i >= line.size()) break;
          char e = line[i++];
          if (e != '"' && e != '\\') {
            throw ParseError(line_no, "bad escape in label");
          }
          label.push_back(e);
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          label.push_back(c);
        }
      }
      if (!closed) throw ParseError(line_no, "unterminated label");
      if (!trim(line.substr(i)).empty()) {
        throw ParseError(line_no, "trailing text after label");
      }
      out.label = std::move(label);
      return out;
    }
    std::size_t start = i;
    while (i < line.size() && !is_space(line[i]) && line[i] != '"') ++i;
    out.fields.push_back(line.substr(start, i - start));
  }
  return out;
}

int parse_int(std::string_view field, std::size_t line_no, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec == std::errc::result_out_of_range) {
    throw ParseError(line_no, std::string(what) + " out of range: '" + std::string(field) + "'");
  }
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, std::string("non-integer ") + what + ": '" + std::string(field) + "'");
  }
  return value;
}

void append_label(std::string& out, const std::string& label) {
  out.push_back('"');
  for (char c : label) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
}

void check_element(const Element& e, std::size_t index, int canvas_w, int canvas_h,
                   std::vector<Violation>& out) {
  auto add = [&](std::string rule, std::string message) {
    out.push_back({index, std::move(rule), std::move(message)});
  };
  if (e.w < 1) add("nonpositive-size", "nonpositive width " + std::to_string(e.w));
  if (e.h < 1) add("nonpositive-size", "nonpositive height " + std::to_string(e.h));
  if (e.x < 0) add("negative-coordinate", "negative x " + std::to_string(e.x));
  if (e.y < 0) add("negative-coordinate", "negative y " + std::to_string(e.y));
  if (static_cast<std::int64_t>(e.x) + e.w > canvas_w) {
    add("out-of-bounds", "x + w = " + std::to_string(static_cast<std::int64_t>(e.x) + e.w) +
                             " exceeds canvas width " + std::to_string(canvas_w));
  }
  if (static_cast<std::int64_t>(e.y) + e.h > canvas_h) {
    add("out-of-bounds", "y + h = " + std::to_string(static_cast<std::int64_t>(e.y) + e.h) +
                             " exceeds canvas height " + std::to_string(canvas_h));
  }
}

}  // namespace

ParseError::ParseError(std::size_t line, const std::string& reason)
    : std::runtime_error("line " + std::to_string(line) + ": " + reason),
      line_(line),
      reason_(reason) {}

bool is_valid_class_name(std::string_view name) {
  if (name.empty() || name[0] < 'A' || name[0] > 'Z') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  });
}

void ClassRegistry::add(ElementClass cls) {
  if (!is_valid_class_name(cls.name)) {
    throw std::invalid_argument("invalid class name '" + cls.name + "'");
  }
  if (by_id_.contains(cls.id)) {
    throw std::invalid_argument("duplicate class id " + std::to_string(cls.id));
  }
  if (by_name_.contains(cls.name)) {
    throw std::invalid_argument("duplicate class name " + cls.name);
  }
  by_id_.emplace(cls.id, classes_.size());
  by_name_.emplace(cls.name, classes_.size());
  classes_.push_back(std::move(cls));
}

const ElementClass* ClassRegistry::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  return it == by_name_.end() ? nullptr : &classes_[it->second];
}

const ElementClass* ClassRegistry::find_id(std::uint16_t id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &classes_[it->second];
}

std::optional<std::size_t> ClassRegistry::index_of(std::uint16_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const ClassRegistry& ClassRegistry::defaults() {
  static const ClassRegistry registry = [] {
    ClassRegistry r;
    const char* names[] = {"BUTTON",   "TEXT",    "IMAGE",  "ICON",   "TEXT_FIELD",
                           "CHECKBOX", "TOOLBAR", "LIST_ITEM", "CARD", "NAV_BAR",
                           "FAB",      "CHIP",    "SLIDER", "SWITCH", "DIVIDER",
                           "APP_BAR",  "TAB",     "DIALOG", "MENU",   "AVATAR"};
    std::uint16_t id = 0;
    for (const char* name : names) r.add({id++, name});
    return r;
  }();
  return registry;
}

LayoutDoc parse_layout_code(std::string_view text, const ClassRegistry& registry,
                            ParseMode mode) {
  LayoutDoc doc;
  bool have_canvas = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size() || line_no == 0) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;

    std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') {
      if (end == text.size()) break;
      continue;
    }

    LineFields parts = split_line(body, line_no);
    if (!have_canvas) {
      if (parts.fields.empty() || parts.fields[0] != "CANVAS") {
        throw ParseError(line_no, "missing CANVAS header");
      }
      if (parts.fields.size() != 3 || parts.label) {
        throw ParseError(line_no, "CANVAS expects 2 fields");
      }
      doc.canvas_w = parse_int(parts.fields[1], line_no, "canvas width");
      doc.canvas_h = parse_int(parts.fields[2], line_no, "canvas height");
      if (doc.canvas_w < 1 || doc.canvas_h < 1) {
        throw ParseError(line_no, "nonpositive canvas size");
      }
      if (doc.canvas_w > kMaxCanvasExtent || doc.canvas_h > kMaxCanvasExtent) {
        throw ParseError(line_no, "canvas larger than " + std::to_string(kMaxCanvasExtent));
      }
      have_canvas = true;
    } else {
      if (parts.fields.empty()) throw ParseError(line_no, "label without element");
      if (parts.fields[0] == "CANVAS") throw ParseError(line_no, "duplicate CANVAS header");
      if (parts.fields.size() != 5) {
        throw ParseError(line_no, "element expects 4 coordinates, got " +
                                      std::to_string(parts.fields.size() - 1));
      }
      const ElementClass* cls = registry.find(parts.fields[0]);
      if (cls == nullptr) {
        throw ParseError(line_no, "unknown class '" + std::string(parts.fields[0]) + "'");
      }
      Element e;
      e.cls = *cls;
      e.x = parse_int(parts.fields[1], line_no, "x");
      e.y = parse_int(parts.fields[2], line_no, "y");
      e.w = parse_int(parts.fields[3], line_no, "width");
      e.h = parse_int(parts.fields[4], line_no, "height");
      e.label = std::move(parts.label);
      if (mode == ParseMode::kStrict) {
        std::vector<Violation> found;
        check_element(e, doc.elements.size(), doc.canvas_w, doc.canvas_h, found);
        if (!found.empty()) throw ParseError(line_no, found.front().message);
      }
      doc.elements.push_back(std::move(e));
    }
    if (end == text.size()) break;
  }
  if (!have_canvas) throw ParseError(line_no == 0 ? 1 : line_no, "missing CANVAS header");
  return doc;
}

std::string serialize_layout_code(const LayoutDoc& doc) {
  std::string out = "CANVAS " + std::to_string(doc.canvas_w) + " " +
                    std::to_string(doc.canvas_h) + "\n";
  for (const Element& e : doc.elements) {
    out += e.cls.name;
    for (int v : {e.x, e.y, e.w, e.h}) {
      out.push_back(' ');
      out += std::to_string(v);
    }
    if (e.label) {
      out.push_back(' ');
      append_label(out, *e.label);
    }
    out.push_back('\n');
  }
  return out;
}

ValidationReport validate_layout(const LayoutDoc& doc) {
  ValidationReport report;
  for (std::size_t i = 0; i < doc.elements.size(); ++i) {
    check_element(doc.elements[i], i, doc.canvas_w, doc.canvas_h, report.violations);
  }
  return report;
}

LayoutDoc clip_to_canvas(const LayoutDoc& doc) {
  LayoutDoc out;
  out.canvas_w = doc.canvas_w;
  out.canvas_h = doc.canvas_h;
  for (const Element& e : doc.elements) {
    std::int64_t x0 = std::max<std::int64_t>(e.x, 0);
    std::int64_t y0 = std::max<std::int64_t>(e.y, 0);
    std::int64_t x1 = std::min<std::int64_t>(static_cast<std::int64_t>(e.x) + e.w, doc.canvas_w);
    std::int64_t y1 = std::min<std::int64_t>(static_cast<std::int64_t>(e.y) + e.h, doc.canvas_h);
    if (x1 <= x0 || y1 <= y0) continue;
    Element c = e;
    c.x = static_cast<int>(x0);
    c.y = static_cast<int>(y0);
    c.w = static_cast<int>(x1 - x0);
    c.h = static_cast<int>(y1 - y0);
    out.elements.push_back(std::move(c));
  }
  return out;
}

std::size_t token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::string truncate_to_tokens(std::string_view text, std::size_t max_tokens) {
  std::size_t count = 0;
  bool in_token = false;
  std::size_t cut = text.size();
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_space(text[i])) {
      in_token = false;
      continue;
    }
    if (!in_token) {
      in_token = true;
      if (++count > max_tokens) {
        cut = i;
        break;
      }
    }
  }
  if (cut == text.size()) return std::string(text);

  std::size_t line_start = text.rfind('\n', cut == 0 ? 0 : cut - 1);
  line_start = (line_start == std::string_view::npos || cut == 0) ? 0 : line_start + 1;
  return std::string(text.substr(0, line_start));
}

}  // namespace layoutrev
