#include "layoutrev/render.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace layoutrev {

namespace {

constexpr const char* kDefaultPalette[] = {
    "e6194b", "3cb44b", "ffe119", "4363d8", "f58231", "911eb4", "42d4f4",
    "f032e6", "bfef45", "fabed4", "469990", "dcbeff", "9a6324", "fffac8",
    "800000", "aaffc3", "808000", "ffd8b1", "000075", "a9a9a9"};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t tab = line.find('\t', pos);
    out.push_back(line.substr(pos, tab == std::string_view::npos ? line.npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return out;
}

void fill_rect(Bitmap& bm, int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = y0; y < y1; ++y) {
    std::uint8_t* row = bm.pixels.data() + (static_cast<std::size_t>(y) * bm.width + x0) * 4;
    for (int x = x0; x < x1; ++x) {
      row[0] = c.r;
      row[1] = c.g;
      row[2] = c.b;
      row[3] = 255;
      row += 4;
    }
  }
}

}  // namespace

std::string to_hex(Rgb c) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t v : {c.r, c.g, c.b}) {
    out.push_back(digits[v >> 4]);
    out.push_back(digits[v & 15]);
  }
  return out;
}

Rgb parse_rgb_hex(std::string_view hex) {
  if (!hex.empty() && hex.front() == '#') hex.remove_prefix(1);
  if (hex.size() != 6) throw std::invalid_argument("bad rgb hex '" + std::string(hex) + "'");
  std::uint8_t ch[3];
  for (int i = 0; i < 3; ++i) {
    auto [ptr, ec] = std::from_chars(hex.data() + 2 * i, hex.data() + 2 * i + 2, ch[i], 16);
    if (ec != std::errc() || ptr != hex.data() + 2 * i + 2) {
      throw std::invalid_argument("bad rgb hex '" + std::string(hex) + "'");
    }
  }
  return {ch[0], ch[1], ch[2]};
}

Bitmap::Bitmap(int w, int h)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 4, 0) {}

Rgb Bitmap::at(int x, int y) const {
  const std::uint8_t* p = pixels.data() + (static_cast<std::size_t>(y) * width + x) * 4;
  return {p[0], p[1], p[2]};
}

Rgb ColorLegend::color(std::uint16_t class_id) const {
  auto it = colors_.find(class_id);
  if (it == colors_.end()) {
    throw std::out_of_range("no legend color for class id " + std::to_string(class_id));
  }
  return it->second;
}

void ColorLegend::check_against(const ClassRegistry& registry) const {
  std::set<Rgb> seen{background_};
  for (const ElementClass& cls : registry.classes()) {
    auto it = colors_.find(cls.id);
    if (it == colors_.end()) throw std::invalid_argument("legend misses class " + cls.name);
    if (!seen.insert(it->second).second) {
      throw std::invalid_argument("legend color for " + cls.name + " is not distinct");
    }
  }
}

ClassConfig parse_class_config(std::string_view text) {
  ClassConfig config;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    auto fields = split_tabs(line);
    try {
      if (fields.size() == 2 && fields[0] == "background") {
        config.legend.set_background(parse_rgb_hex(fields[1]));
        continue;
      }
      if (fields.size() != 3) throw std::invalid_argument("expected id<TAB>NAME<TAB>rgb_hex");
      unsigned id = 0;
      auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
      if (ec != std::errc() || ptr != fields[0].data() + fields[0].size() || id > 0xffff) {
        throw std::invalid_argument("bad class id '" + std::string(fields[0]) + "'");
      }
      config.registry.add({static_cast<std::uint16_t>(id), std::string(fields[1])});
      config.legend.set(static_cast<std::uint16_t>(id), parse_rgb_hex(fields[2]));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("class config line " + std::to_string(line_no) + ": " +
                                  e.what());
    }
  }
  config.legend.check_against(config.registry);
  return config;
}

ClassConfig load_class_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open class config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_class_config(buf.str());
}

const ClassConfig& default_class_config() {
  static const ClassConfig config = [] {
    ClassConfig c;
    c.registry = ClassRegistry::defaults();
    for (const ElementClass& cls : c.registry.classes()) {
      c.legend.set(cls.id, parse_rgb_hex(kDefaultPalette[cls.id]));
    }
    c.legend.check_against(c.registry);
    return c;
  }();
  return config;
}

std::string format_class_config(const ClassConfig& config) {
  std::string out = "# id\tNAME\trgb_hex\n";
  if (config.legend.background() != Rgb{255, 255, 255}) {
    out += "background\t" + to_hex(config.legend.background()) + "\n";
  }
  for (const ElementClass& cls : config.registry.classes()) {
    out += std::to_string(cls.id) + "\t" + cls.name + "\t" +
           to_hex(config.legend.color(cls.id)) + "\n";
  }
  return out;
}

Rgb darken(Rgb c) {
  return {static_cast<std::uint8_t>(c.r * 3 / 4), static_cast<std::uint8_t>(c.g * 3 / 4),
          static_cast<std::uint8_t>(c.b * 3 / 4)};
}

Bitmap render(const LayoutDoc& doc, const ColorLegend& legend, int scale, RenderMode mode) {
  if (scale < 1) throw std::invalid_argument("render scale must be positive");
  const auto pixels = static_cast<std::int64_t>(doc.canvas_w) * doc.canvas_h * scale * scale;
  if (pixels > kMaxRenderPixels) {
    throw std::invalid_argument("render of " + std::to_string(pixels) + " pixels exceeds limit");
  }
  const LayoutDoc* src = &doc;
  LayoutDoc clipped;
  if (mode == RenderMode::kStrict) {
    ValidationReport report = validate_layout(doc);
    if (!report.ok()) {
      throw std::invalid_argument("cannot render invalid layout: element " +
                                  std::to_string(report.violations.front().element) + ": " +
                                  report.violations.front().message);
    }
  } else {
    clipped = clip_to_canvas(doc);
    src = &clipped;
  }

  Bitmap bm(src->canvas_w * scale, src->canvas_h * scale);
  fill_rect(bm, 0, 0, bm.width, bm.height, legend.background());
  for (const Element& e : src->elements) {
    Rgb fill = legend.color(e.cls.id);
    Rgb edge = darken(fill);
    int x0 = e.x * scale;
    int y0 = e.y * scale;
    int x1 = (e.x + e.w) * scale;
    int y1 = (e.y + e.h) * scale;
    fill_rect(bm, x0, y0, x1, y1, edge);
    if (x1 - x0 > 2 && y1 - y0 > 2) fill_rect(bm, x0 + 1, y0 + 1, x1 - 1, y1 - 1, fill);
  }
  return bm;
}

}  // namespace layoutrev
