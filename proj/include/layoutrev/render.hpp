#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/layout.hpp"

namespace layoutrev {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  bool operator==(const Rgb&) const = default;
  auto operator<=>(const Rgb&) const = default;
};

std::string to_hex(Rgb c);
/// Accepts "RRGGBB" or "#RRGGBB".
Rgb parse_rgb_hex(std::string_view hex);

/// Row-major RGBA8 pixels.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Bitmap() = default;
  Bitmap(int w, int h);

  Rgb at(int x, int y) const;
  bool operator==(const Bitmap&) const = default;
};

class ColorLegend {
 public:
  ColorLegend() = default;
  explicit ColorLegend(Rgb background) : background_(background) {}

  void set(std::uint16_t class_id, Rgb color) { colors_[class_id] = color; }
  void set_background(Rgb color) { background_ = color; }
  Rgb color(std::uint16_t class_id) const;
  bool contains(std::uint16_t class_id) const { return colors_.contains(class_id); }
  Rgb background() const { return background_; }
  const std::map<std::uint16_t, Rgb>& colors() const { return colors_; }

  /// Throws std::invalid_argument unless every registry class has a color
  /// and all class colors (and the background) are pairwise distinct.
  void check_against(const ClassRegistry& registry) const;

 private:
  Rgb background_{255, 255, 255};
  std::map<std::uint16_t, Rgb> colors_;
};

/// Registry and legend loaded together from a `id<TAB>NAME<TAB>rgb_hex` file.
struct ClassConfig {
  ClassRegistry registry;
  ColorLegend legend;
};

ClassConfig parse_class_config(std::string_view text);
ClassConfig load_class_config(const std::filesystem::path& path);
const ClassConfig& default_class_config();
std::string format_class_config(const ClassConfig& config);

/// Border shade used for the 1px outline of each element.
Rgb darken(Rgb c);

inline constexpr std::int64_t kMaxRenderPixels = std::int64_t{1} << 26;

enum class RenderMode {
  kStrict,  // invalid documents are rejected
  kClip,    // out-of-bounds rectangles are clipped to the canvas
};

/// Paints the background, then every element in order as a solid rectangle
/// with a 1px darker border. Output is (scale * canvas_w) x (scale * canvas_h).
Bitmap render(const LayoutDoc& doc, const ColorLegend& legend, int scale = 1,
              RenderMode mode = RenderMode::kStrict);

/// Deterministic PNG (RGBA8, no filtering, zlib level 9, no ancillary chunks).
std::string encode_png(const Bitmap& bitmap);

}  // namespace layoutrev
