#include "layoutrev/backend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "layoutrev/hash.hpp"

namespace layoutrev {

GenerationResult finish_generation(std::string text, const DecodingParams& decoding,
                                   const ClassRegistry& registry, std::string_view backend,
                                   std::chrono::microseconds latency) {
  GenerationResult out;
  out.code_text = truncate_to_tokens(text, decoding.max_tokens);
  out.latency = latency;
  out.backend = std::string(backend);
  try {
    LayoutDoc doc = parse_layout_code(out.code_text, registry, ParseMode::kRaw);
    ValidationReport report = validate_layout(doc);
    if (report.ok()) {
      out.parsed = std::move(doc);
    } else {
      out.violations = std::move(report.violations);
      out.parsed = clip_to_canvas(doc);
    }
  } catch (const ParseError& e) {
    out.parse_error = e.what();
  }
  return out;
}

LayoutDoc working_layout(const PromptBundle& bundle, const ClassRegistry& registry) {
  const PromptPart* code = bundle.last_code();
  if (code == nullptr) throw std::invalid_argument("prompt bundle has no code part");
  return parse_layout_code(code->payload, registry, ParseMode::kRaw);
}

void HeuristicConfig::check() const {
  if (grid < 1) throw std::invalid_argument("HeuristicConfig: grid must be >= 1");
  if (tolerance < 0) throw std::invalid_argument("HeuristicConfig: tolerance must be >= 0");
  if (!(jitter_per_temperature >= 0.0)) {
    throw std::invalid_argument("HeuristicConfig: jitter_per_temperature must be >= 0");
  }
  if (max_passes < 1) throw std::invalid_argument("HeuristicConfig: max_passes must be >= 1");
}

namespace {

int floor_div(int a, int b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0)) ? 1 : 0); }

// Nearest multiple of `grid`; an exact tie goes to the lower multiple.
int snap(int v, int grid) {
  int q = floor_div(v, grid);
  int r = v - q * grid;
  return 2 * r > grid ? (q + 1) * grid : q * grid;
}

bool near_miss(int a, int b, int tolerance) {
  int d = std::abs(a - b);
  return d > 0 && d <= tolerance;
}

// Single-linkage groups over sorted distinct values; every value maps to the
// smallest member of its group.
std::map<int, int> linkage_minimum(std::vector<int> values, int tolerance) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::map<int, int> out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    bool joins = k > 0 && values[k] - values[k - 1] <= tolerance;
    out[values[k]] = joins ? out[values[k - 1]] : values[k];
  }
  return out;
}

void snap_positions(LayoutDoc& doc, int grid) {
  for (Element& e : doc.elements) {
    e.x = snap(e.x, grid);
    e.y = snap(e.y, grid);
  }
}

void unify_sizes(LayoutDoc& doc, int tolerance) {
  std::map<std::uint16_t, std::vector<int>> widths;
  std::map<std::uint16_t, std::vector<int>> heights;
  for (const Element& e : doc.elements) {
    widths[e.cls.id].push_back(e.w);
    heights[e.cls.id].push_back(e.h);
  }
  std::map<std::uint16_t, std::map<int, int>> wmap;
  std::map<std::uint16_t, std::map<int, int>> hmap;
  for (auto& [id, ws] : widths) wmap[id] = linkage_minimum(ws, tolerance);
  for (auto& [id, hs] : heights) hmap[id] = linkage_minimum(hs, tolerance);
  for (Element& e : doc.elements) {
    e.w = wmap[e.cls.id][e.w];
    e.h = hmap[e.cls.id][e.h];
  }
}

void left_align(LayoutDoc& doc, int tolerance) {
  std::vector<int> xs;
  for (const Element& e : doc.elements) xs.push_back(e.x);
  auto m = linkage_minimum(xs, tolerance);
  for (Element& e : doc.elements) e.x = m[e.x];
}

void dedupe(LayoutDoc& doc) {
  std::vector<Element> kept;
  for (const Element& e : doc.elements) {
    if (std::find(kept.begin(), kept.end(), e) == kept.end()) kept.push_back(e);
  }
  doc.elements = std::move(kept);
}

void clip(LayoutDoc& doc, int grid) {
  // Keep snapped origins on the grid instead of dropping elements that the
  // snap pushed onto the far edge.
  const int max_x = ((doc.canvas_w - 1) / grid) * grid;
  const int max_y = ((doc.canvas_h - 1) / grid) * grid;
  for (Element& e : doc.elements) {
    e.x = std::min(e.x, max_x);
    e.y = std::min(e.y, max_y);
  }
  doc = clip_to_canvas(doc);
}

void jitter(LayoutDoc& doc, const HeuristicConfig& cfg, double temperature) {
  if (temperature <= 0.0 || doc.elements.empty()) return;
  const double fraction = std::min(1.0, cfg.jitter_per_temperature * temperature);
  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(doc.elements.size())));
  if (count == 0) return;
  const std::uint64_t h = content_hash64(serialize_layout_code(doc));
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> all(doc.elements.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  std::vector<std::size_t> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  std::uniform_int_distribution<int> move(0, 3);
  for (std::size_t k : picked) {
    Element& e = doc.elements[k];
    switch (move(rng)) {
      case 0: e.x -= cfg.grid; break;
      case 1: e.x += cfg.grid; break;
      case 2: e.y -= cfg.grid; break;
      default: e.y += cfg.grid; break;
    }
  }
}

}  // namespace

std::size_t alignment_cost(const LayoutDoc& doc, const HeuristicConfig& cfg) {
  std::size_t cost = 0;
  const auto& els = doc.elements;
  for (const Element& e : els) {
    cost += (e.x % cfg.grid != 0 ? 1 : 0) + (e.y % cfg.grid != 0 ? 1 : 0);
  }
  for (std::size_t a = 0; a < els.size(); ++a) {
    for (std::size_t b = a + 1; b < els.size(); ++b) {
      cost += near_miss(els[a].x, els[b].x, cfg.tolerance) ? 1 : 0;
      if (els[a].cls.id == els[b].cls.id) {
        cost += near_miss(els[a].w, els[b].w, cfg.tolerance) ? 1 : 0;
        cost += near_miss(els[a].h, els[b].h, cfg.tolerance) ? 1 : 0;
      }
    }
  }
  return cost;
}

LayoutDoc heuristic_revise(const LayoutDoc& doc, const HeuristicConfig& cfg, double temperature) {
  cfg.check();
  LayoutDoc cur = doc;
  jitter(cur, cfg, temperature);
  for (int pass = 0; pass < cfg.max_passes; ++pass) {
    LayoutDoc next = cur;
    snap_positions(next, cfg.grid);
    unify_sizes(next, cfg.tolerance);
    left_align(next, cfg.tolerance);
    dedupe(next);
    clip(next, cfg.grid);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

HeuristicReviser::HeuristicReviser(HeuristicConfig cfg, ClassRegistry registry)
    : cfg_(cfg), registry_(std::move(registry)) {
  cfg_.check();
}

GenerationResult HeuristicReviser::revise(const PromptBundle& bundle) const {
  auto start = std::chrono::steady_clock::now();
  LayoutDoc out = heuristic_revise(working_layout(bundle, registry_), cfg_,
                                   bundle.decoding.temperature);
  auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  return finish_generation(serialize_layout_code(out), bundle.decoding, registry_, name(), elapsed);
}

EchoReviser::EchoReviser(ClassRegistry registry) : registry_(std::move(registry)) {}

GenerationResult EchoReviser::revise(const PromptBundle& bundle) const {
  const PromptPart* code = bundle.last_code();
  if (code == nullptr) throw std::invalid_argument("prompt bundle has no code part");
  return finish_generation(code->payload, bundle.decoding, registry_, name(),
                           std::chrono::microseconds{0});
}

std::unique_ptr<ReviserBackend> make_backend(std::string_view name, std::uint64_t seed) {
  if (name == "heuristic") {
    HeuristicConfig cfg;
    cfg.seed = seed;
    return std::make_unique<HeuristicReviser>(cfg);
  }
  if (name == "echo") return std::make_unique<EchoReviser>();
  if (name == "remote") return std::make_unique<RemoteReviser>(RemoteConfig::from_env());
  throw std::invalid_argument("unknown backend '" + std::string(name) + "'");
}

}  // namespace layoutrev
