#include "layoutrev/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace layoutrev {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(TrajectorySource source) {
  switch (source) {
    case TrajectorySource::kHuman: return "human";
    case TrajectorySource::kSynthetic: return "synthetic";
    case TrajectorySource::kModel: return "model";
  }
  return "synthetic";
}

TrajectorySource parse_source(std::string_view text) {
  if (text == "human") return TrajectorySource::kHuman;
  if (text == "synthetic") return TrajectorySource::kSynthetic;
  if (text == "model") return TrajectorySource::kModel;
  throw std::invalid_argument("unknown trajectory source '" + std::string(text) + "'");
}

void check_trajectory(const RevisionTrajectory& t) {
  if (t.states.size() < 2) {
    throw std::invalid_argument("trajectory " + t.id + " has fewer than two states");
  }
  for (std::size_t i = 0; i < t.states.size(); ++i) {
    ValidationReport r = validate_layout(t.states[i]);
    if (!r.ok()) {
      throw std::invalid_argument("trajectory " + t.id + " state " + std::to_string(i) + ": " +
                                  r.violations.front().message);
    }
  }
}

std::string format_trajectory_line(const RevisionTrajectory& t) {
  ordered_json j;
  j["id"] = t.id;
  j["prompt"] = t.prompt;
  j["source"] = to_string(t.source);
  ordered_json states = ordered_json::array();
  for (const LayoutDoc& s : t.states) states.push_back(serialize_layout_code(s));
  j["states"] = std::move(states);
  return j.dump();
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (const RevisionTrajectory& t : corpus.trajectories) {
    out += format_trajectory_line(t);
    out.push_back('\n');
  }
  return out;
}

Corpus parse_corpus(std::string_view jsonl, const ClassRegistry& registry, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusError(line_no, std::string("malformed record: ") + e.what());
    }
    RevisionTrajectory t;
    try {
      if (!j.is_object()) throw CorpusError(line_no, "record is not an object");
      t.id = j.at("id").get<std::string>();
      t.prompt = j.at("prompt").get<std::string>();
      t.source = parse_source(j.at("source").get<std::string>());
      const auto& states = j.at("states");
      if (!states.is_array()) throw CorpusError(line_no, "states is not an array");
      for (std::size_t i = 0; i < states.size(); ++i) {
        try {
          t.states.push_back(parse_layout_code(states[i].get<std::string>(), registry));
        } catch (const ParseError& e) {
          throw CorpusError(line_no, "trajectory " + t.id + " state " + std::to_string(i) +
                                         ": " + e.what());
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError(line_no, std::string("malformed record: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw CorpusError(line_no, e.what());
    }
    if (t.states.size() < 2) {
      throw CorpusError(line_no, "trajectory " + t.id + " has fewer than two states");
    }
    if (!ids.insert(t.id).second) throw CorpusError(line_no, "duplicate trajectory id " + t.id);
    corpus.trajectories.push_back(std::move(t));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const ClassRegistry& registry, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), registry, split);
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  out << format_corpus(corpus);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void SynthConfig::check(const ClassRegistry& registry) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("SynthConfig: " + what); };
  if (registry.size() == 0) fail("empty class registry");
  if (canvas_w < 96 || canvas_h < 160) fail("canvas smaller than 96x160");
  if (canvas_w > kMaxCanvasExtent || canvas_h > kMaxCanvasExtent) fail("canvas too large");
  if (grid < 1) fail("grid must be positive");
  if (min_elements < 1 || min_elements > max_elements) fail("element count range is empty");
  if (min_states < 2 || min_states > max_states) fail("state count range is empty or below 2");
  if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be a finite nonnegative number");
  if (jitter < 0) fail("jitter must be nonnegative");
  for (double p : {drop_prob, duplicate_prob, revert_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0, 1]");
  }
  if (min_experiments < 0 || min_experiments > max_experiments) {
    fail("experiment count range is empty");
  }
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return std::mt19937_64(seq);
}

namespace {

constexpr std::array kPrompts = {
    "a music player with playlist controls",
    "a food delivery checkout page",
    "a fitness tracker daily summary",
    "a weather forecast for the week",
    "a photo gallery with albums",
    "a messaging inbox",
    "a banking account overview",
    "a recipe detail page",
    "a travel booking search form",
    "a settings screen with toggles",
    "a news reader home feed",
    "a calendar day view",
    "a shopping cart",
    "a sign-in form",
    "a podcast episode list",
    "a smart home device dashboard",
};

struct Rect {
  int x, y, w, h;
};

class Generator {
 public:
  Generator(std::mt19937_64& rng, const SynthConfig& cfg, const ClassRegistry& registry)
      : rng_(rng), cfg_(cfg), registry_(registry) {}

  RevisionTrajectory run(std::string id);

 private:
  struct Core {
    Element final;
    Rect start;         // geometry in S0 (or on first appearance)
    bool dropped = false;
    double appear = 0;  // first appearance time for dropped elements
    double fix = 0;     // time of the corrective move to the final geometry
    bool reverts = false;
    double revert_from = 0, revert_to = 0;
    Rect revert_rect{};
  };
  struct Transient {
    Element element;
    double from = 0, to = 0;  // present for from <= t < to
  };

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool chance(double p) { return p > 0.0 && std::bernoulli_distribution(std::min(1.0, p))(rng_); }

  ElementClass pick_class(std::initializer_list<const char*> names) {
    std::vector<const ElementClass*> pool;
    for (const char* n : names) {
      if (const ElementClass* c = registry_.find(n)) pool.push_back(c);
    }
    if (pool.empty()) {
      auto all = registry_.classes();
      return all[static_cast<std::size_t>(uniform_int(0, static_cast<int>(all.size()) - 1))];
    }
    return *pool[static_cast<std::size_t>(uniform_int(0, static_cast<int>(pool.size()) - 1))];
  }

  int pick(std::initializer_list<int> values) {
    auto it = values.begin();
    std::advance(it, uniform_int(0, static_cast<int>(values.size()) - 1));
    return *it;
  }

  int snap_down(int v) const { return v / cfg_.grid * cfg_.grid; }

  Rect fit(Rect r) const {
    r.w = std::clamp(r.w, 1, cfg_.canvas_w);
    r.h = std::clamp(r.h, 1, cfg_.canvas_h);
    r.x = std::clamp(r.x, 0, cfg_.canvas_w - r.w);
    r.y = std::clamp(r.y, 0, cfg_.canvas_h - r.h);
    return r;
  }

  Rect jittered(const Element& e, int amplitude) {
    if (amplitude <= 0) return {e.x, e.y, e.w, e.h};
    return fit({e.x + uniform_int(-amplitude, amplitude), e.y + uniform_int(-amplitude, amplitude),
                std::max(cfg_.grid, e.w + uniform_int(-amplitude, amplitude)),
                std::max(cfg_.grid, e.h + uniform_int(-amplitude, amplitude))});
  }

  int amplitude_at(double t) const {
    return static_cast<int>(std::lround(cfg_.jitter * cfg_.noise * std::max(0.0, 1.0 - t)));
  }

  static Element with_rect(Element e, Rect r) {
    e.x = r.x;
    e.y = r.y;
    e.w = r.w;
    e.h = r.h;
    return e;
  }

  std::vector<Element> final_layout();
  LayoutDoc state_at(double t) const;

  std::mt19937_64& rng_;
  const SynthConfig& cfg_;
  const ClassRegistry& registry_;
  std::vector<Core> core_;
  std::vector<Transient> transients_;
};

std::vector<Element> Generator::final_layout() {
  const int cw = cfg_.canvas_w;
  const int ch = cfg_.canvas_h;
  const int margin = 2 * cfg_.grid;
  const int content_w = cw - 2 * margin;
  const int target = uniform_int(cfg_.min_elements, cfg_.max_elements);

  std::vector<Element> out;
  auto push = [&](ElementClass cls, Rect r) {
    Element e;
    e.cls = std::move(cls);
    out.push_back(with_rect(std::move(e), fit(r)));
  };

  int top = margin;
  int bottom = ch - margin;
  const int bar_h = 7 * cfg_.grid;
  if (target >= 3 && chance(0.7)) {
    push(pick_class({"APP_BAR", "TOOLBAR"}), {0, 0, cw, bar_h});
    top = bar_h + margin;
  }
  bool nav = target - static_cast<int>(out.size()) >= 3 && chance(0.5);
  if (nav) bottom = ch - bar_h - margin;

  int y = top;
  const int reserve_per_row = 3 * cfg_.grid + 2 * cfg_.grid;
  while (static_cast<int>(out.size()) + (nav ? 1 : 0) < target) {
    int remaining = target - static_cast<int>(out.size()) - (nav ? 1 : 0);
    int rows_after = (remaining - 1) / 2;
    int allowed = bottom - y - rows_after * reserve_per_row;
    if (allowed < cfg_.grid) break;

    int kind = remaining >= 2 ? uniform_int(0, 2) : 0;
    if (kind == 0) {
      int which = uniform_int(0, 5);
      ElementClass cls;
      int h = 0;
      switch (which) {
        case 0: cls = pick_class({"IMAGE"}); h = pick({120, 160, 200}); break;
        case 1: cls = pick_class({"CARD"}); h = pick({96, 120, 160}); break;
        case 2: cls = pick_class({"TEXT"}); h = pick({24, 32, 48}); break;
        case 3: cls = pick_class({"LIST_ITEM"}); h = pick({56, 64, 72}); break;
        case 4: cls = pick_class({"TEXT_FIELD"}); h = pick({48, 56}); break;
        default: cls = pick_class({"SLIDER", "DIVIDER"}); h = pick({8, 24, 32}); break;
      }
      h = std::min(h, snap_down(allowed));
      if (h < cfg_.grid) break;
      push(cls, {margin, y, content_w, h});
      y += h;
    } else if (kind == 1) {
      ElementClass cls = pick_class({"BUTTON", "CHIP", "CHECKBOX", "SWITCH", "TAB"});
      int h = std::min(pick({32, 40, 48}), snap_down(allowed));
      if (h < cfg_.grid) break;
      int half = snap_down((content_w - margin) / 2);
      push(cls, {margin, y, half, h});
      push(cls, {margin + half + margin, y, half, h});
      y += h;
    } else {
      int h = std::min(40, snap_down(allowed));
      if (h < cfg_.grid) break;
      push(pick_class({"ICON", "AVATAR"}), {margin, y, h, h});
      push(pick_class({"TEXT"}), {margin + h + margin, y, content_w - h - margin, h});
      y += h;
    }
    y += pick({8, 16});
  }
  if (nav) push(pick_class({"NAV_BAR", "TAB"}), {0, ch - bar_h, cw, bar_h});
  return out;
}

LayoutDoc Generator::state_at(double t) const {
  LayoutDoc doc;
  doc.canvas_w = cfg_.canvas_w;
  doc.canvas_h = cfg_.canvas_h;
  for (const Core& c : core_) {
    if (c.dropped && t < c.appear) continue;
    Element e = c.final;
    if (c.reverts && t >= c.revert_from && t < c.revert_to) {
      e = with_rect(e, c.revert_rect);
    } else if (t < c.fix) {
      // Halfway to the fix the designer nudges the element part of the way.
      double half = c.appear + 0.5 * (c.fix - c.appear);
      Rect r = c.start;
      if (t >= half) {
        r = {(r.x + e.x) / 2, (r.y + e.y) / 2, (r.w + e.w) / 2, (r.h + e.h) / 2};
      }
      e = with_rect(e, r);
    }
    doc.elements.push_back(std::move(e));
  }
  for (const Transient& tr : transients_) {
    if (t >= tr.from && t < tr.to) doc.elements.push_back(tr.element);
  }
  return doc;
}

RevisionTrajectory Generator::run(std::string id) {
  RevisionTrajectory traj;
  traj.id = std::move(id);
  traj.source = TrajectorySource::kSynthetic;
  traj.prompt = kPrompts[static_cast<std::size_t>(uniform_int(0, static_cast<int>(kPrompts.size()) - 1))];

  const int state_count = uniform_int(cfg_.min_states, cfg_.max_states);
  const double noise = cfg_.noise;
  const int amp0 = amplitude_at(0.0);

  for (Element& e : final_layout()) {
    Core c;
    c.final = e;
    c.dropped = chance(cfg_.drop_prob * noise);
    c.appear = c.dropped ? uniform(0.1, 0.7) : 0.0;
    c.start = jittered(e, c.dropped ? amplitude_at(c.appear) : amp0);
    c.fix = std::max(uniform(0.05, 0.85), c.appear);
    c.reverts = c.fix < 0.75 && chance(cfg_.revert_prob * noise);
    if (c.reverts) {
      c.revert_from = uniform(c.fix, 0.8);
      c.revert_to = uniform(c.revert_from + 0.05, 0.9);
      c.revert_rect = jittered(e, std::max(cfg_.grid, amplitude_at(c.revert_from)));
    }
    core_.push_back(std::move(c));
  }

  for (const Core& c : core_) {
    if (c.dropped || !chance(cfg_.duplicate_prob * noise)) continue;
    Transient d;
    d.element = with_rect(c.final, fit({c.start.x + cfg_.grid, c.start.y + cfg_.grid,
                                        c.start.w, c.start.h}));
    d.from = 0.0;
    d.to = uniform(0.1, 0.6);
    transients_.push_back(std::move(d));
  }

  const int experiments = static_cast<int>(
      std::lround(noise * uniform_int(cfg_.min_experiments, cfg_.max_experiments)));
  const int content_w = cfg_.canvas_w - 4 * cfg_.grid;
  for (int k = 0; k < experiments; ++k) {
    Transient x;
    x.element.cls = pick_class({"IMAGE", "CARD", "BUTTON", "DIALOG", "MENU", "CHIP", "FAB", "AVATAR",
                                "ICON", "TEXT"});
    int w = snap_down(uniform_int(80, std::max(80, content_w)));
    int h = snap_down(uniform_int(40, 200));
    Rect r = fit({snap_down(uniform_int(0, std::max(0, cfg_.canvas_w - w))),
                  snap_down(uniform_int(0, std::max(0, cfg_.canvas_h - h))), w, h});
    x.element = with_rect(x.element, r);
    x.from = uniform(0.12, 0.35);
    x.to = std::min(0.85, x.from + uniform(0.15, 0.35));
    transients_.push_back(std::move(x));
  }

  const double n = static_cast<double>(state_count - 1);
  for (int i = 0; i < state_count; ++i) {
    traj.states.push_back(i == state_count - 1 ? state_at(1.0) : state_at(i / n));
  }
  return traj;
}

}  // namespace

RevisionTrajectory synthesize_trajectory(std::mt19937_64& rng, const SynthConfig& cfg,
                                         std::string id, const ClassRegistry& registry) {
  cfg.check(registry);
  return Generator(rng, cfg, registry).run(std::move(id));
}

Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const SynthConfig& cfg,
                         const ClassRegistry& registry) {
  cfg.check(registry);
  Corpus corpus;
  corpus.trajectories.reserve(count);
  char id[32];
  for (std::size_t k = 0; k < count; ++k) {
    std::mt19937_64 rng = derived_rng(seed, k);
    std::snprintf(id, sizeof id, "syn-%06zu", k);
    corpus.trajectories.push_back(Generator(rng, cfg, registry).run(id));
  }
  return corpus;
}

std::size_t stage_bucket(std::size_t index, std::size_t state_count, std::size_t bucket_count) {
  if (state_count == 0 || index >= state_count) {
    throw std::out_of_range("stage_bucket: index outside trajectory");
  }
  return index * bucket_count / state_count;
}

StageProfile stage_profile(const Corpus& corpus, const StageProfileConfig& cfg,
                           const ClassRegistry& registry) {
  std::vector<LayoutDoc> finals;
  finals.reserve(corpus.trajectories.size());
  for (const RevisionTrajectory& t : corpus.trajectories) finals.push_back(t.final_state());
  return stage_profile(corpus, finals, cfg, registry);
}

StageProfile stage_profile(const Corpus& corpus, std::span<const LayoutDoc> reference,
                           const StageProfileConfig& cfg, const ClassRegistry& registry) {
  if (corpus.trajectories.empty()) throw std::invalid_argument("stage_profile: empty corpus");
  if (cfg.bucket_count == 0) throw std::invalid_argument("stage_profile: zero buckets");

  std::mt19937_64 rng = derived_rng(cfg.seed, 0x5747);
  std::vector<std::vector<FeatureVector>> buckets(cfg.bucket_count);
  for (const RevisionTrajectory& t : corpus.trajectories) {
    const std::size_t count = t.states.size();
    for (std::size_t b = 0; b < cfg.bucket_count; ++b) {
      // Smallest index i with floor(i * B / count) >= b.
      std::size_t lo = (b * count + cfg.bucket_count - 1) / cfg.bucket_count;
      std::size_t hi = ((b + 1) * count + cfg.bucket_count - 1) / cfg.bucket_count;
      hi = std::min(hi, count);
      if (lo >= hi) continue;
      std::size_t pick = std::uniform_int_distribution<std::size_t>(lo, hi - 1)(rng);
      buckets[b].push_back(embed(t.states[pick], registry, cfg.embed));
    }
  }

  std::vector<FeatureVector> ref = embed_all(reference, registry, cfg.embed);
  StageProfile profile;
  for (std::size_t b = 0; b < cfg.bucket_count; ++b) {
    if (buckets[b].size() < cfg.min_samples || ref.size() < cfg.min_samples) {
      throw std::invalid_argument("stage_profile: bucket " + std::to_string(b) + " has " +
                                  std::to_string(buckets[b].size()) + " samples, need " +
                                  std::to_string(cfg.min_samples));
    }
    FidResult r = fid(buckets[b], ref, cfg.fid);
    profile.bucket_fids.push_back(r.score);
    profile.sample_counts.push_back(buckets[b].size());
    profile.details.push_back(std::move(r));
  }
  return profile;
}

}  // namespace layoutrev
