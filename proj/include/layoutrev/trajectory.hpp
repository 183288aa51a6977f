#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/layout.hpp"
#include "layoutrev/metrics.hpp"

namespace layoutrev {

enum class TrajectorySource { kHuman, kSynthetic, kModel };

std::string_view to_string(TrajectorySource source);
TrajectorySource parse_source(std::string_view text);

/// A prompt plus the layouts S0..Sn a designer passed through; Sn is the
/// final design.
struct RevisionTrajectory {
  std::string id;
  std::string prompt;
  TrajectorySource source = TrajectorySource::kSynthetic;
  std::vector<LayoutDoc> states;

  /// Number of revision edits (states.size() - 1).
  std::size_t edits() const { return states.size() - 1; }
  const LayoutDoc& initial() const { return states.front(); }
  const LayoutDoc& final_state() const { return states.back(); }

  bool operator==(const RevisionTrajectory&) const = default;
};

/// Throws std::invalid_argument if fewer than two states or any state is invalid.
void check_trajectory(const RevisionTrajectory& t);

enum class Split { kTrain, kTest };

struct Corpus {
  std::vector<RevisionTrajectory> trajectories;
  Split split = Split::kTrain;

  bool operator==(const Corpus&) const = default;
};

class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::size_t line, const std::string& reason)
      : std::runtime_error("corpus line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// JSON-lines corpus: one {"id","prompt","source","states":[dsl,...]} object
// per line. See docs/corpus.md.
std::string format_trajectory_line(const RevisionTrajectory& t);
std::string format_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view jsonl,
                    const ClassRegistry& registry = ClassRegistry::defaults(),
                    Split split = Split::kTrain);
Corpus load_corpus(const std::filesystem::path& path,
                   const ClassRegistry& registry = ClassRegistry::defaults(),
                   Split split = Split::kTrain);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SynthConfig {
  int canvas_w = kDefaultCanvasWidth;
  int canvas_h = kDefaultCanvasHeight;
  int grid = 8;
  int min_elements = 5;
  int max_elements = 12;
  int min_states = 12;  // S0..Sn inclusive
  int max_states = 40;
  // Global perturbation scale; 0 makes every state equal to the final one.
  double noise = 1.0;
  // Initial position/size jitter in canvas units; later jitter decays
  // linearly with trajectory progress.
  int jitter = 24;
  double drop_prob = 0.2;
  double duplicate_prob = 0.15;
  int min_experiments = 3;
  int max_experiments = 8;
  // Chance that an already corrected element is moved off again and fixed later.
  double revert_prob = 0.3;

  /// Throws std::invalid_argument on empty or inconsistent ranges.
  void check(const ClassRegistry& registry) const;
};

/// Builds a clean grid-aligned final layout, perturbs it into S0, and fills
/// the states in between with corrective moves, reverted experiments and
/// duplicate clean-up.
RevisionTrajectory synthesize_trajectory(std::mt19937_64& rng, const SynthConfig& cfg,
                                         std::string id,
                                         const ClassRegistry& registry = ClassRegistry::defaults());

/// Trajectory k uses its own stream seeded from (seed, k).
Corpus synthesize_corpus(std::size_t count, std::uint64_t seed, const SynthConfig& cfg = {},
                         const ClassRegistry& registry = ClassRegistry::defaults());

/// floor(index * bucket_count / state_count)
std::size_t stage_bucket(std::size_t index, std::size_t state_count, std::size_t bucket_count);

struct StageProfileConfig {
  std::size_t bucket_count = 5;
  std::uint64_t seed = 0;
  std::size_t min_samples = 2;
  FidConfig fid;
  EmbedConfig embed;
};

struct StageProfile {
  std::vector<double> bucket_fids;
  std::vector<std::size_t> sample_counts;
  std::vector<FidResult> details;
};

/// FID of each trajectory stage against the population of final states.
/// One state per trajectory per bucket; trajectories too short to populate
/// a bucket simply do not contribute to it.
StageProfile stage_profile(const Corpus& corpus, const StageProfileConfig& cfg = {},
                           const ClassRegistry& registry = ClassRegistry::defaults());
StageProfile stage_profile(const Corpus& corpus, std::span<const LayoutDoc> reference,
                           const StageProfileConfig& cfg = {},
                           const ClassRegistry& registry = ClassRegistry::defaults());

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

}  // namespace layoutrev
