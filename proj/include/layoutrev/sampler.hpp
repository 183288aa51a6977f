#pragma once

// Training-example construction over revision trajectories. Every example
// names input state indices and a target index into one trajectory; the
// prompt is built from those indices later.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "layoutrev/trajectory.hpp"

namespace layoutrev {

enum class ExampleSetup { kDirectS0, kDirectSi, kHop, kSingleRevision, kMultiRevision };

std::string_view to_string(ExampleSetup setup);
ExampleSetup parse_example_setup(std::string_view text);

enum class SamplingStrategy {
  kDirect,          // S0 -> Sn
  kDirectIntermediate,  // Si -> Sn, i uniform in [0, n)
  kHopJThenI,
  kHopQuantized,
  kSingleRevision,
  kMultiRevision,
};

/// CLI names: direct, direct-i, hop-jti, hop-quant, single, multi.
std::string_view to_string(SamplingStrategy strategy);
SamplingStrategy parse_strategy(std::string_view text);

struct TrainingExample {
  ExampleSetup setup = ExampleSetup::kDirectS0;
  std::string trajectory_id;
  std::vector<std::size_t> input_indices;
  std::size_t target_index = 0;

  bool operator==(const TrainingExample&) const = default;
};

struct SamplerConfig {
  SamplingStrategy strategy = SamplingStrategy::kSingleRevision;
  std::size_t repeats = 10;
  double center_quantile = 0.9;
  double sigma_fraction = 0.05;
  std::size_t bucket_count = 5;
  std::size_t multi_rev_max = 20;
  std::uint64_t seed = 0;

  void check() const;
};

/// Throws std::invalid_argument when the trajectory breaks the index
/// contract of `ex.setup`.
void check_example(const TrainingExample& ex, const RevisionTrajectory& traj);

TrainingExample sample_direct(const RevisionTrajectory& traj, std::mt19937_64& rng,
                              bool use_intermediate);

/// j = clamp(round(N(q*n, sigma*n)), 1, n), then i uniform in [0, j).
TrainingExample sample_hop_j_then_i(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                    const SamplerConfig& cfg);

/// Picks buckets b_i < b_j uniformly, then one index inside each.
TrainingExample sample_hop_quantized(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                     const SamplerConfig& cfg);

/// Input [0, i] with i uniform over the intermediates 1..n-1; [0, 0] when n == 1.
TrainingExample sample_single_revision(const RevisionTrajectory& traj, std::mt19937_64& rng);

/// Input [0] followed by k sorted distinct intermediates, k uniform in
/// [0, min(multi_rev_max, n - 1)].
TrainingExample sample_multi_revision(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                      const SamplerConfig& cfg);

TrainingExample sample_example(const RevisionTrajectory& traj, std::mt19937_64& rng,
                               const SamplerConfig& cfg);

/// repeats x |corpus| examples, trajectory-major. Example (t, r) draws from
/// its own stream derived from (seed, t, r).
std::vector<TrainingExample> expand_corpus(const Corpus& corpus, const SamplerConfig& cfg);

std::string format_example_line(const TrainingExample& ex);
std::string format_examples(const std::vector<TrainingExample>& examples);
TrainingExample parse_example_line(std::string_view line);

}  // namespace layoutrev
