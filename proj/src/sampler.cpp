#include "layoutrev/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace layoutrev {

std::string_view to_string(ExampleSetup setup) {
  switch (setup) {
    case ExampleSetup::kDirectS0: return "direct_s0";
    case ExampleSetup::kDirectSi: return "direct_si";
    case ExampleSetup::kHop: return "hop";
    case ExampleSetup::kSingleRevision: return "single_rev";
    case ExampleSetup::kMultiRevision: return "multi_rev";
  }
  return "direct_s0";
}

ExampleSetup parse_example_setup(std::string_view text) {
  for (auto s : {ExampleSetup::kDirectS0, ExampleSetup::kDirectSi, ExampleSetup::kHop,
                 ExampleSetup::kSingleRevision, ExampleSetup::kMultiRevision}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown example setup '" + std::string(text) + "'");
}

std::string_view to_string(SamplingStrategy strategy) {
  switch (strategy) {
    case SamplingStrategy::kDirect: return "direct";
    case SamplingStrategy::kDirectIntermediate: return "direct-i";
    case SamplingStrategy::kHopJThenI: return "hop-jti";
    case SamplingStrategy::kHopQuantized: return "hop-quant";
    case SamplingStrategy::kSingleRevision: return "single";
    case SamplingStrategy::kMultiRevision: return "multi";
  }
  return "direct";
}

SamplingStrategy parse_strategy(std::string_view text) {
  for (auto s : {SamplingStrategy::kDirect, SamplingStrategy::kDirectIntermediate,
                 SamplingStrategy::kHopJThenI, SamplingStrategy::kHopQuantized,
                 SamplingStrategy::kSingleRevision, SamplingStrategy::kMultiRevision}) {
    if (to_string(s) == text) return s;
  }
  throw std::invalid_argument("unknown sampling strategy '" + std::string(text) + "'");
}

void SamplerConfig::check() const {
  if (!(center_quantile > 0.0 && center_quantile <= 1.0)) {
    throw std::invalid_argument("SamplerConfig: center_quantile must lie in (0, 1]");
  }
  if (!(sigma_fraction > 0.0) || !std::isfinite(sigma_fraction)) {
    throw std::invalid_argument("SamplerConfig: sigma_fraction must be positive");
  }
  if (bucket_count < 2) throw std::invalid_argument("SamplerConfig: need at least two buckets");
}

namespace {

std::size_t edits_of(const RevisionTrajectory& traj) {
  if (traj.states.size() < 2) {
    throw std::invalid_argument("trajectory " + traj.id + " has no revision edits");
  }
  return traj.edits();
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

TrainingExample make(ExampleSetup setup, const RevisionTrajectory& traj,
                     std::vector<std::size_t> inputs, std::size_t target) {
  return {setup, traj.id, std::move(inputs), target};
}

}  // namespace

void check_example(const TrainingExample& ex, const RevisionTrajectory& traj) {
  const std::size_t n = edits_of(traj);
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("example for " + traj.id + " (" + std::string(to_string(ex.setup)) +
                                "): " + why);
  };
  if (ex.input_indices.empty()) fail("no inputs");
  for (std::size_t i : ex.input_indices) {
    if (i > n) fail("input index out of range");
  }
  if (ex.target_index > n) fail("target index out of range");
  switch (ex.setup) {
    case ExampleSetup::kDirectS0:
      if (ex.input_indices != std::vector<std::size_t>{0} || ex.target_index != n) fail("not S0 -> Sn");
      break;
    case ExampleSetup::kDirectSi:
      if (ex.input_indices.size() != 1 || ex.input_indices[0] >= n || ex.target_index != n) {
        fail("not Si -> Sn with i < n");
      }
      break;
    case ExampleSetup::kHop:
      if (ex.input_indices.size() != 1 || ex.input_indices[0] >= ex.target_index) fail("i >= j");
      break;
    case ExampleSetup::kSingleRevision: {
      if (ex.input_indices.size() != 2 || ex.input_indices[0] != 0 || ex.target_index != n) {
        fail("not [0, i] -> Sn");
      }
      std::size_t i = ex.input_indices[1];
      if (n >= 2 ? (i < 1 || i > n - 1) : i != 0) fail("revision index is not an intermediate");
      break;
    }
    case ExampleSetup::kMultiRevision:
      if (ex.input_indices[0] != 0 || ex.target_index != n) fail("not [0, C...] -> Sn");
      for (std::size_t k = 1; k < ex.input_indices.size(); ++k) {
        std::size_t i = ex.input_indices[k];
        if (i < 1 || i > n - 1) fail("context index is not an intermediate");
        if (k > 1 && i <= ex.input_indices[k - 1]) fail("context not strictly increasing");
      }
      break;
  }
}

TrainingExample sample_direct(const RevisionTrajectory& traj, std::mt19937_64& rng,
                              bool use_intermediate) {
  const std::size_t n = edits_of(traj);
  if (!use_intermediate) return make(ExampleSetup::kDirectS0, traj, {0}, n);
  return make(ExampleSetup::kDirectSi, traj, {uniform_index(rng, 0, n - 1)}, n);
}

TrainingExample sample_hop_j_then_i(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                    const SamplerConfig& cfg) {
  const std::size_t n = edits_of(traj);
  const double center = cfg.center_quantile * static_cast<double>(n);
  const double sigma = cfg.sigma_fraction * static_cast<double>(n);
  double draw = sigma > 0.0 ? std::normal_distribution<double>(center, sigma)(rng) : center;
  long long j = std::llround(draw);
  j = std::clamp<long long>(j, 1, static_cast<long long>(n));
  std::size_t i = uniform_index(rng, 0, static_cast<std::size_t>(j) - 1);
  return make(ExampleSetup::kHop, traj, {i}, static_cast<std::size_t>(j));
}

TrainingExample sample_hop_quantized(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                     const SamplerConfig& cfg) {
  const std::size_t n = edits_of(traj);
  const std::size_t count = n + 1;
  const std::size_t buckets = cfg.bucket_count;
  if (count < buckets) {
    throw std::invalid_argument("trajectory " + traj.id + " has " + std::to_string(count) +
                                " states, fewer than " + std::to_string(buckets) + " buckets");
  }
  // Ordered bucket pairs (a, b) with a < b, enumerated row by row.
  std::size_t pair = uniform_index(rng, 0, buckets * (buckets - 1) / 2 - 1);
  std::size_t first = 0;
  while (pair >= buckets - 1 - first) {
    pair -= buckets - 1 - first;
    ++first;
  }
  std::size_t second = first + 1 + pair;

  auto bucket_range = [&](std::size_t b) {
    std::size_t lo = (b * count + buckets - 1) / buckets;
    std::size_t hi = ((b + 1) * count + buckets - 1) / buckets;
    return std::pair{lo, std::min(hi, count) - 1};
  };
  auto [lo_i, hi_i] = bucket_range(first);
  auto [lo_j, hi_j] = bucket_range(second);
  std::size_t i = uniform_index(rng, lo_i, hi_i);
  std::size_t j = uniform_index(rng, lo_j, hi_j);
  return make(ExampleSetup::kHop, traj, {i}, j);
}

TrainingExample sample_single_revision(const RevisionTrajectory& traj, std::mt19937_64& rng) {
  const std::size_t n = edits_of(traj);
  // With no intermediates S0 stands in for the revision.
  std::size_t i = n >= 2 ? uniform_index(rng, 1, n - 1) : 0;
  return make(ExampleSetup::kSingleRevision, traj, {0, i}, n);
}

TrainingExample sample_multi_revision(const RevisionTrajectory& traj, std::mt19937_64& rng,
                                      const SamplerConfig& cfg) {
  const std::size_t n = edits_of(traj);
  const std::size_t k = uniform_index(rng, 0, std::min(cfg.multi_rev_max, n - 1));
  std::vector<std::size_t> intermediates(n - 1);
  std::iota(intermediates.begin(), intermediates.end(), std::size_t{1});
  std::vector<std::size_t> inputs{0};
  std::sample(intermediates.begin(), intermediates.end(), std::back_inserter(inputs), k, rng);
  std::sort(inputs.begin() + 1, inputs.end());
  return make(ExampleSetup::kMultiRevision, traj, std::move(inputs), n);
}

TrainingExample sample_example(const RevisionTrajectory& traj, std::mt19937_64& rng,
                               const SamplerConfig& cfg) {
  switch (cfg.strategy) {
    case SamplingStrategy::kDirect: return sample_direct(traj, rng, false);
    case SamplingStrategy::kDirectIntermediate: return sample_direct(traj, rng, true);
    case SamplingStrategy::kHopJThenI: return sample_hop_j_then_i(traj, rng, cfg);
    case SamplingStrategy::kHopQuantized: return sample_hop_quantized(traj, rng, cfg);
    case SamplingStrategy::kSingleRevision: return sample_single_revision(traj, rng);
    case SamplingStrategy::kMultiRevision: return sample_multi_revision(traj, rng, cfg);
  }
  throw std::logic_error("unhandled sampling strategy");
}

std::vector<TrainingExample> expand_corpus(const Corpus& corpus, const SamplerConfig& cfg) {
  cfg.check();
  if (corpus.trajectories.empty()) throw std::invalid_argument("expand_corpus: empty corpus");
  std::vector<TrainingExample> out;
  out.reserve(corpus.trajectories.size() * cfg.repeats);
  for (std::size_t t = 0; t < corpus.trajectories.size(); ++t) {
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
      std::mt19937_64 rng = derived_rng(cfg.seed, t, r);
      out.push_back(sample_example(corpus.trajectories[t], rng, cfg));
    }
  }
  return out;
}

std::string format_example_line(const TrainingExample& ex) {
  nlohmann::ordered_json j;
  j["setup"] = to_string(ex.setup);
  j["trajectory_id"] = ex.trajectory_id;
  j["input_indices"] = ex.input_indices;
  j["target_index"] = ex.target_index;
  return j.dump();
}

std::string format_examples(const std::vector<TrainingExample>& examples) {
  std::string out;
  for (const TrainingExample& ex : examples) {
    out += format_example_line(ex);
    out.push_back('\n');
  }
  return out;
}

TrainingExample parse_example_line(std::string_view line) {
  auto j = nlohmann::json::parse(line);
  TrainingExample ex;
  ex.setup = parse_example_setup(j.at("setup").get<std::string>());
  ex.trajectory_id = j.at("trajectory_id").get<std::string>();
  ex.input_indices = j.at("input_indices").get<std::vector<std::size_t>>();
  ex.target_index = j.at("target_index").get<std::size_t>();
  return ex;
}

}  // namespace layoutrev
