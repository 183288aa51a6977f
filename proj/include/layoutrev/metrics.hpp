#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "layoutrev/layout.hpp"

namespace layoutrev {

// Layout feature embedding: for every registry class, one normalized count
// channel followed by a grid x grid area-occupancy map.
struct EmbedConfig {
  int grid = 4;
  int count_cap = 16;
};

struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

std::size_t feature_dimension(const ClassRegistry& registry, const EmbedConfig& cfg = {});

/// Elements of classes missing from `registry` are rejected with
/// std::invalid_argument.
FeatureVector embed(const LayoutDoc& doc,
                    const ClassRegistry& registry = ClassRegistry::defaults(),
                    const EmbedConfig& cfg = {});

std::vector<FeatureVector> embed_all(std::span<const LayoutDoc> docs,
                                     const ClassRegistry& registry = ClassRegistry::defaults(),
                                     const EmbedConfig& cfg = {});

struct FidConfig {
  double eps = 1e-6;
  // Ridge used instead of `eps` when a population has no more samples than
  // the feature dimension (the covariance is then rank deficient).
  double small_sample_eps = 1e-3;
};

struct FidResult {
  double score = 0.0;
  double mean_term = 0.0;
  double trace_term = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  double eps = 0.0;
  std::vector<std::string> warnings;
};

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased; zero for a single sample
};

/// Rows are samples.
GaussianFit fit_gaussian(const Eigen::MatrixXd& samples);

/// Square root of a symmetric positive semidefinite matrix through its
/// eigendecomposition; negative eigenvalues are clamped to zero.
Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m);

/// With A = sqrt(cov_a): returns the symmetric product A * cov_b * A and its
/// square root. Tr(root) equals Tr((cov_a cov_b)^{1/2}).
struct ProductRoot {
  Eigen::MatrixXd product;
  Eigen::MatrixXd root;
};
ProductRoot product_sqrt(const Eigen::MatrixXd& cov_a, const Eigen::MatrixXd& cov_b);

/// Frechet distance between two Gaussians (covariances used as given).
FidResult frechet_distance(const GaussianFit& a, const GaussianFit& b);

/// FID between two sample populations (rows are samples).
FidResult fid(const Eigen::MatrixXd& pop_a, const Eigen::MatrixXd& pop_b,
              const FidConfig& cfg = {});
FidResult fid(std::span<const FeatureVector> pop_a, std::span<const FeatureVector> pop_b,
              const FidConfig& cfg = {});

std::vector<std::string_view> whitespace_tokens(std::string_view text);

std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b);

/// ROUGE-L F1 (beta = 1) over whitespace tokens, scaled to [0, 100].
double rouge_l(std::string_view reference, std::string_view hypothesis);

struct TextMetrics {
  double rouge_l_f1 = 0.0;
  bool identical = false;

  bool operator==(const TextMetrics&) const = default;
};

/// `previous` is the reference, `next` the hypothesis.
TextMetrics compare_codes(std::string_view previous, std::string_view next);

/// Percentage of pairs whose canonical codes are equal. Throws on an empty list.
double identical_rate(std::span<const std::pair<std::string, std::string>> pairs);

}  // namespace layoutrev
