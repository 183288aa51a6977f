#include "layoutrev/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace layoutrev {

std::size_t feature_dimension(const ClassRegistry& registry, const EmbedConfig& cfg) {
  return registry.size() * static_cast<std::size_t>(1 + cfg.grid * cfg.grid);
}

FeatureVector embed(const LayoutDoc& doc, const ClassRegistry& registry, const EmbedConfig& cfg) {
  const std::size_t stride = static_cast<std::size_t>(1 + cfg.grid * cfg.grid);
  FeatureVector fv;
  fv.values.assign(registry.size() * stride, 0.0);

  const double cell_w = static_cast<double>(doc.canvas_w) / cfg.grid;
  const double cell_h = static_cast<double>(doc.canvas_h) / cfg.grid;
  const double cell_area = cell_w * cell_h;

  std::vector<int> counts(registry.size(), 0);
  for (const Element& e : doc.elements) {
    auto idx = registry.index_of(e.cls.id);
    if (!idx) throw std::invalid_argument("embed: class " + e.cls.name + " not in registry");
    ++counts[*idx];
    double* channel = fv.values.data() + *idx * stride + 1;
    for (int gy = 0; gy < cfg.grid; ++gy) {
      double oy = std::min<double>(e.y + e.h, (gy + 1) * cell_h) - std::max<double>(e.y, gy * cell_h);
      if (oy <= 0) continue;
      for (int gx = 0; gx < cfg.grid; ++gx) {
        double ox =
            std::min<double>(e.x + e.w, (gx + 1) * cell_w) - std::max<double>(e.x, gx * cell_w);
        if (ox <= 0) continue;
        channel[gy * cfg.grid + gx] += ox * oy / cell_area;
      }
    }
  }
  for (std::size_t k = 0; k < registry.size(); ++k) {
    double* block = fv.values.data() + k * stride;
    block[0] = std::min(1.0, static_cast<double>(counts[k]) / cfg.count_cap);
    for (std::size_t j = 1; j < stride; ++j) block[j] = std::min(1.0, block[j]);
  }
  return fv;
}

std::vector<FeatureVector> embed_all(std::span<const LayoutDoc> docs, const ClassRegistry& registry,
                                     const EmbedConfig& cfg) {
  std::vector<FeatureVector> out;
  out.reserve(docs.size());
  for (const LayoutDoc& d : docs) out.push_back(embed(d, registry, cfg));
  return out;
}

GaussianFit fit_gaussian(const Eigen::MatrixXd& samples) {
  const auto n = samples.rows();
  if (n == 0) throw std::invalid_argument("fit_gaussian: empty population");
  GaussianFit fit;
  fit.mean = samples.colwise().mean().transpose();
  if (n == 1) {
    fit.cov = Eigen::MatrixXd::Zero(samples.cols(), samples.cols());
    return fit;
  }
  Eigen::MatrixXd centered = samples.rowwise() - fit.mean.transpose();
  fit.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return fit;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("symmetric_sqrt: eigendecomposition failed");
  }
  Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = solver.eigenvectors();
  return v * roots.asDiagonal() * v.transpose();
}

ProductRoot product_sqrt(const Eigen::MatrixXd& cov_a, const Eigen::MatrixXd& cov_b) {
  Eigen::MatrixXd a_half = symmetric_sqrt(cov_a);
  ProductRoot out;
  out.product = a_half * cov_b * a_half;
  out.product = 0.5 * (out.product + out.product.transpose()).eval();
  out.root = symmetric_sqrt(out.product);
  return out;
}

FidResult frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("fid: dimension mismatch");
  FidResult r;
  r.mean_term = (a.mean - b.mean).squaredNorm();
  ProductRoot pr = product_sqrt(a.cov, b.cov);
  r.trace_term = a.cov.trace() + b.cov.trace() - 2.0 * pr.root.trace();
  r.score = std::max(0.0, r.mean_term + r.trace_term);
  return r;
}

FidResult fid(const Eigen::MatrixXd& pop_a, const Eigen::MatrixXd& pop_b, const FidConfig& cfg) {
  if (pop_a.rows() == 0 || pop_b.rows() == 0) throw std::invalid_argument("fid: empty population");
  if (pop_a.cols() != pop_b.cols()) throw std::invalid_argument("fid: dimension mismatch");
  if (!pop_a.allFinite() || !pop_b.allFinite()) throw std::invalid_argument("fid: non-finite input");

  const auto d = static_cast<std::size_t>(pop_a.cols());
  const auto n1 = static_cast<std::size_t>(pop_a.rows());
  const auto n2 = static_cast<std::size_t>(pop_b.rows());
  std::vector<std::string> warnings;
  double eps = cfg.eps;
  if (std::min(n1, n2) <= d) {
    warnings.push_back("sample count " + std::to_string(std::min(n1, n2)) +
                       " <= feature dimension " + std::to_string(d) + "; ridge raised to " +
                       std::to_string(cfg.small_sample_eps));
    eps = std::max(eps, cfg.small_sample_eps);
  }

  GaussianFit a = fit_gaussian(pop_a);
  GaussianFit b = fit_gaussian(pop_b);
  a.cov.diagonal().array() += eps;
  b.cov.diagonal().array() += eps;

  FidResult r = frechet_distance(a, b);
  r.n1 = n1;
  r.n2 = n2;
  r.eps = eps;
  r.warnings = std::move(warnings);
  return r;
}

namespace {

Eigen::MatrixXd to_matrix(std::span<const FeatureVector> pop) {
  if (pop.empty()) throw std::invalid_argument("fid: empty population");
  const std::size_t d = pop.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pop.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (pop[i].size() != d) throw std::invalid_argument("fid: dimension mismatch");
    for (std::size_t j = 0; j < d; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pop[i].values[j];
  }
  return m;
}

}  // namespace

FidResult fid(std::span<const FeatureVector> pop_a, std::span<const FeatureVector> pop_b,
              const FidConfig& cfg) {
  return fid(to_matrix(pop_a), to_matrix(pop_b), cfg);
}

std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
  };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::size_t lcs_length(std::span<const std::string_view> a, std::span<const std::string_view> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::string_view reference, std::string_view hypothesis) {
  auto ref = whitespace_tokens(reference);
  auto hyp = whitespace_tokens(hypothesis);
  const double l = static_cast<double>(lcs_length(ref, hyp));
  const double p = hyp.empty() ? 0.0 : l / static_cast<double>(hyp.size());
  const double r = ref.empty() ? 0.0 : l / static_cast<double>(ref.size());
  if (p + r == 0.0) return 0.0;
  return 100.0 * 2.0 * p * r / (p + r);
}

TextMetrics compare_codes(std::string_view previous, std::string_view next) {
  TextMetrics m;
  m.identical = previous == next;
  m.rouge_l_f1 = m.identical ? 100.0 : rouge_l(previous, next);
  return m;
}

double identical_rate(std::span<const std::pair<std::string, std::string>> pairs) {
  if (pairs.empty()) throw std::invalid_argument("identical_rate: no pairs");
  std::size_t same = 0;
  for (const auto& [a, b] : pairs) same += a == b ? 1 : 0;
  return 100.0 * static_cast<double>(same) / static_cast<double>(pairs.size());
}

}  // namespace layoutrev
