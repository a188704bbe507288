// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/redundancy.hpp"

#include <stdexcept>

namespace ghostrnn {

namespace {

template <typename Params>
FeatureMap collect_impl(const Params& p,
                        const std::vector<std::vector<Vector>>& sequences,
                        Index max_steps) {
  if (sequences.empty()) {
    throw std::invalid_argument("collect_feature_map: no sequences");
  }
  if (max_steps < 1) {
    throw std::invalid_argument("collect_feature_map: max_steps must be positive");
  }
  std::vector<Vector> columns;
  for (const auto& xs : sequences) {
    if (static_cast<Index>(columns.size()) >= max_steps) {
      break;
    }
    RunResult run = run_sequence(p, xs);
    for (const auto& s : run.states) {
      if (static_cast<Index>(columns.size()) >= max_steps) {
        break;
      }
      columns.push_back(s.full());
    }
  }
  FeatureMap fm;
  fm.values.resize(columns.front().size(), static_cast<Index>(columns.size()));
  for (Index j = 0; j < fm.values.cols(); ++j) {
    fm.values.col(j) = columns[static_cast<std::size_t>(j)];
  }
  return fm;
}

}  // namespace

FeatureMap collect_feature_map(const GruParams& p,
                               const std::vector<std::vector<Vector>>& sequences,
                               Index max_steps) {
  return collect_impl(p, sequences, max_steps);
}

FeatureMap collect_feature_map(const GhostParams& p,
                               const std::vector<std::vector<Vector>>& sequences,
                               Index max_steps) {
  return collect_impl(p, sequences, max_steps);
}

PcaReport pca_contribution(const FeatureMap& fm, const PcaOptions& opts) {
  if (!(opts.threshold > 0.0 && opts.threshold <= 1.0)) {
    throw std::invalid_argument("pca_contribution: threshold must lie in (0, 1]");
  }
  if (fm.units() < 1 || fm.steps() < 1) {
    throw std::invalid_argument("pca_contribution: empty feature map");
  }

  Matrix work = fm.values;
  if (opts.centered) {
    const Vector row_means = work.rowwise().mean();
    work.colwise() -= row_means;
  }

  PcaReport report;
  report.options = opts;
  report.singular_values = singular_values(work);

  const Index k = report.singular_values.size();
  Vector mass(k);
  for (Index i = 0; i < k; ++i) {
    const Scalar s = report.singular_values[i];
    mass[i] = opts.squared ? s * s : s;
  }
  const Scalar total = mass.sum();
  report.contribution = Vector::Zero(k);
  if (total == 0.0) {
    report.degenerate = true;
    report.k_at_threshold = 0;
    return report;
  }
  Scalar cum = 0.0;
  for (Index i = 0; i < k; ++i) {
    cum += mass[i];
    report.contribution[i] = cum / total;
  }
  report.k_at_threshold = k;  // contribution ends at 1 >= threshold
  for (Index i = 0; i < k; ++i) {
    if (report.contribution[i] >= opts.threshold) {
      report.k_at_threshold = i + 1;
      break;
    }
  }
  return report;
}

PcaReport pca_contribution(const FeatureMap& fm, double threshold) {
  PcaOptions opts;
  opts.threshold = threshold;
  return pca_contribution(fm, opts);
}

SimilarityMatrix similarity_matrix(const FeatureMap& fm) {
  const Index m = fm.units();
  if (m < 2) {
    throw std::invalid_argument("similarity_matrix: need at least 2 state rows");
  }
  SimilarityMatrix sim;
  sim.values.resize(m, m);
  std::vector<bool> is_zero(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    is_zero[static_cast<std::size_t>(i)] = fm.values.row(i).norm() == 0.0;
    if (is_zero[static_cast<std::size_t>(i)]) {
      sim.zero_rows.push_back(i);
    }
  }
  for (Index i = 0; i < m; ++i) {
    sim.values(i, i) = 1.0;  // forced for zero rows, exact otherwise
    for (Index j = i + 1; j < m; ++j) {
      const Scalar v =
          cosine_similarity(fm.values.row(i).transpose(), fm.values.row(j).transpose());
      sim.values(i, j) = v;
      sim.values(j, i) = v;
    }
  }
  return sim;
}

Index suggest_ratio(const PcaReport& report, Index m) {
  if (m < 1) {
    throw std::invalid_argument("suggest_ratio: m must be positive");
  }
  Index best = 1;
  for (Index r = 1; r <= m; ++r) {
    if (m % r == 0 && m / r >= report.k_at_threshold) {
      best = r;
    }
  }
  return best;
}

}  // namespace ghostrnn
