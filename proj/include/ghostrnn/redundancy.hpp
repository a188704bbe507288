// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Hidden-state redundancy analysis: how much of the state feature map's
// variance a few principal directions carry, and how similar individual
// state trajectories are to each other. A high contribution rate at small k
// (or near-1 off-diagonal cosines) means the full state carries fewer
// effective dimensions than units.

#pragma once

#include "ghostrnn/cells.hpp"

#include <vector>

namespace ghostrnn {

struct PcaOptions {
  double threshold = 0.99;
  bool centered = true;  // subtract each row's mean over time
  bool squared = true;   // variance convention: contributions use sigma^2
};

struct PcaReport {
  Vector singular_values;  // descending
  Vector contribution;     // cumulative fractions, nondecreasing, last == 1
  Index k_at_threshold = 0;
  bool degenerate = false;  // all-zero map
  PcaOptions options;
};

struct SimilarityMatrix {
  Matrix values;                 // m x m, symmetric, unit diagonal
  std::vector<Index> zero_rows;  // rows whose diagonal 1 was forced
};

/// Runs the cell over each sequence and stacks the full states ([h g])
/// as columns, sequence-major, capped at max_steps columns.
FeatureMap collect_feature_map(const GruParams& p,
                               const std::vector<std::vector<Vector>>& sequences,
                               Index max_steps = 4096);
FeatureMap collect_feature_map(const GhostParams& p,
                               const std::vector<std::vector<Vector>>& sequences,
                               Index max_steps = 4096);

/// Cumulative principal-component contribution of the feature map.
/// k_at_threshold is the smallest k whose cumulative fraction reaches the
/// threshold; 0 for an all-zero map (flagged degenerate).
PcaReport pca_contribution(const FeatureMap& fm, const PcaOptions& opts = {});
PcaReport pca_contribution(const FeatureMap& fm, double threshold);

/// Pairwise cosine similarity of raw (uncentered) state rows.
SimilarityMatrix similarity_matrix(const FeatureMap& fm);

/// Largest divisor r of m with m / r >= report.k_at_threshold; at least 1.
Index suggest_ratio(const PcaReport& report, Index m);

}  // namespace ghostrnn
