// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Closed-form parameter and MAC accounting.
//
//   gru weights          = 3 (feature + state) state
//   ghost weights        = 3 (feature + state) (state / r) + phi
//   phi weights          = (state / r) (state - state / r)
//
// weights_only follows the bias-free convention of those formulas (and is
// what compression ratios are quoted against); with_biases is the true
// tensor element count. MACs: one multiply-accumulate per weight element
// per time step, so macs_per_step == weights_only and the ghost/gru MAC
// ratio equals the weight ratio exactly.

#pragma once

#include "ghostrnn/cells.hpp"

#include <cstdint>

namespace ghostrnn {

struct CountReport {
  std::uint64_t weights_only = 0;
  std::uint64_t with_biases = 0;
  std::uint64_t macs_per_step = 0;
  double compression_vs_gru = 0.0;  // 1 - ghost_weights / gru_weights
};

std::uint64_t param_count_gru(Index feature_dim, Index state_dim);
/// phi weight count for the given state size and ratio; 0 when r == 1.
std::uint64_t param_count_phi(Index state_dim, Index ratio);
std::uint64_t param_count_ghost(Index feature_dim, Index state_dim, Index ratio);

CountReport count_report_gru(Index feature_dim, Index state_dim);
CountReport count_report_ghost(Index feature_dim, Index state_dim, Index ratio);

/// Counts computed from an allocated bundle's actual tensors.
CountReport count_report(const GruParams& p);
CountReport count_report(const GhostParams& p);

}  // namespace ghostrnn
