// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/complexity.hpp"

#include <stdexcept>

namespace ghostrnn {

namespace {

void check_dims(Index feature_dim, Index state_dim, Index ratio) {
  if (feature_dim < 1 || state_dim < 1) {
    throw std::invalid_argument("param count: dims must be positive, got feature " +
                                std::to_string(feature_dim) + ", state " +
                                std::to_string(state_dim));
  }
  if (ratio < 1) {
    throw std::invalid_argument("param count: ratio must be >= 1");
  }
  if (state_dim % ratio != 0) {
    throw std::invalid_argument("param count: state-dim " + std::to_string(state_dim) +
                                " not divisible by ratio " + std::to_string(ratio));
  }
}

template <typename Params>
CountReport report_from_tensors(const Params& p, std::uint64_t gru_weights) {
  CountReport r;
  for (const auto& ref : p.tensors()) {
    const auto n = static_cast<std::uint64_t>(ref.size());
    r.with_biases += n;
    if (ref.is_weight()) {
      r.weights_only += n;
    }
  }
  r.macs_per_step = r.weights_only;
  r.compression_vs_gru =
      1.0 - static_cast<double>(r.weights_only) / static_cast<double>(gru_weights);
  return r;
}

}  // namespace

std::uint64_t param_count_gru(Index feature_dim, Index state_dim) {
  check_dims(feature_dim, state_dim, 1);
  const auto f = static_cast<std::uint64_t>(feature_dim);
  const auto s = static_cast<std::uint64_t>(state_dim);
  return 3 * (f + s) * s;
}

std::uint64_t param_count_phi(Index state_dim, Index ratio) {
  check_dims(1, state_dim, ratio);
  const auto s = static_cast<std::uint64_t>(state_dim);
  const auto i = s / static_cast<std::uint64_t>(ratio);
  return i * (s - i);
}

std::uint64_t param_count_ghost(Index feature_dim, Index state_dim, Index ratio) {
  check_dims(feature_dim, state_dim, ratio);
  const auto f = static_cast<std::uint64_t>(feature_dim);
  const auto s = static_cast<std::uint64_t>(state_dim);
  const auto i = s / static_cast<std::uint64_t>(ratio);
  return 3 * (f + s) * i + param_count_phi(state_dim, ratio);
}

CountReport count_report_gru(Index feature_dim, Index state_dim) {
  CountReport r;
  r.weights_only = param_count_gru(feature_dim, state_dim);
  r.with_biases = r.weights_only + 6 * static_cast<std::uint64_t>(state_dim);
  r.macs_per_step = r.weights_only;
  r.compression_vs_gru = 0.0;
  return r;
}

CountReport count_report_ghost(Index feature_dim, Index state_dim, Index ratio) {
  check_dims(feature_dim, state_dim, ratio);
  const auto s = static_cast<std::uint64_t>(state_dim);
  const auto i = s / static_cast<std::uint64_t>(ratio);
  const auto ghost = s - i;
  CountReport r;
  r.weights_only = param_count_ghost(feature_dim, state_dim, ratio);
  // 7 intrinsic-length biases (b_ir..b_hc, b_gc) plus phi's ghost-length bias.
  r.with_biases = r.weights_only + 7 * i + ghost;
  r.macs_per_step = r.weights_only;
  const auto gru = param_count_gru(feature_dim, state_dim);
  r.compression_vs_gru =
      1.0 - static_cast<double>(r.weights_only) / static_cast<double>(gru);
  return r;
}

CountReport count_report(const GruParams& p) {
  return report_from_tensors(p, param_count_gru(p.feature_dim, p.state_dim));
}

CountReport count_report(const GhostParams& p) {
  return report_from_tensors(p, param_count_gru(p.feature_dim, p.full_dim));
}

}  // namespace ghostrnn
