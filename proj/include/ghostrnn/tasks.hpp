// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic tasks and evaluation metrics.
//
//   adding    - two-channel regression: channel 0 carries uniforms, channel 1
//               marks two positions; the target is the sum of the marked
//               values. Probes long-range dependencies.
//   order     - classification by the temporal order of two symbol pulses
//               embedded in noise frames.
//   denoise   - recover a two-sinusoid signal from a noisy mixture; frames
//               of 16 samples in and out, estimates are concatenated back
//               to the time domain and scored with the SDR family.
//
// Every generator is a pure function of (seed, params): sample i draws from
// a generator seeded with mix_seed(seed ^ i), so regeneration is bitwise
// identical under any evaluation order.

#pragma once

#include "ghostrnn/numeric.hpp"

#include <cstdint>
#include <vector>

namespace ghostrnn {
namespace tasks {

enum class TaskKind { Adding, OrderClassify, Denoise };

constexpr Index kDenoiseFrame = 16;

struct Sample {
  std::vector<Vector> inputs;  // one feature vector per step
  // Classification target.
  Index label = -1;
  // Regression target (adding).
  Scalar scalar_target = 0.0;
  // Denoise targets: framed clean signal plus both time-domain signals.
  std::vector<Vector> target_frames;
  Vector clean;
  Vector mixture;
  Scalar snr_db = 0.0;
};

struct Dataset {
  TaskKind kind = TaskKind::Adding;
  Index feature_dim = 0;
  Index output_dim = 0;  // readout width: 1 / n_classes / frame size
  Index n_classes = 0;
  std::vector<Sample> samples;
};

struct AddingConfig {
  std::uint64_t seed = 0;
  Index count = 0;
  Index length = 0;  // >= 2
};

struct OrderConfig {
  std::uint64_t seed = 0;
  Index count = 0;
  Index length = 0;
  Index n_classes = 4;  // >= 2
};

struct DenoiseConfig {
  std::uint64_t seed = 0;
  Index count = 0;
  Index length = 0;        // samples, >= 16; truncated to whole frames
  Scalar snr_lo_db = 0.0;  // per-sample SNR drawn uniformly from this range
  Scalar snr_hi_db = 10.0;
  Scalar noise_scale = 1.0;  // 0 disables noise entirely (mixture == clean)
};

Dataset gen_adding(const AddingConfig& cfg);
Dataset gen_order_classify(const OrderConfig& cfg);
Dataset gen_denoise(const DenoiseConfig& cfg);

/// Symbol alphabet size for the order task: smallest M with M(M-1) >= n
/// ordered pairs. Feature layout: channel 0 noise, channels 1..M pulses.
Index order_alphabet_size(Index n_classes);

// ---------------------------------------------------------------------------
// Metrics (dB values; +inf / -inf are meaningful results, not errors)
// ---------------------------------------------------------------------------

/// 10 log10(|s|^2 / |s - est|^2); +inf when the error is exactly zero.
Scalar sdr(const Vector& estimate, const Vector& target);

/// Scale-invariant SDR: project the estimate onto the target first.
/// +inf for an exact rescaling of the target, -inf for an orthogonal
/// estimate (no target component).
Scalar si_sdr(const Vector& estimate, const Vector& target);

using SignalMetric = Scalar (*)(const Vector&, const Vector&);

/// metric(estimate, target) - metric(mixture, target). Equal metric values
/// (including matching infinities) give exactly 0.
Scalar improvement(SignalMetric metric, const Vector& estimate,
                   const Vector& mixture, const Vector& target);

Scalar accuracy(const std::vector<Index>& predictions, const std::vector<Index>& labels);

}  // namespace tasks
}  // namespace ghostrnn
