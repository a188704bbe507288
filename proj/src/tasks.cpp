// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/tasks.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ghostrnn {
namespace tasks {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

RngState sample_rng(std::uint64_t seed, Index index) {
  return RngState(mix_seed(seed ^ static_cast<std::uint64_t>(index)));
}

std::pair<Index, Index> two_distinct_positions(RngState& rng, Index length) {
  const Index p = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(length)));
  Index q = p;
  while (q == p) {
    q = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(length)));
  }
  return {p, q};
}

}  // namespace

Dataset gen_adding(const AddingConfig& cfg) {
  if (cfg.length < 2) {
    throw std::invalid_argument("gen_adding: length must be >= 2");
  }
  if (cfg.count < 1) {
    throw std::invalid_argument("gen_adding: count must be positive");
  }
  Dataset ds;
  ds.kind = TaskKind::Adding;
  ds.feature_dim = 2;
  ds.output_dim = 1;
  ds.samples.resize(static_cast<std::size_t>(cfg.count));
  for (Index i = 0; i < cfg.count; ++i) {
    RngState rng = sample_rng(cfg.seed, i);
    Sample& s = ds.samples[static_cast<std::size_t>(i)];
    s.inputs.resize(static_cast<std::size_t>(cfg.length));
    std::vector<Scalar> values(static_cast<std::size_t>(cfg.length));
    for (auto& v : values) {
      v = rng.uniform(0.0, 1.0);
    }
    const auto [p, q] = two_distinct_positions(rng, cfg.length);
    for (Index t = 0; t < cfg.length; ++t) {
      Vector x(2);
      x << values[static_cast<std::size_t>(t)], (t == p || t == q) ? 1.0 : 0.0;
      s.inputs[static_cast<std::size_t>(t)] = x;
    }
    s.scalar_target =
        values[static_cast<std::size_t>(p)] + values[static_cast<std::size_t>(q)];
  }
  return ds;
}

Index order_alphabet_size(Index n_classes) {
  Index m = 2;
  while (m * (m - 1) < n_classes) {
    ++m;
  }
  return m;
}

Dataset gen_order_classify(const OrderConfig& cfg) {
  if (cfg.n_classes < 2) {
    throw std::invalid_argument("gen_order_classify: need at least 2 classes");
  }
  if (cfg.length < 2) {
    throw std::invalid_argument("gen_order_classify: length must be >= 2");
  }
  if (cfg.count < 1) {
    throw std::invalid_argument("gen_order_classify: count must be positive");
  }
  const Index m = order_alphabet_size(cfg.n_classes);
  Dataset ds;
  ds.kind = TaskKind::OrderClassify;
  ds.feature_dim = m + 1;
  ds.output_dim = cfg.n_classes;
  ds.n_classes = cfg.n_classes;
  ds.samples.resize(static_cast<std::size_t>(cfg.count));
  for (Index i = 0; i < cfg.count; ++i) {
    RngState rng = sample_rng(cfg.seed, i);
    Sample& s = ds.samples[static_cast<std::size_t>(i)];
    // Round-robin labels keep the class histogram flat to within 1.
    const Index label = i % cfg.n_classes;
    s.label = label;
    // Label -> ordered pair (a, b), a != b, lexicographic enumeration.
    const Index a = label / (m - 1);
    const Index rem = label % (m - 1);
    const Index b = rem < a ? rem : rem + 1;

    auto [p, q] = two_distinct_positions(rng, cfg.length);
    if (p > q) {
      std::swap(p, q);
    }
    s.inputs.resize(static_cast<std::size_t>(cfg.length));
    for (Index t = 0; t < cfg.length; ++t) {
      Vector x = Vector::Zero(m + 1);
      x[0] = rng.uniform(0.0, 1.0);  // distractor channel
      if (t == p) {
        x[1 + a] = 1.0;
      } else if (t == q) {
        x[1 + b] = 1.0;
      }
      s.inputs[static_cast<std::size_t>(t)] = x;
    }
  }
  return ds;
}

Dataset gen_denoise(const DenoiseConfig& cfg) {
  if (cfg.length < kDenoiseFrame) {
    throw std::invalid_argument("gen_denoise: length must be >= 16");
  }
  if (cfg.count < 1) {
    throw std::invalid_argument("gen_denoise: count must be positive");
  }
  if (!(cfg.snr_lo_db <= cfg.snr_hi_db)) {
    throw std::invalid_argument("gen_denoise: snr range inverted");
  }
  const Index n_frames = cfg.length / kDenoiseFrame;
  const Index n = n_frames * kDenoiseFrame;
  Dataset ds;
  ds.kind = TaskKind::Denoise;
  ds.feature_dim = kDenoiseFrame;
  ds.output_dim = kDenoiseFrame;
  ds.samples.resize(static_cast<std::size_t>(cfg.count));
  for (Index i = 0; i < cfg.count; ++i) {
    RngState rng = sample_rng(cfg.seed, i);
    Sample& s = ds.samples[static_cast<std::size_t>(i)];

    // Clean: two random-phase sinusoids, amplitudes 0.5 each.
    const Scalar f1 = rng.uniform(0.02, 0.45);
    const Scalar f2 = rng.uniform(0.02, 0.45);
    const Scalar ph1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Scalar ph2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    s.clean.resize(n);
    for (Index t = 0; t < n; ++t) {
      const Scalar tt = static_cast<Scalar>(t);
      s.clean[t] = 0.5 * std::sin(2.0 * std::numbers::pi * f1 * tt + ph1) +
                   0.5 * std::sin(2.0 * std::numbers::pi * f2 * tt + ph2);
    }

    const Scalar target_snr = cfg.snr_hi_db > cfg.snr_lo_db
                                  ? rng.uniform(cfg.snr_lo_db, cfg.snr_hi_db)
                                  : cfg.snr_lo_db;
    Vector noise(n);
    for (Index t = 0; t < n; ++t) {
      noise[t] = rng.uniform(-1.0, 1.0);
    }
    const Scalar p_clean = s.clean.squaredNorm() / static_cast<Scalar>(n);
    const Scalar p_noise_raw = noise.squaredNorm() / static_cast<Scalar>(n);
    const Scalar scale =
        cfg.noise_scale *
        std::sqrt(p_clean / (p_noise_raw * std::pow(10.0, target_snr / 10.0)));
    noise *= scale;
    s.mixture = s.clean + noise;

    const Scalar p_noise = noise.squaredNorm() / static_cast<Scalar>(n);
    s.snr_db = p_noise > 0.0 ? 10.0 * std::log10(p_clean / p_noise) : kInf;

    s.inputs.resize(static_cast<std::size_t>(n_frames));
    s.target_frames.resize(static_cast<std::size_t>(n_frames));
    for (Index f = 0; f < n_frames; ++f) {
      s.inputs[static_cast<std::size_t>(f)] =
          s.mixture.segment(f * kDenoiseFrame, kDenoiseFrame);
      s.target_frames[static_cast<std::size_t>(f)] =
          s.clean.segment(f * kDenoiseFrame, kDenoiseFrame);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Scalar sdr(const Vector& estimate, const Vector& target) {
  if (estimate.size() != target.size()) {
    throw std::invalid_argument("sdr: length mismatch " + shape_str(estimate) +
                                " vs " + shape_str(target));
  }
  const Scalar p_target = target.squaredNorm();
  if (p_target == 0.0) {
    throw std::invalid_argument("sdr: all-zero target");
  }
  const Scalar p_err = (target - estimate).squaredNorm();
  if (p_err == 0.0) {
    return kInf;
  }
  return 10.0 * std::log10(p_target / p_err);
}

Scalar si_sdr(const Vector& estimate, const Vector& target) {
  if (estimate.size() != target.size()) {
    throw std::invalid_argument("si_sdr: length mismatch " + shape_str(estimate) +
                                " vs " + shape_str(target));
  }
  const Scalar p_target = target.squaredNorm();
  if (p_target == 0.0 || estimate.squaredNorm() == 0.0) {
    throw std::invalid_argument("si_sdr: all-zero signal");
  }
  const Scalar dot = estimate.dot(target);
  if (dot == 0.0) {
    return -kInf;  // estimate carries no target component
  }
  const Scalar alpha = dot / p_target;
  const Vector err = estimate - alpha * target;
  const Scalar p_err = err.squaredNorm();
  if (p_err == 0.0) {
    return kInf;
  }
  return 10.0 * std::log10(alpha * alpha * p_target / p_err);
}

Scalar improvement(SignalMetric metric, const Vector& estimate,
                   const Vector& mixture, const Vector& target) {
  const Scalar a = metric(estimate, target);
  const Scalar b = metric(mixture, target);
  if (a == b) {  // covers estimate == mixture even at +/-inf
    return 0.0;
  }
  return a - b;
}

Scalar accuracy(const std::vector<Index>& predictions,
                const std::vector<Index>& labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("accuracy: length mismatch");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("accuracy: empty inputs");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    hits += predictions[i] == labels[i] ? 1 : 0;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(predictions.size());
}

}  // namespace tasks
}  // namespace ghostrnn
