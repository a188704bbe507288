// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Exact reverse-mode differentiation of the unrolled recurrence for both
// cells, written out by hand. The ghost path is explicit: the gradient
// arriving at g_t flows through phi into h_t, and the gradients arriving at
// [h g]_{t-1} from the gates and candidate flow into step t-1.
//
// Convention: the initial state s0 is a constant input. Its default value
// (h0 = 0, g0 = phi(0)) is resolved once at forward time and never
// differentiated through phi's parameters; d_h0/d_g0 report the sensitivity
// to the values actually used.

#pragma once

#include "ghostrnn/cells.hpp"

#include <functional>
#include <utility>
#include <vector>

namespace ghostrnn {

/// Per-step cache from the forward pass; enough to run the backward pass
/// without recomputing activations.
struct TapeStep {
  Vector x;
  Vector h_prev, g_prev;
  Vector r, z;
  Vector u;      // W_hc h_prev + b_hc (the reset-gated term, pre-gate)
  Vector c;
  Vector h;      // output intrinsic state
  Vector a_phi;  // phi pre-activation W_phi h + b_phi
  Vector g;      // output ghost state
};

struct Tape {
  std::vector<TapeStep> steps;

  std::size_t length() const { return steps.size(); }
};

struct GruGradients {
  GruParams tensors;  // shape-matched gradient storage
  Vector d_h0;

  static GruGradients zeros_like(const GruParams& p);
};

struct GhostGradients {
  GhostParams tensors;
  Vector d_h0, d_g0;

  static GhostGradients zeros_like(const GhostParams& p);
};

/// Same states as run_sequence (bitwise), plus the tape.
std::pair<RunResult, Tape> forward_with_tape(const GruParams& p,
                                             const std::vector<Vector>& xs,
                                             const CellState& s0);
std::pair<RunResult, Tape> forward_with_tape(const GhostParams& p,
                                             const std::vector<Vector>& xs,
                                             const CellState& s0);

/// d_states[t] is dL/d(output state at step t): length state_dim for the
/// GRU, length full_dim (gradient on [h g]) for GhostRNN. Zero vectors are
/// fine for steps that carry no loss.
GruGradients bptt(const GruParams& p, const Tape& tape,
                  const std::vector<Vector>& d_states);
GhostGradients bptt(const GhostParams& p, const Tape& tape,
                    const std::vector<Vector>& d_states);

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossValue {
  Scalar value = 0.0;
  Vector grad;
};

/// Mean squared error: mean((pred - target)^2), grad 2(pred - target)/len.
LossValue mse_loss(const Vector& pred, const Vector& target);

/// -log softmax(logits)[cls]; grad = softmax(logits) - onehot(cls).
/// Log-sum-exp uses max subtraction, so huge logits do not overflow.
LossValue cross_entropy_loss(const Vector& logits, Index cls);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Maps the per-step output states ([h g] for GhostRNN) to a loss value and
/// its gradients d_states.
using SequenceLoss =
    std::function<std::pair<Scalar, std::vector<Vector>>(const std::vector<Vector>&)>;

/// Loss helpers for tests and the gradcheck command.
SequenceLoss final_state_mse(const Vector& target);
SequenceLoss final_state_cross_entropy(Index cls);

/// Central-difference check of bptt over every parameter entry.
/// Returns max over entries of |analytic - numeric| /
/// max(|analytic|, |numeric|, 1e-12). eps must lie in [1e-7, 1e-3].
Scalar grad_check(const GruParams& p, const std::vector<Vector>& xs,
                  const SequenceLoss& loss, Scalar eps);
Scalar grad_check(const GhostParams& p, const std::vector<Vector>& xs,
                  const SequenceLoss& loss, Scalar eps);

}  // namespace ghostrnn
