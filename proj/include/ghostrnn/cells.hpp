// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Recurrent cells as pure step functions over explicit parameter bundles.
//
// GRU step:
//   r_t = sigmoid(W_ir x_t + b_ir + W_hr h_{t-1} + b_hr)
//   z_t = sigmoid(W_iz x_t + b_iz + W_hz h_{t-1} + b_hz)
//   c_t = tanh(W_ic x_t + b_ic + r_t * (W_hc h_{t-1} + b_hc))
//   h_t = (1 - z_t) * c_t + z_t * h_{t-1}
//
// GhostRNN step: a reduced set of intrinsic states h (dim state_dim / r)
// runs the recurrence; ghost states g = phi(h) pad the state back to
// state_dim. The r/z gates see the concatenation [h g]; the candidate adds
// the ghost contribution W_gc g + b_gc outside the reset-gate product:
//   r_t = sigmoid(W_ir x_t + b_ir + W_hr [h g]_{t-1} + b_hr)
//   z_t = sigmoid(W_iz x_t + b_iz + W_hz [h g]_{t-1} + b_hz)
//   c_t = tanh(W_ic x_t + b_ic + r_t * (W_hc h_{t-1} + b_hc)
//              + W_gc g_{t-1} + b_gc)
//   h_t = (1 - z_t) * c_t + z_t * h_{t-1}
//   g_t = phi(h_t) = act(W_phi h_t + b_phi)
//
// With ghost_dim == 0 (ratio 1) the ghost terms vanish and the step is
// bit-for-bit the GRU step.

#pragma once

#include "ghostrnn/numeric.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace ghostrnn {

/// Named handle onto one parameter tensor; powers generic iteration
/// (optimizer moments, serialization, gradient checking, counting).
struct TensorRef {
  std::string name;
  Matrix* mat = nullptr;
  Vector* vec = nullptr;

  Index size() const { return mat ? mat->size() : vec->size(); }
  Scalar* data() const { return mat ? mat->data() : vec->data(); }
  bool is_weight() const { return mat != nullptr; }
};

struct ConstTensorRef {
  std::string name;
  const Matrix* mat = nullptr;
  const Vector* vec = nullptr;

  Index size() const { return mat ? mat->size() : vec->size(); }
  const Scalar* data() const { return mat ? mat->data() : vec->data(); }
  bool is_weight() const { return mat != nullptr; }
};

enum class Activation { Tanh, Sigmoid, Identity };

Scalar apply_activation(Activation act, Scalar x);
/// Derivative of the activation expressed through its output value y = act(x).
Scalar activation_deriv_from_value(Activation act, Scalar y);

std::string activation_name(Activation act);
Activation activation_from_name(const std::string& name);

// ---------------------------------------------------------------------------

struct GruParams {
  Index feature_dim = 0;
  Index state_dim = 0;

  Matrix W_ir, W_iz, W_ic;  // state_dim x feature_dim
  Matrix W_hr, W_hz, W_hc;  // state_dim x state_dim
  Vector b_ir, b_iz, b_ic, b_hr, b_hz, b_hc;

  static GruParams zeros(Index feature_dim, Index state_dim);
  /// Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero.
  /// Tensor i is filled from its own stream seeded with the (i+1)-th
  /// splitmix64 output of `seed`, in tensors() order, row-major.
  static GruParams init(Index feature_dim, Index state_dim, std::uint64_t seed);

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

/// The cheap operation phi: g = act(W_phi h + b_phi).
struct CheapOp {
  Matrix W_phi;  // ghost_dim x intrinsic_dim
  Vector b_phi;  // ghost_dim
  Activation activation = Activation::Tanh;
};

Vector cheap_apply(const CheapOp& phi, const Vector& h);

struct GhostParams {
  Index feature_dim = 0;
  Index intrinsic_dim = 0;  // state_dim / ratio
  Index full_dim = 0;       // state_dim

  Matrix W_ir, W_iz, W_ic;  // intrinsic_dim x feature_dim
  Matrix W_hr, W_hz;        // intrinsic_dim x full_dim   (act on [h g])
  Matrix W_hc;              // intrinsic_dim x intrinsic_dim
  Matrix W_gc;              // intrinsic_dim x ghost_dim
  Vector b_ir, b_iz, b_ic, b_hr, b_hz, b_hc, b_gc;
  CheapOp phi;

  Index ghost_dim() const { return full_dim - intrinsic_dim; }
  Index ratio() const { return intrinsic_dim > 0 ? full_dim / intrinsic_dim : 1; }

  /// full_dim must be divisible by ratio; throws otherwise.
  static GhostParams zeros(Index feature_dim, Index full_dim, Index ratio,
                           Activation act = Activation::Tanh);
  static GhostParams init(Index feature_dim, Index full_dim, Index ratio,
                          std::uint64_t seed, Activation act = Activation::Tanh);
  /// ratio-1 bundle carrying the exact GRU weights (ghost tensors empty/zero).
  static GhostParams from_gru(const GruParams& p);

  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;
};

/// h: intrinsic states; g: ghost states (empty for a plain GRU).
struct CellState {
  Vector h;
  Vector g;

  Vector full() const;  // [h; g]
};

using CellParams = std::variant<GruParams, GhostParams>;

Vector gru_step(const GruParams& p, const Vector& x, const Vector& h_prev);
CellState ghost_step(const GhostParams& p, const Vector& x, const CellState& s_prev);

/// Default initial state: h = 0, g = phi(0).
CellState initial_state(const GruParams& p);
CellState initial_state(const GhostParams& p);

struct RunResult {
  std::vector<CellState> states;  // one per input step
  FeatureMap map;                 // row i = unit i over time; [h g] rows
};

RunResult run_sequence(const GruParams& p, const std::vector<Vector>& xs,
                       const CellState& s0);
RunResult run_sequence(const GhostParams& p, const std::vector<Vector>& xs,
                       const CellState& s0);
RunResult run_sequence(const GruParams& p, const std::vector<Vector>& xs);
RunResult run_sequence(const GhostParams& p, const std::vector<Vector>& xs);

namespace detail {

// Step evaluation with all intermediates exposed. The public step functions
// and the taped forward both delegate here, so their states are bitwise
// identical by construction.

struct GruStepDetail {
  Vector r, z, u, c, h;  // u = W_hc h_prev + b_hc
};

struct GhostStepDetail {
  Vector r, z, u, c, h, a_phi, g;
};

GruStepDetail gru_step_detail(const GruParams& p, const Vector& x,
                              const Vector& h_prev);
GhostStepDetail ghost_step_detail(const GhostParams& p, const Vector& x,
                                  const CellState& s_prev);

}  // namespace detail

}  // namespace ghostrnn
