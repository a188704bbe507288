// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/cells.hpp"

#include <cmath>
#include <stdexcept>

namespace ghostrnn {

namespace {

inline Scalar sigmoid(Scalar x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

// Scalar libm transcendentals throughout; keeps the arithmetic identical to
// the per-element loop form regardless of Eigen's packet math.
inline Vector sigmoid_v(const Vector& x) {
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

inline Vector tanh_v(const Vector& x) {
  return x.unaryExpr([](Scalar v) { return std::tanh(v); });
}

void check_vec(const Vector& v, Index want, const char* who, const char* what) {
  if (v.size() != want) {
    throw std::invalid_argument(std::string(who) + ": " + what + " has length " +
                                std::to_string(v.size()) + ", expected " +
                                std::to_string(want));
  }
}

std::uint64_t tensor_seed(std::uint64_t seed, int index) {
  SplitMix64 sm(seed);
  std::uint64_t s = 0;
  for (int i = 0; i <= index; ++i) {
    s = sm.next();
  }
  return s;
}

void init_weight(Matrix& w, std::uint64_t seed, int index) {
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(w.cols()));
  RngState rng(tensor_seed(seed, index));
  fill_uniform(rng, w, -bound, bound);
}

}  // namespace

Scalar apply_activation(Activation act, Scalar x) {
  switch (act) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
  }
  throw std::logic_error("apply_activation: bad enum");
}

Scalar activation_deriv_from_value(Activation act, Scalar y) {
  switch (act) {
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::Sigmoid: return y * (1.0 - y);
    case Activation::Identity: return 1.0;
  }
  throw std::logic_error("activation_deriv_from_value: bad enum");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  throw std::logic_error("activation_name: bad enum");
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

// ---------------------------------------------------------------------------
// GruParams
// ---------------------------------------------------------------------------

GruParams GruParams::zeros(Index feature_dim, Index state_dim) {
  if (feature_dim < 1 || state_dim < 1) {
    throw std::invalid_argument("GruParams: dims must be positive");
  }
  GruParams p;
  p.feature_dim = feature_dim;
  p.state_dim = state_dim;
  p.W_ir = Matrix::Zero(state_dim, feature_dim);
  p.W_iz = Matrix::Zero(state_dim, feature_dim);
  p.W_ic = Matrix::Zero(state_dim, feature_dim);
  p.W_hr = Matrix::Zero(state_dim, state_dim);
  p.W_hz = Matrix::Zero(state_dim, state_dim);
  p.W_hc = Matrix::Zero(state_dim, state_dim);
  p.b_ir = Vector::Zero(state_dim);
  p.b_iz = Vector::Zero(state_dim);
  p.b_ic = Vector::Zero(state_dim);
  p.b_hr = Vector::Zero(state_dim);
  p.b_hz = Vector::Zero(state_dim);
  p.b_hc = Vector::Zero(state_dim);
  return p;
}

GruParams GruParams::init(Index feature_dim, Index state_dim, std::uint64_t seed) {
  GruParams p = zeros(feature_dim, state_dim);
  int idx = 0;
  for (auto& ref : p.tensors()) {
    if (ref.mat) {
      init_weight(*ref.mat, seed, idx);
    }
    ++idx;  // biases consume a slot so the numbering is stable
  }
  return p;
}

std::vector<TensorRef> GruParams::tensors() {
  return {
      {"W_ir", &W_ir, nullptr}, {"W_iz", &W_iz, nullptr}, {"W_ic", &W_ic, nullptr},
      {"W_hr", &W_hr, nullptr}, {"W_hz", &W_hz, nullptr}, {"W_hc", &W_hc, nullptr},
      {"b_ir", nullptr, &b_ir}, {"b_iz", nullptr, &b_iz}, {"b_ic", nullptr, &b_ic},
      {"b_hr", nullptr, &b_hr}, {"b_hz", nullptr, &b_hz}, {"b_hc", nullptr, &b_hc},
  };
}

std::vector<ConstTensorRef> GruParams::tensors() const {
  return {
      {"W_ir", &W_ir, nullptr}, {"W_iz", &W_iz, nullptr}, {"W_ic", &W_ic, nullptr},
      {"W_hr", &W_hr, nullptr}, {"W_hz", &W_hz, nullptr}, {"W_hc", &W_hc, nullptr},
      {"b_ir", nullptr, &b_ir}, {"b_iz", nullptr, &b_iz}, {"b_ic", nullptr, &b_ic},
      {"b_hr", nullptr, &b_hr}, {"b_hz", nullptr, &b_hz}, {"b_hc", nullptr, &b_hc},
  };
}

// ---------------------------------------------------------------------------
// GhostParams
// ---------------------------------------------------------------------------

GhostParams GhostParams::zeros(Index feature_dim, Index full_dim, Index ratio,
                               Activation act) {
  if (feature_dim < 1 || full_dim < 1 || ratio < 1) {
    throw std::invalid_argument("GhostParams: dims and ratio must be positive");
  }
  if (full_dim % ratio != 0) {
    throw std::invalid_argument("GhostParams: state-dim " + std::to_string(full_dim) +
                                " not divisible by ratio " + std::to_string(ratio));
  }
  const Index intrinsic = full_dim / ratio;
  const Index ghost = full_dim - intrinsic;
  GhostParams p;
  p.feature_dim = feature_dim;
  p.intrinsic_dim = intrinsic;
  p.full_dim = full_dim;
  p.W_ir = Matrix::Zero(intrinsic, feature_dim);
  p.W_iz = Matrix::Zero(intrinsic, feature_dim);
  p.W_ic = Matrix::Zero(intrinsic, feature_dim);
  p.W_hr = Matrix::Zero(intrinsic, full_dim);
  p.W_hz = Matrix::Zero(intrinsic, full_dim);
  p.W_hc = Matrix::Zero(intrinsic, intrinsic);
  p.W_gc = Matrix::Zero(intrinsic, ghost);
  p.b_ir = Vector::Zero(intrinsic);
  p.b_iz = Vector::Zero(intrinsic);
  p.b_ic = Vector::Zero(intrinsic);
  p.b_hr = Vector::Zero(intrinsic);
  p.b_hz = Vector::Zero(intrinsic);
  p.b_hc = Vector::Zero(intrinsic);
  p.b_gc = Vector::Zero(intrinsic);
  p.phi.W_phi = Matrix::Zero(ghost, intrinsic);
  p.phi.b_phi = Vector::Zero(ghost);
  p.phi.activation = act;
  return p;
}

GhostParams GhostParams::init(Index feature_dim, Index full_dim, Index ratio,
                              std::uint64_t seed, Activation act) {
  GhostParams p = zeros(feature_dim, full_dim, ratio, act);
  int idx = 0;
  for (auto& ref : p.tensors()) {
    if (ref.mat && ref.mat->size() > 0) {
      init_weight(*ref.mat, seed, idx);
    }
    ++idx;
  }
  return p;
}

GhostParams GhostParams::from_gru(const GruParams& g) {
  GhostParams p = zeros(g.feature_dim, g.state_dim, 1);
  p.W_ir = g.W_ir;
  p.W_iz = g.W_iz;
  p.W_ic = g.W_ic;
  p.W_hr = g.W_hr;
  p.W_hz = g.W_hz;
  p.W_hc = g.W_hc;
  p.b_ir = g.b_ir;
  p.b_iz = g.b_iz;
  p.b_ic = g.b_ic;
  p.b_hr = g.b_hr;
  p.b_hz = g.b_hz;
  p.b_hc = g.b_hc;
  return p;
}

std::vector<TensorRef> GhostParams::tensors() {
  return {
      {"W_ir", &W_ir, nullptr},  {"W_iz", &W_iz, nullptr},  {"W_ic", &W_ic, nullptr},
      {"W_hr", &W_hr, nullptr},  {"W_hz", &W_hz, nullptr},  {"W_hc", &W_hc, nullptr},
      {"W_gc", &W_gc, nullptr},
      {"b_ir", nullptr, &b_ir},  {"b_iz", nullptr, &b_iz},  {"b_ic", nullptr, &b_ic},
      {"b_hr", nullptr, &b_hr},  {"b_hz", nullptr, &b_hz},  {"b_hc", nullptr, &b_hc},
      {"b_gc", nullptr, &b_gc},
      {"phi.W", &phi.W_phi, nullptr}, {"phi.b", nullptr, &phi.b_phi},
  };
}

std::vector<ConstTensorRef> GhostParams::tensors() const {
  return {
      {"W_ir", &W_ir, nullptr},  {"W_iz", &W_iz, nullptr},  {"W_ic", &W_ic, nullptr},
      {"W_hr", &W_hr, nullptr},  {"W_hz", &W_hz, nullptr},  {"W_hc", &W_hc, nullptr},
      {"W_gc", &W_gc, nullptr},
      {"b_ir", nullptr, &b_ir},  {"b_iz", nullptr, &b_iz},  {"b_ic", nullptr, &b_ic},
      {"b_hr", nullptr, &b_hr},  {"b_hz", nullptr, &b_hz},  {"b_hc", nullptr, &b_hc},
      {"b_gc", nullptr, &b_gc},
      {"phi.W", &phi.W_phi, nullptr}, {"phi.b", nullptr, &phi.b_phi},
  };
}

// ---------------------------------------------------------------------------
// Step functions
// ---------------------------------------------------------------------------

Vector CellState::full() const {
  if (g.size() == 0) {
    return h;
  }
  Vector s(h.size() + g.size());
  s << h, g;
  return s;
}

Vector cheap_apply(const CheapOp& phi, const Vector& h) {
  if (phi.W_phi.cols() != h.size()) {
    throw std::invalid_argument("cheap_apply: W_phi " + shape_str(phi.W_phi) +
                                " vs h length " + shape_str(h));
  }
  Vector pre = phi.W_phi * h + phi.b_phi;
  const Activation act = phi.activation;
  return pre.unaryExpr([act](Scalar v) { return apply_activation(act, v); });
}

namespace detail {

GruStepDetail gru_step_detail(const GruParams& p, const Vector& x,
                              const Vector& h_prev) {
  check_vec(x, p.feature_dim, "gru_step", "x");
  check_vec(h_prev, p.state_dim, "gru_step", "h_prev");

  GruStepDetail d;
  d.r = sigmoid_v(p.W_ir * x + p.b_ir + p.W_hr * h_prev + p.b_hr);
  d.z = sigmoid_v(p.W_iz * x + p.b_iz + p.W_hz * h_prev + p.b_hz);
  d.u = p.W_hc * h_prev + p.b_hc;
  d.c = tanh_v(p.W_ic * x + p.b_ic + d.r.cwiseProduct(d.u));
  d.h = (Vector::Ones(p.state_dim) - d.z).cwiseProduct(d.c) +
        d.z.cwiseProduct(h_prev);
  return d;
}

GhostStepDetail ghost_step_detail(const GhostParams& p, const Vector& x,
                                  const CellState& s_prev) {
  check_vec(x, p.feature_dim, "ghost_step", "x");
  check_vec(s_prev.h, p.intrinsic_dim, "ghost_step", "h_prev");
  check_vec(s_prev.g, p.ghost_dim(), "ghost_step", "g_prev");

  const Vector hg = s_prev.full();
  GhostStepDetail d;
  d.r = sigmoid_v(p.W_ir * x + p.b_ir + p.W_hr * hg + p.b_hr);
  d.z = sigmoid_v(p.W_iz * x + p.b_iz + p.W_hz * hg + p.b_hz);
  d.u = p.W_hc * s_prev.h + p.b_hc;
  Vector pre_c = p.W_ic * x + p.b_ic + d.r.cwiseProduct(d.u);
  if (p.ghost_dim() > 0) {
    pre_c += p.W_gc * s_prev.g + p.b_gc;
  }
  d.c = tanh_v(pre_c);
  d.h = (Vector::Ones(p.intrinsic_dim) - d.z).cwiseProduct(d.c) +
        d.z.cwiseProduct(s_prev.h);
  // Same two expressions as cheap_apply, so recomputing phi(h) reproduces g.
  d.a_phi = p.phi.W_phi * d.h + p.phi.b_phi;
  const Activation act = p.phi.activation;
  d.g = d.a_phi.unaryExpr([act](Scalar v) { return apply_activation(act, v); });
  return d;
}

}  // namespace detail

Vector gru_step(const GruParams& p, const Vector& x, const Vector& h_prev) {
  return detail::gru_step_detail(p, x, h_prev).h;
}

CellState ghost_step(const GhostParams& p, const Vector& x, const CellState& s_prev) {
  auto d = detail::ghost_step_detail(p, x, s_prev);
  return CellState{std::move(d.h), std::move(d.g)};
}

CellState initial_state(const GruParams& p) {
  return {Vector::Zero(p.state_dim), Vector()};
}

CellState initial_state(const GhostParams& p) {
  CellState s;
  s.h = Vector::Zero(p.intrinsic_dim);
  s.g = cheap_apply(p.phi, s.h);
  return s;
}

// ---------------------------------------------------------------------------
// Sequence driver
// ---------------------------------------------------------------------------

namespace {

template <typename Step>
RunResult run_impl(Index width, const std::vector<Vector>& xs, CellState s,
                   Step&& step) {
  if (xs.empty()) {
    throw std::invalid_argument("run_sequence: empty input sequence");
  }
  RunResult out;
  out.states.reserve(xs.size());
  out.map.values.resize(width, static_cast<Index>(xs.size()));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    s = step(xs[t], s);
    out.map.values.col(static_cast<Index>(t)) = s.full();
    out.states.push_back(s);
  }
  return out;
}

}  // namespace

RunResult run_sequence(const GruParams& p, const std::vector<Vector>& xs,
                       const CellState& s0) {
  return run_impl(p.state_dim, xs, s0, [&](const Vector& x, const CellState& s) {
    return CellState{gru_step(p, x, s.h), Vector()};
  });
}

RunResult run_sequence(const GhostParams& p, const std::vector<Vector>& xs,
                       const CellState& s0) {
  return run_impl(p.full_dim, xs, s0, [&](const Vector& x, const CellState& s) {
    return ghost_step(p, x, s);
  });
}

RunResult run_sequence(const GruParams& p, const std::vector<Vector>& xs) {
  return run_sequence(p, xs, initial_state(p));
}

RunResult run_sequence(const GhostParams& p, const std::vector<Vector>& xs) {
  return run_sequence(p, xs, initial_state(p));
}

}  // namespace ghostrnn
