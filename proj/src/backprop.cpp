// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/backprop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ghostrnn {

namespace {

void check_d_states(std::size_t tape_len, const std::vector<Vector>& d_states,
                    Index want) {
  if (d_states.size() != tape_len) {
    throw std::invalid_argument("bptt: d_states length " +
                                std::to_string(d_states.size()) + " vs tape length " +
                                std::to_string(tape_len));
  }
  for (const auto& d : d_states) {
    if (d.size() != want) {
      throw std::invalid_argument("bptt: d_states entry length " +
                                  std::to_string(d.size()) + ", expected " +
                                  std::to_string(want));
    }
  }
}

}  // namespace

GruGradients GruGradients::zeros_like(const GruParams& p) {
  GruGradients g;
  g.tensors = GruParams::zeros(p.feature_dim, p.state_dim);
  g.d_h0 = Vector::Zero(p.state_dim);
  return g;
}

GhostGradients GhostGradients::zeros_like(const GhostParams& p) {
  GhostGradients g;
  g.tensors = GhostParams::zeros(p.feature_dim, p.full_dim, p.ratio(),
                                 p.phi.activation);
  g.d_h0 = Vector::Zero(p.intrinsic_dim);
  g.d_g0 = Vector::Zero(p.ghost_dim());
  return g;
}

// ---------------------------------------------------------------------------
// Taped forward
// ---------------------------------------------------------------------------

std::pair<RunResult, Tape> forward_with_tape(const GruParams& p,
                                             const std::vector<Vector>& xs,
                                             const CellState& s0) {
  if (xs.empty()) {
    throw std::invalid_argument("forward_with_tape: empty input sequence");
  }
  RunResult out;
  Tape tape;
  out.states.reserve(xs.size());
  tape.steps.reserve(xs.size());
  out.map.values.resize(p.state_dim, static_cast<Index>(xs.size()));
  Vector h = s0.h;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto d = detail::gru_step_detail(p, xs[t], h);
    TapeStep step;
    step.x = xs[t];
    step.h_prev = h;
    step.r = d.r;
    step.z = d.z;
    step.u = d.u;
    step.c = d.c;
    step.h = d.h;
    tape.steps.push_back(std::move(step));
    h = d.h;
    out.map.values.col(static_cast<Index>(t)) = h;
    out.states.push_back(CellState{h, Vector()});
  }
  return {std::move(out), std::move(tape)};
}

std::pair<RunResult, Tape> forward_with_tape(const GhostParams& p,
                                             const std::vector<Vector>& xs,
                                             const CellState& s0) {
  if (xs.empty()) {
    throw std::invalid_argument("forward_with_tape: empty input sequence");
  }
  RunResult out;
  Tape tape;
  out.states.reserve(xs.size());
  tape.steps.reserve(xs.size());
  out.map.values.resize(p.full_dim, static_cast<Index>(xs.size()));
  CellState s = s0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    auto d = detail::ghost_step_detail(p, xs[t], s);
    TapeStep step;
    step.x = xs[t];
    step.h_prev = s.h;
    step.g_prev = s.g;
    step.r = d.r;
    step.z = d.z;
    step.u = d.u;
    step.c = d.c;
    step.h = d.h;
    step.a_phi = d.a_phi;
    step.g = d.g;
    tape.steps.push_back(std::move(step));
    s = CellState{d.h, d.g};
    out.map.values.col(static_cast<Index>(t)) = s.full();
    out.states.push_back(s);
  }
  return {std::move(out), std::move(tape)};
}

// ---------------------------------------------------------------------------
// Backward passes
// ---------------------------------------------------------------------------

GruGradients bptt(const GruParams& p, const Tape& tape,
                  const std::vector<Vector>& d_states) {
  check_d_states(tape.length(), d_states, p.state_dim);
  GruGradients grads = GruGradients::zeros_like(p);
  GruParams& G = grads.tensors;

  Vector carry = Vector::Zero(p.state_dim);
  for (std::size_t i = tape.length(); i-- > 0;) {
    const TapeStep& s = tape.steps[i];
    const Vector dh = carry + d_states[i];

    // h = (1-z) c + z h_prev
    const Vector dz = dh.cwiseProduct(s.h_prev - s.c);
    const Vector dc = dh.cwiseProduct(Vector::Ones(p.state_dim) - s.z);
    Vector dh_prev = dh.cwiseProduct(s.z);

    // c = tanh(W_ic x + b_ic + r * u)
    const Vector da_c = dc.cwiseProduct(
        (Vector::Ones(p.state_dim) - s.c.cwiseProduct(s.c)));
    G.W_ic.noalias() += da_c * s.x.transpose();
    G.b_ic += da_c;
    const Vector dr = da_c.cwiseProduct(s.u);
    const Vector du = da_c.cwiseProduct(s.r);

    // u = W_hc h_prev + b_hc
    G.W_hc.noalias() += du * s.h_prev.transpose();
    G.b_hc += du;
    dh_prev.noalias() += p.W_hc.transpose() * du;

    // z = sigmoid(...)
    const Vector da_z =
        dz.cwiseProduct(s.z.cwiseProduct(Vector::Ones(p.state_dim) - s.z));
    G.W_iz.noalias() += da_z * s.x.transpose();
    G.b_iz += da_z;
    G.W_hz.noalias() += da_z * s.h_prev.transpose();
    G.b_hz += da_z;
    dh_prev.noalias() += p.W_hz.transpose() * da_z;

    // r = sigmoid(...)
    const Vector da_r =
        dr.cwiseProduct(s.r.cwiseProduct(Vector::Ones(p.state_dim) - s.r));
    G.W_ir.noalias() += da_r * s.x.transpose();
    G.b_ir += da_r;
    G.W_hr.noalias() += da_r * s.h_prev.transpose();
    G.b_hr += da_r;
    dh_prev.noalias() += p.W_hr.transpose() * da_r;

    carry = dh_prev;
  }
  grads.d_h0 = carry;
  return grads;
}

GhostGradients bptt(const GhostParams& p, const Tape& tape,
                    const std::vector<Vector>& d_states) {
  check_d_states(tape.length(), d_states, p.full_dim);
  GhostGradients grads = GhostGradients::zeros_like(p);
  GhostParams& G = grads.tensors;
  const Index ni = p.intrinsic_dim;
  const Index ng = p.ghost_dim();

  Vector carry_h = Vector::Zero(ni);
  Vector carry_g = Vector::Zero(ng);
  for (std::size_t i = tape.length(); i-- > 0;) {
    const TapeStep& s = tape.steps[i];

    // Total gradient on the ghost output g_t: next step's use plus the
    // direct loss term, then back through phi into h_t.
    Vector dg = carry_g + d_states[i].tail(ng);
    Vector dh = carry_h + d_states[i].head(ni);
    if (ng > 0) {
      Vector da_phi(ng);
      for (Index k = 0; k < ng; ++k) {
        da_phi[k] = dg[k] * activation_deriv_from_value(p.phi.activation, s.g[k]);
      }
      G.phi.W_phi.noalias() += da_phi * s.h.transpose();
      G.phi.b_phi += da_phi;
      dh.noalias() += p.phi.W_phi.transpose() * da_phi;
    }

    const Vector dz = dh.cwiseProduct(s.h_prev - s.c);
    const Vector dc = dh.cwiseProduct(Vector::Ones(ni) - s.z);
    Vector dh_prev = dh.cwiseProduct(s.z);
    Vector dg_prev = Vector::Zero(ng);

    const Vector da_c =
        dc.cwiseProduct(Vector::Ones(ni) - s.c.cwiseProduct(s.c));
    G.W_ic.noalias() += da_c * s.x.transpose();
    G.b_ic += da_c;
    const Vector dr = da_c.cwiseProduct(s.u);
    const Vector du = da_c.cwiseProduct(s.r);

    G.W_hc.noalias() += du * s.h_prev.transpose();
    G.b_hc += du;
    dh_prev.noalias() += p.W_hc.transpose() * du;

    if (ng > 0) {  // candidate ghost term sits outside the reset product
      G.W_gc.noalias() += da_c * s.g_prev.transpose();
      G.b_gc += da_c;
      dg_prev.noalias() += p.W_gc.transpose() * da_c;
    }

    Vector hg(ni + ng);
    hg << s.h_prev, s.g_prev;

    const Vector da_z = dz.cwiseProduct(s.z.cwiseProduct(Vector::Ones(ni) - s.z));
    G.W_iz.noalias() += da_z * s.x.transpose();
    G.b_iz += da_z;
    G.W_hz.noalias() += da_z * hg.transpose();
    G.b_hz += da_z;

    const Vector da_r = dr.cwiseProduct(s.r.cwiseProduct(Vector::Ones(ni) - s.r));
    G.W_ir.noalias() += da_r * s.x.transpose();
    G.b_ir += da_r;
    G.W_hr.noalias() += da_r * hg.transpose();
    G.b_hr += da_r;

    Vector dhg = p.W_hz.transpose() * da_z;
    dhg.noalias() += p.W_hr.transpose() * da_r;
    dh_prev += dhg.head(ni);
    dg_prev += dhg.tail(ng);

    carry_h = dh_prev;
    carry_g = dg_prev;
  }
  grads.d_h0 = carry_h;
  grads.d_g0 = carry_g;
  return grads;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

LossValue mse_loss(const Vector& pred, const Vector& target) {
  if (pred.size() != target.size()) {
    throw std::invalid_argument("mse_loss: length mismatch " + shape_str(pred) +
                                " vs " + shape_str(target));
  }
  if (pred.size() == 0) {
    throw std::invalid_argument("mse_loss: empty vectors");
  }
  const Scalar n = static_cast<Scalar>(pred.size());
  const Vector diff = pred - target;
  LossValue out;
  out.value = diff.squaredNorm() / n;
  out.grad = (2.0 / n) * diff;
  return out;
}

LossValue cross_entropy_loss(const Vector& logits, Index cls) {
  if (cls < 0 || cls >= logits.size()) {
    throw std::invalid_argument("cross_entropy_loss: class " + std::to_string(cls) +
                                " out of range for " + std::to_string(logits.size()) +
                                " logits");
  }
  const Scalar m = logits.maxCoeff();
  const Vector shifted = logits.array() - m;
  const Vector ex = shifted.unaryExpr([](Scalar v) { return std::exp(v); });
  const Scalar denom = ex.sum();
  LossValue out;
  out.value = std::log(denom) + m - logits[cls];
  out.grad = ex / denom;
  out.grad[cls] -= 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

SequenceLoss final_state_mse(const Vector& target) {
  return [target](const std::vector<Vector>& outputs) {
    LossValue lv = mse_loss(outputs.back(), target);
    std::vector<Vector> d(outputs.size());
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      d[t] = Vector::Zero(outputs[t].size());
    }
    d.back() = lv.grad;
    return std::make_pair(lv.value, std::move(d));
  };
}

SequenceLoss final_state_cross_entropy(Index cls) {
  return [cls](const std::vector<Vector>& outputs) {
    LossValue lv = cross_entropy_loss(outputs.back(), cls);
    std::vector<Vector> d(outputs.size());
    for (std::size_t t = 0; t < outputs.size(); ++t) {
      d[t] = Vector::Zero(outputs[t].size());
    }
    d.back() = lv.grad;
    return std::make_pair(lv.value, std::move(d));
  };
}

namespace {

void check_eps(Scalar eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("grad_check: eps " + std::to_string(eps) +
                                " outside [1e-7, 1e-3]");
  }
}

Scalar rel_err(Scalar analytic, Scalar numeric) {
  const Scalar denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

template <typename Params>
std::vector<Vector> outputs_of(const Params& p, const std::vector<Vector>& xs,
                               const CellState& s0) {
  RunResult run = run_sequence(p, xs, s0);
  std::vector<Vector> outs;
  outs.reserve(run.states.size());
  for (const auto& s : run.states) {
    outs.push_back(s.full());
  }
  return outs;
}

template <typename Params, typename Grads>
Scalar grad_check_impl(const Params& params, const std::vector<Vector>& xs,
                       const SequenceLoss& loss, Scalar eps, const CellState& s0) {
  check_eps(eps);

  auto [run, tape] = forward_with_tape(params, xs, s0);
  std::vector<Vector> outputs;
  outputs.reserve(run.states.size());
  for (const auto& s : run.states) {
    outputs.push_back(s.full());
  }
  auto [base_value, d_states] = loss(outputs);
  if (!std::isfinite(base_value)) {
    throw std::runtime_error("grad_check: non-finite loss");
  }
  Grads analytic = bptt(params, tape, d_states);

  Params probe = params;  // mutated in place entry by entry
  auto probe_refs = probe.tensors();
  auto grad_refs = analytic.tensors.tensors();

  Scalar worst = 0.0;
  for (std::size_t ti = 0; ti < probe_refs.size(); ++ti) {
    Scalar* data = probe_refs[ti].data();
    const Scalar* gdata = grad_refs[ti].data();
    for (Index k = 0; k < probe_refs[ti].size(); ++k) {
      const Scalar saved = data[k];
      data[k] = saved + eps;
      const Scalar up = loss(outputs_of(probe, xs, s0)).first;
      data[k] = saved - eps;
      const Scalar down = loss(outputs_of(probe, xs, s0)).first;
      data[k] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("grad_check: non-finite loss during perturbation");
      }
      const Scalar numeric = (up - down) / (2.0 * eps);
      worst = std::max(worst, rel_err(gdata[k], numeric));
    }
  }
  return worst;
}

}  // namespace

Scalar grad_check(const GruParams& p, const std::vector<Vector>& xs,
                  const SequenceLoss& loss, Scalar eps) {
  return grad_check_impl<GruParams, GruGradients>(p, xs, loss, eps,
                                                  initial_state(p));
}

Scalar grad_check(const GhostParams& p, const std::vector<Vector>& xs,
                  const SequenceLoss& loss, Scalar eps) {
  // The initial state is resolved once and held fixed while parameters are
  // perturbed; phi's parameters are not differentiated through g0.
  return grad_check_impl<GhostParams, GhostGradients>(p, xs, loss, eps,
                                                      initial_state(p));
}

}  // namespace ghostrnn
