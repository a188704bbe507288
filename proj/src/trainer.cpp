// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace ghostrnn {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

// Seed-stream tags (ASCII), xor-mixed into TrainConfig::seed.
constexpr std::uint64_t kTagInit = 0x696E6974ull;  // "init"
constexpr std::uint64_t kTagTrain = 0x74726Eull;   // "trn"
constexpr std::uint64_t kTagVal = 0x76616Cull;     // "val"
constexpr std::uint64_t kTagShuffle = 0x73687566ull;  // "shuf"

// Same per-tensor stream derivation as the cell initializers.
std::uint64_t tensor_seed(std::uint64_t seed, int index) {
  SplitMix64 sm(seed);
  std::uint64_t s = 0;
  for (int i = 0; i <= index; ++i) {
    s = sm.next();
  }
  return s;
}

Eigen::Map<Vector> flat(const TensorRef& ref) {
  return Eigen::Map<Vector>(ref.data(), ref.size());
}

bool all_finite(const TensorRef& ref) {
  return flat(ref).allFinite();
}

}  // namespace

std::string cell_kind_name(CellKind kind) {
  return kind == CellKind::Gru ? "gru" : "ghost";
}

CellKind cell_kind_from_name(const std::string& name) {
  if (name == "gru") {
    return CellKind::Gru;
  }
  if (name == "ghost") {
    return CellKind::Ghost;
  }
  throw std::invalid_argument("unknown cell kind: " + name);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Index Model::feature_dim() const {
  return kind == CellKind::Gru ? gru.feature_dim : ghost.feature_dim;
}

Index Model::full_state_dim() const {
  return kind == CellKind::Gru ? gru.state_dim : ghost.full_dim;
}

Index Model::ratio() const {
  return kind == CellKind::Gru ? 1 : ghost.ratio();
}

Model Model::init(CellKind kind, Index feature_dim, Index state_dim,
                  Index ratio, Index output_dim, std::uint64_t seed,
                  Activation phi_act) {
  if (output_dim < 1) {
    throw std::invalid_argument("Model::init: output_dim must be positive");
  }
  Model m;
  m.kind = kind;
  if (kind == CellKind::Gru) {
    if (ratio != 1) {
      throw std::invalid_argument("Model::init: GRU requires ratio 1");
    }
    m.gru = GruParams::init(feature_dim, state_dim, seed);
  } else {
    m.ghost = GhostParams::init(feature_dim, state_dim, ratio, seed, phi_act);
  }
  m.W_out.resize(output_dim, state_dim);
  const Scalar bound = 1.0 / std::sqrt(static_cast<Scalar>(state_dim));
  // Slot 16 sits past both cells' tensor lists; sharing it keeps a ratio-1
  // Ghost model weight-identical to the GRU model under the same seed.
  RngState rng(tensor_seed(seed, 16));
  fill_uniform(rng, m.W_out, -bound, bound);
  m.b_out = Vector::Zero(output_dim);
  return m;
}

std::vector<TensorRef> Model::tensors() {
  std::vector<TensorRef> refs = kind == CellKind::Gru ? gru.tensors() : ghost.tensors();
  refs.push_back({"W_out", &W_out, nullptr});
  refs.push_back({"b_out", nullptr, &b_out});
  return refs;
}

std::vector<ConstTensorRef> Model::tensors() const {
  std::vector<ConstTensorRef> refs =
      kind == CellKind::Gru ? gru.tensors() : ghost.tensors();
  refs.push_back({"W_out", &W_out, nullptr});
  refs.push_back({"b_out", nullptr, &b_out});
  return refs;
}

CellState Model::start_state() const {
  return kind == CellKind::Gru ? initial_state(gru) : initial_state(ghost);
}

RunResult Model::run(const std::vector<Vector>& xs) const {
  return kind == CellKind::Gru ? run_sequence(gru, xs) : run_sequence(ghost, xs);
}

Vector Model::readout(const Vector& full_state) const {
  return matvec(W_out, full_state) + b_out;
}

// ---------------------------------------------------------------------------
// ModelGradients
// ---------------------------------------------------------------------------

ModelGradients ModelGradients::zeros_like(const Model& m) {
  ModelGradients g;
  g.kind = m.kind;
  if (m.kind == CellKind::Gru) {
    g.gru = GruGradients::zeros_like(m.gru);
  } else {
    g.ghost = GhostGradients::zeros_like(m.ghost);
  }
  g.dW_out = Matrix::Zero(m.W_out.rows(), m.W_out.cols());
  g.db_out = Vector::Zero(m.b_out.size());
  return g;
}

std::vector<TensorRef> ModelGradients::tensors() {
  std::vector<TensorRef> refs =
      kind == CellKind::Gru ? gru.tensors.tensors() : ghost.tensors.tensors();
  refs.push_back({"W_out", &dW_out, nullptr});
  refs.push_back({"b_out", nullptr, &db_out});
  return refs;
}

void ModelGradients::accumulate(const ModelGradients& other) {
  auto mine = tensors();
  auto theirs = const_cast<ModelGradients&>(other).tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    flat(mine[i]) += flat(theirs[i]);
  }
}

void ModelGradients::scale(Scalar factor) {
  for (const auto& ref : tensors()) {
    flat(ref) *= factor;
  }
}

Scalar ModelGradients::global_norm() {
  Scalar sq = 0.0;
  for (const auto& ref : tensors()) {
    sq += flat(ref).squaredNorm();
  }
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Per-sample loss and gradient
// ---------------------------------------------------------------------------

namespace {

struct SampleObjective {
  Scalar loss = 0.0;
  std::vector<Vector> d_states;  // empty when gradients are not requested
  Matrix dW_out;
  Vector db_out;
};

// Shared by sample_loss (want_grad=false) and sample_gradient. `states` are
// the per-step full states [h g].
SampleObjective sample_objective(const Model& m, const tasks::Sample& sample,
                                 tasks::TaskKind task,
                                 const std::vector<CellState>& states,
                                 bool want_grad) {
  const std::size_t T = states.size();
  SampleObjective out;
  if (want_grad) {
    out.dW_out = Matrix::Zero(m.W_out.rows(), m.W_out.cols());
    out.db_out = Vector::Zero(m.b_out.size());
    out.d_states.assign(T, Vector::Zero(m.full_state_dim()));
  }
  auto apply_output_grad = [&](std::size_t t, const Vector& full,
                               const Vector& dy) {
    out.dW_out.noalias() += dy * full.transpose();
    out.db_out += dy;
    out.d_states[t].noalias() += m.W_out.transpose() * dy;
  };

  switch (task) {
    case tasks::TaskKind::Adding: {
      const Vector full = states.back().full();
      const Vector y = m.readout(full);
      Vector target(1);
      target << sample.scalar_target;
      const LossValue lv = mse_loss(y, target);
      out.loss = lv.value;
      if (want_grad) {
        apply_output_grad(T - 1, full, lv.grad);
      }
      break;
    }
    case tasks::TaskKind::OrderClassify: {
      const Vector full = states.back().full();
      const Vector logits = m.readout(full);
      const LossValue lv = cross_entropy_loss(logits, sample.label);
      out.loss = lv.value;
      if (want_grad) {
        apply_output_grad(T - 1, full, lv.grad);
      }
      break;
    }
    case tasks::TaskKind::Denoise: {
      const Scalar inv_frames = 1.0 / static_cast<Scalar>(T);
      for (std::size_t t = 0; t < T; ++t) {
        const Vector full = states[t].full();
        const Vector y = m.readout(full);
        const LossValue lv = mse_loss(y, sample.target_frames[t]);
        out.loss += lv.value * inv_frames;
        if (want_grad) {
          apply_output_grad(t, full, inv_frames * lv.grad);
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace

std::pair<Scalar, ModelGradients> sample_gradient(const Model& m,
                                                  const tasks::Sample& sample,
                                                  tasks::TaskKind task) {
  ModelGradients grads;
  grads.kind = m.kind;
  if (m.kind == CellKind::Gru) {
    auto [run, tape] = forward_with_tape(m.gru, sample.inputs, m.start_state());
    SampleObjective obj = sample_objective(m, sample, task, run.states, true);
    grads.gru = bptt(m.gru, tape, obj.d_states);
    grads.dW_out = std::move(obj.dW_out);
    grads.db_out = std::move(obj.db_out);
    return {obj.loss, std::move(grads)};
  }
  auto [run, tape] = forward_with_tape(m.ghost, sample.inputs, m.start_state());
  SampleObjective obj = sample_objective(m, sample, task, run.states, true);
  grads.ghost = bptt(m.ghost, tape, obj.d_states);
  grads.dW_out = std::move(obj.dW_out);
  grads.db_out = std::move(obj.db_out);
  return {obj.loss, std::move(grads)};
}

Scalar sample_loss(const Model& m, const tasks::Sample& sample,
                   tasks::TaskKind task) {
  const RunResult run = m.run(sample.inputs);
  return sample_objective(m, sample, task, run.states, false).loss;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamState AdamState::init(const std::vector<TensorRef>& params, Scalar lr,
                          Scalar weight_decay) {
  AdamState st;
  st.lr = lr;
  st.weight_decay = weight_decay;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const auto& ref : params) {
    st.m.push_back(Vector::Zero(ref.size()));
    st.v.push_back(Vector::Zero(ref.size()));
  }
  return st;
}

void adam_step(const std::vector<TensorRef>& params,
               const std::vector<TensorRef>& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: tensor list size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size()) {
      throw std::invalid_argument("adam_step: shape mismatch in tensor " +
                                  params[i].name);
    }
    if (!all_finite(grads[i])) {
      throw std::runtime_error("adam_step: non-finite gradient in tensor " +
                               grads[i].name);
    }
  }
  state.t += 1;
  const Scalar c1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.t));
  const Scalar c2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = flat(params[i]);
    auto g = flat(grads[i]);
    Vector& m = state.m[i];
    Vector& v = state.v[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g).eval();
    theta.array() -=
        state.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    if (state.weight_decay > 0.0) {
      theta -= (state.lr * state.weight_decay) * theta;
    }
  }
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

LrSchedule LrSchedule::step_down_default() {
  LrSchedule s;
  s.initial_lr = 5e-4;
  s.steps = {{10000, 0.1}, {20000, 0.1}};
  return s;
}

Scalar lr_at(const LrSchedule& schedule, std::int64_t iteration) {
  if (iteration < 0) {
    throw std::invalid_argument("lr_at: negative iteration");
  }
  Scalar lr = schedule.initial_lr;
  for (const auto& step : schedule.steps) {
    if (step.iteration <= iteration) {
      lr *= step.multiplier;
    }
  }
  return lr;
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

Index task_feature_dim(const TrainConfig& cfg) {
  switch (cfg.task) {
    case tasks::TaskKind::Adding: return 2;
    case tasks::TaskKind::OrderClassify:
      return tasks::order_alphabet_size(cfg.n_classes) + 1;
    case tasks::TaskKind::Denoise: return tasks::kDenoiseFrame;
  }
  throw std::logic_error("task_feature_dim: unreachable");
}

Index task_output_dim(const TrainConfig& cfg) {
  switch (cfg.task) {
    case tasks::TaskKind::Adding: return 1;
    case tasks::TaskKind::OrderClassify: return cfg.n_classes;
    case tasks::TaskKind::Denoise: return tasks::kDenoiseFrame;
  }
  throw std::logic_error("task_output_dim: unreachable");
}

namespace {

tasks::Dataset make_split(const TrainConfig& cfg, std::uint64_t seed,
                          Index count) {
  switch (cfg.task) {
    case tasks::TaskKind::Adding:
      return tasks::gen_adding({seed, count, cfg.length});
    case tasks::TaskKind::OrderClassify:
      return tasks::gen_order_classify({seed, count, cfg.length, cfg.n_classes});
    case tasks::TaskKind::Denoise: {
      tasks::DenoiseConfig dc;
      dc.seed = seed;
      dc.count = count;
      dc.length = cfg.length;
      return tasks::gen_denoise(dc);
    }
  }
  throw std::logic_error("make_split: unreachable");
}

std::string task_metric_name(tasks::TaskKind task) {
  switch (task) {
    case tasks::TaskKind::Adding: return "mse";
    case tasks::TaskKind::OrderClassify: return "accuracy";
    case tasks::TaskKind::Denoise: return "si_sdri";
  }
  throw std::logic_error("task_metric_name: unreachable");
}

}  // namespace

tasks::Dataset train_split(const TrainConfig& cfg) {
  return make_split(cfg, mix_seed(cfg.seed ^ kTagTrain), cfg.train_count);
}

tasks::Dataset val_split(const TrainConfig& cfg) {
  return make_split(cfg, mix_seed(cfg.seed ^ kTagVal), cfg.val_count);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

EvalResult evaluate(const Model& m, const tasks::Dataset& ds) {
  if (ds.samples.empty()) {
    throw std::invalid_argument("evaluate: empty dataset");
  }
  if (ds.feature_dim != m.feature_dim()) {
    throw std::invalid_argument(
        "evaluate: dataset feature_dim " + std::to_string(ds.feature_dim) +
        " does not match model feature_dim " + std::to_string(m.feature_dim()));
  }
  EvalResult res;
  res.metric_name = task_metric_name(ds.kind);
  Scalar loss_sum = 0.0;
  std::vector<Index> predictions, labels;
  Scalar metric_sum = 0.0;
  for (const auto& s : ds.samples) {
    const RunResult run = m.run(s.inputs);
    const SampleObjective obj = sample_objective(m, s, ds.kind, run.states, false);
    loss_sum += obj.loss;
    switch (ds.kind) {
      case tasks::TaskKind::Adding:
        break;  // metric is the loss itself
      case tasks::TaskKind::OrderClassify: {
        const Vector logits = m.readout(run.states.back().full());
        Index arg = 0;
        logits.maxCoeff(&arg);
        predictions.push_back(arg);
        labels.push_back(s.label);
        break;
      }
      case tasks::TaskKind::Denoise: {
        Vector est(s.clean.size());
        for (std::size_t t = 0; t < run.states.size(); ++t) {
          est.segment(static_cast<Index>(t) * tasks::kDenoiseFrame,
                      tasks::kDenoiseFrame) =
              m.readout(run.states[t].full());
        }
        metric_sum += tasks::improvement(tasks::si_sdr, est, s.mixture, s.clean);
        break;
      }
    }
  }
  const Scalar n = static_cast<Scalar>(ds.samples.size());
  res.loss = loss_sum / n;
  switch (ds.kind) {
    case tasks::TaskKind::Adding: res.metric = res.loss; break;
    case tasks::TaskKind::OrderClassify:
      res.metric = tasks::accuracy(predictions, labels);
      break;
    case tasks::TaskKind::Denoise: res.metric = metric_sum / n; break;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

int resolve_threads(int requested) {
  if (requested >= 0) {
    return requested;
  }
  const char* env = std::getenv("GHOSTRNN_THREADS");
  if (env == nullptr || *env == '\0') {
    return 0;
  }
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || v < 0) {
    return 0;
  }
  return static_cast<int>(std::min(v, 256L));
}

namespace {

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train: batch_size must be positive");
  }
  if (cfg.train_count < 1 || cfg.val_count < 1) {
    throw std::invalid_argument("train: dataset counts must be positive");
  }
  if (cfg.max_epochs < 0 || cfg.max_iterations < 0) {
    throw std::invalid_argument("train: negative epoch/iteration limit");
  }
  if (!(cfg.clip_norm > 0.0)) {
    throw std::invalid_argument("train: clip_norm must be positive (inf disables)");
  }
  if (cfg.early_stop_patience < 0 || cfg.early_stop_min_delta < 0.0) {
    throw std::invalid_argument("train: negative early-stopping setting");
  }
  std::int64_t prev = -1;
  for (const auto& step : cfg.schedule.steps) {
    if (step.iteration <= prev) {
      throw std::invalid_argument("train: lr step iterations must be strictly increasing");
    }
    if (!(step.multiplier > 0.0)) {
      throw std::invalid_argument("train: lr multipliers must be positive");
    }
    prev = step.iteration;
  }
}

// Fills `results` with per-sample (loss, gradients); element i comes from
// train_ds[order[start + i]]. Worker w takes slots w, w + n_workers, ...;
// slot contents do not depend on the schedule.
void batch_gradients(const Model& model, const tasks::Dataset& ds,
                     const std::vector<Index>& order, std::size_t start,
                     std::size_t batch, int n_workers,
                     std::vector<std::pair<Scalar, ModelGradients>>& results) {
  auto work = [&](std::size_t first) {
    for (std::size_t i = first; i < batch; i += static_cast<std::size_t>(n_workers)) {
      const tasks::Sample& s =
          ds.samples[static_cast<std::size_t>(order[start + i])];
      results[i] = sample_gradient(model, s, ds.kind);
    }
  };
  if (n_workers <= 1 || batch <= 1) {
    for (std::size_t i = 0; i < batch; ++i) {
      const tasks::Sample& s =
          ds.samples[static_cast<std::size_t>(order[start + i])];
      results[i] = sample_gradient(model, s, ds.kind);
    }
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
  threads.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        work(static_cast<std::size_t>(w));
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) {
    t.join();
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  validate(cfg);
  const tasks::Dataset train_ds = train_split(cfg);
  const tasks::Dataset val_ds = val_split(cfg);

  Model model = Model::init(cfg.cell, train_ds.feature_dim, cfg.state_dim,
                            cfg.cell == CellKind::Gru ? 1 : cfg.ratio,
                            train_ds.output_dim, mix_seed(cfg.seed ^ kTagInit),
                            cfg.phi_activation);
  AdamState adam = AdamState::init(model.tensors(), cfg.schedule.initial_lr,
                                   cfg.weight_decay);
  RngState shuffle_rng(mix_seed(cfg.seed ^ kTagShuffle));
  const int n_workers = std::max(1, resolve_threads(cfg.threads));

  TrainResult res;
  res.metric_name = task_metric_name(cfg.task);
  res.best = model;  // last-good fallback until an epoch completes
  res.best_val_loss = kInf;
  res.best_epoch = 0;

  std::vector<Index> order(static_cast<std::size_t>(cfg.train_count));
  std::iota(order.begin(), order.end(), Index{0});
  std::vector<std::pair<Scalar, ModelGradients>> results;

  std::int64_t iteration = 0;
  Index no_improve = 0;
  bool stop = false;
  for (Index epoch = 1; epoch <= cfg.max_epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates on the sample order, one RNG stream across epochs.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.next_below(i + 1));
      std::swap(order[i], order[j]);
    }

    Scalar epoch_loss = 0.0;
    std::int64_t epoch_batches = 0;
    Scalar last_lr = lr_at(cfg.schedule, iteration);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      if (cfg.max_iterations > 0 && iteration >= cfg.max_iterations) {
        stop = true;
        break;
      }
      const std::size_t batch =
          std::min(static_cast<std::size_t>(cfg.batch_size),
                   order.size() - start);
      results.resize(batch);
      batch_gradients(model, train_ds, order, start, batch, n_workers, results);

      // Fixed ascending-slot reduction keeps results thread-count invariant.
      ModelGradients total = ModelGradients::zeros_like(model);
      Scalar loss_sum = 0.0;
      for (std::size_t i = 0; i < batch; ++i) {
        total.accumulate(results[i].second);
        loss_sum += results[i].first;
      }
      const Scalar inv = 1.0 / static_cast<Scalar>(batch);
      total.scale(inv);
      const Scalar batch_loss = loss_sum * inv;
      if (!std::isfinite(batch_loss)) {
        res.diverged = true;
        stop = true;
        break;
      }
      const Scalar norm = total.global_norm();
      if (!std::isfinite(norm)) {
        res.diverged = true;
        stop = true;
        break;
      }
      if (std::isfinite(cfg.clip_norm) && norm > cfg.clip_norm) {
        total.scale(cfg.clip_norm / norm);
      }
      adam.lr = lr_at(cfg.schedule, iteration);
      last_lr = adam.lr;
      adam_step(model.tensors(), total.tensors(), adam);
      ++iteration;
      epoch_loss += batch_loss;
      ++epoch_batches;
    }
    if (res.diverged || epoch_batches == 0) {
      break;
    }

    const EvalResult val = evaluate(model, val_ds);
    if (!std::isfinite(val.loss)) {
      res.diverged = true;
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.iteration = iteration;
    rec.train_loss = epoch_loss / static_cast<Scalar>(epoch_batches);
    rec.val_loss = val.loss;
    rec.val_metric = val.metric;
    rec.lr = last_lr;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    res.history.epochs.push_back(rec);
    if (on_epoch) {
      on_epoch(rec);
    }

    if (val.loss < res.best_val_loss - cfg.early_stop_min_delta) {
      res.best_val_loss = val.loss;
      res.best = model;
      res.best_epoch = epoch;
      no_improve = 0;
    } else {
      ++no_improve;
      if (cfg.early_stop_patience > 0 && no_improve >= cfg.early_stop_patience) {
        stop = true;
      }
    }
  }

  res.last = model;
  res.iterations = iteration;
  return res;
}

}  // namespace ghostrnn
