// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic training loop: Adam with decoupled weight decay, step-down
// learning rate, global-norm gradient clipping, early stopping on validation
// loss. Identical TrainConfig reproduces identical parameters and history,
// bitwise, at any permitted thread count: per-sample gradients land in
// per-sample slots and are reduced in ascending slot order.
//
// Seed streams derived from TrainConfig::seed (tags are ASCII constants):
//   model init      mix_seed(seed ^ "init"), then per-tensor as in cells
//   train split     mix_seed(seed ^ "trn")
//   val split       mix_seed(seed ^ "val")
//   epoch shuffle   mix_seed(seed ^ "shuf"), one stream across all epochs

#pragma once

#include "ghostrnn/backprop.hpp"
#include "ghostrnn/tasks.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace ghostrnn {

enum class CellKind { Gru, Ghost };

std::string cell_kind_name(CellKind kind);
CellKind cell_kind_from_name(const std::string& name);

/// A cell plus one affine readout from the full state [h g] to the task
/// output. For the denoise task the readout is applied at every step;
/// otherwise only to the final state.
struct Model {
  CellKind kind = CellKind::Gru;
  GruParams gru;      // active when kind == Gru
  GhostParams ghost;  // active when kind == Ghost
  Matrix W_out;       // output_dim x full_state_dim
  Vector b_out;       // output_dim

  Index feature_dim() const;
  Index full_state_dim() const;
  Index ratio() const;
  Index output_dim() const { return b_out.size(); }

  /// Cell tensors seeded exactly as GruParams::init / GhostParams::init with
  /// `seed`; W_out draws from per-tensor slot 16, past both cells' lists, so
  /// a ratio-1 Ghost model is weight-identical to the GRU model.
  static Model init(CellKind kind, Index feature_dim, Index state_dim,
                    Index ratio, Index output_dim, std::uint64_t seed,
                    Activation phi_act = Activation::Tanh);

  /// Cell tensors in their canonical order, then W_out, b_out.
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;

  CellState start_state() const;
  RunResult run(const std::vector<Vector>& xs) const;
  Vector readout(const Vector& full_state) const;
};

/// Parameter-shaped gradient storage; tensors() aligns with Model::tensors().
struct ModelGradients {
  CellKind kind = CellKind::Gru;
  GruGradients gru;
  GhostGradients ghost;
  Matrix dW_out;
  Vector db_out;

  static ModelGradients zeros_like(const Model& m);

  std::vector<TensorRef> tensors();

  void accumulate(const ModelGradients& other);  // this += other
  void scale(Scalar factor);
  Scalar global_norm();  // sqrt of the summed squared entries
};

/// Loss and parameter gradient for one sample. Adding: squared error of the
/// scalar readout of the final state. OrderClassify: cross-entropy of the
/// final-state logits. Denoise: per-step frame MSE averaged over steps.
std::pair<Scalar, ModelGradients> sample_gradient(const Model& m,
                                                  const tasks::Sample& sample,
                                                  tasks::TaskKind task);
Scalar sample_loss(const Model& m, const tasks::Sample& sample,
                   tasks::TaskKind task);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  Scalar lr = 5e-4;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;
  Scalar weight_decay = 0.0;
  std::int64_t t = 0;
  std::vector<Vector> m, v;  // flat moments, aligned with the tensor list

  static AdamState init(const std::vector<TensorRef>& params, Scalar lr,
                        Scalar weight_decay);
};

/// t += 1; m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; bias-corrected
/// update theta -= lr * mhat / (sqrt(vhat) + eps); then decoupled decay
/// theta -= lr * wd * theta when wd > 0. Throws on shape mismatch or a
/// non-finite gradient, naming the offending tensor.
void adam_step(const std::vector<TensorRef>& params,
               const std::vector<TensorRef>& grads, AdamState& state);

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct LrStep {
  std::int64_t iteration = 0;
  Scalar multiplier = 0.1;
};

struct LrSchedule {
  Scalar initial_lr = 5e-4;
  std::vector<LrStep> steps;  // iterations strictly increasing

  /// 5e-4 with 0.1 multipliers at iterations 10000 and 20000.
  static LrSchedule step_down_default();
};

/// initial_lr times the product of multipliers whose step iteration is
/// <= iteration. Optimizer step number i (0-based) uses lr_at(i).
Scalar lr_at(const LrSchedule& schedule, std::int64_t iteration);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  CellKind cell = CellKind::Gru;
  Index state_dim = 32;
  Index ratio = 1;
  Activation phi_activation = Activation::Tanh;

  tasks::TaskKind task = tasks::TaskKind::Adding;
  Index train_count = 1000;
  Index val_count = 100;
  Index length = 50;
  Index n_classes = 4;  // order task only

  std::uint64_t seed = 1;
  Index batch_size = 100;
  Index max_epochs = 10;
  std::int64_t max_iterations = 0;  // optimizer-step cap; 0 = epochs only

  LrSchedule schedule = LrSchedule::step_down_default();
  Scalar weight_decay = 1e-5;
  Scalar clip_norm = 5.0;
  Index early_stop_patience = 0;  // epochs without improvement; 0 = off
  Scalar early_stop_min_delta = 0.0;

  int threads = -1;  // workers; -1 = read GHOSTRNN_THREADS, 0/1 = sequential
};

/// Feature width the task presents to the cell.
Index task_feature_dim(const TrainConfig& cfg);
/// Readout width for the task.
Index task_output_dim(const TrainConfig& cfg);

tasks::Dataset train_split(const TrainConfig& cfg);
tasks::Dataset val_split(const TrainConfig& cfg);

struct EpochRecord {
  Index epoch = 0;             // 1-based, contiguous
  std::int64_t iteration = 0;  // optimizer steps completed so far
  Scalar train_loss = 0.0;     // mean over the epoch's batches
  Scalar val_loss = 0.0;
  Scalar val_metric = 0.0;
  Scalar lr = 0.0;  // rate used by the epoch's last step
  Scalar wall_time_s = 0.0;  // informational; excluded from determinism surface
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
};

struct TrainResult {
  Model best;  // parameters of the best validation epoch
  Model last;  // parameters when training stopped
  RunHistory history;
  Scalar best_val_loss = 0.0;
  Index best_epoch = 0;  // 0 when no epoch ran
  std::int64_t iterations = 0;
  bool diverged = false;
  std::string metric_name;
};

/// Full loop. Divergence (non-finite loss) stops training with `diverged`
/// set and the best-so-far parameters retained. `on_epoch`, when given, is
/// called after each epoch record is finalized (metrics streaming).
TrainResult train(const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

struct EvalResult {
  Scalar loss = 0.0;
  Scalar metric = 0.0;
  std::string metric_name;  // "mse" | "accuracy" | "si_sdri"
};

/// Mean loss plus the task metric over the dataset. Classification predicts
/// by argmax of the readout logits; denoise scores mean Si-SDR improvement
/// of the concatenated frame estimates over the mixture.
EvalResult evaluate(const Model& m, const tasks::Dataset& ds);

/// Worker count: `requested` >= 0 wins; -1 reads GHOSTRNN_THREADS (absent or
/// 0 means sequential).
int resolve_threads(int requested);

}  // namespace ghostrnn
