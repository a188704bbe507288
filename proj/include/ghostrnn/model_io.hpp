// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint serialization and tabular/metric export.
//
// Checkpoint byte layout (normative, version 1; all integers and floats
// little-endian regardless of host):
//   bytes 0..3   magic "GRNN"
//   u32          format_version = 1
//   u32          cell_kind (0 = gru, 1 = ghost)
//   u32          feature_dim
//   u32          state_dim (full state width)
//   u32          ratio
//   u32          tensor_count
//   then per tensor:
//     u32        name length in bytes, followed by the UTF-8 name
//     u8         rank (0 = scalar, 1 = vector, 2 = matrix)
//     u32 * rank dims
//     f64 * n    values, row-major
// A ghost bundle stores phi's activation as the rank-0 tensor
// "phi.activation" (0 = tanh, 1 = sigmoid, 2 = identity); a ratio-1 bundle
// has no phi tensors and records ghost_dim 0 implicitly via ratio 1.

#pragma once

#include "ghostrnn/trainer.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ghostrnn {

enum class CheckpointErrorKind {
  Io,
  BadMagic,
  BadVersion,
  Truncated,
  ShapeMismatch,
  NonFinite,
};

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

/// One entry of the tensor table, unbound to any cell layout.
struct RawTensor {
  std::string name;
  std::vector<Index> dims;     // size == rank
  std::vector<Scalar> values;  // row-major
};

struct RawCheckpoint {
  std::uint32_t version = 1;
  CellKind cell_kind = CellKind::Gru;
  Index feature_dim = 0;
  Index state_dim = 0;
  Index ratio = 1;
  std::vector<RawTensor> tensors;
};

/// Byte-level writer/reader for the format above. write_raw requires unique
/// tensor names and dims consistent with value counts; read_raw validates
/// magic, version, and length, and reports truncation distinctly.
void write_raw(const RawCheckpoint& ckpt, const std::string& path);
RawCheckpoint read_raw(const std::string& path);

/// Saves the model's cell tensors plus W_out/b_out. Non-finite values are a
/// NonFinite error: trained models must be finite. Identical models produce
/// identical bytes.
void save_model(const Model& m, const std::string& path);

/// Rebuilds the model, checking every expected tensor's presence and shape;
/// unknown or missing tensors are ShapeMismatch errors.
Model load_model(const std::string& path);

// ---------------------------------------------------------------------------
// Tabular export
// ---------------------------------------------------------------------------

/// Comma-separated rows at `digits` significant digits, "inf"/"-inf"
/// sentinels, trailing newline. NaN entries are an error.
void export_csv(const Matrix& m, const std::string& path, int digits = 9);
void export_csv(const Vector& v, const std::string& path, int digits = 9);

/// Formats one value the way export_csv does.
std::string csv_number(Scalar v, int digits = 9);

/// One-line JSON for an epoch record, fixed field order (epoch, iteration,
/// train_loss, val_loss, val_metric, lr). Wall time is deliberately absent:
/// metrics.jsonl is part of the determinism surface.
std::string epoch_record_json(const EpochRecord& rec);

/// history as metrics.jsonl (one epoch_record_json line per epoch).
void write_metrics_jsonl(const RunHistory& history, const std::string& path);

}  // namespace ghostrnn
