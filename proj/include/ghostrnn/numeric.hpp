// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense numeric kernel: Eigen matrix/vector aliases, a checked mat-vec,
// singular values, cosine similarity, and the seeded RNG everything else
// derives its randomness from. All scalars are 64-bit floats.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace ghostrnn {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// y = A * x with an explicit shape check (both shapes named in the error).
Vector matvec(const Matrix& a, const Vector& x);

/// Singular values of a, sorted descending, length min(rows, cols).
/// Rejects non-finite input. Accurate to ~1e-9 relative on well-conditioned
/// matrices (Jacobi-rotation SVD underneath).
Vector singular_values(const Matrix& a);

/// <u,v> / (|u| |v|), in [-1, 1] up to rounding. A zero-norm argument
/// yields 0: dead hidden units produce all-zero state rows and must not
/// poison a similarity matrix.
Scalar cosine_similarity(const Vector& u, const Vector& v);

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// splitmix64 expands a user seed into generator state; xoshiro256** produces
// the stream. Both are fixed published algorithms, so any reimplementation
// from the same seed reproduces the exact byte stream on every platform.
// ---------------------------------------------------------------------------

struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
};

/// One splitmix64 step with state x; used to derive independent sub-seeds
/// (per-sample, per-tensor) without sequential dependence.
std::uint64_t mix_seed(std::uint64_t x);

class RngState {
 public:
  explicit RngState(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Next raw 64-bit word of the xoshiro256** stream.
  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  Scalar next_unit();

  /// Uniform double in [lo, hi); requires lo < hi; never returns hi.
  Scalar uniform(Scalar lo, Scalar hi);

  /// Uniform integer in [0, n); n >= 1.
  std::uint64_t next_below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
};

/// Free-function spelling of RngState::uniform.
Scalar rng_uniform(RngState& state, Scalar lo, Scalar hi);

/// Uniform random matrix/vector fills, coefficients in [lo, hi),
/// row-major fill order (row 0 left to right, then row 1, ...).
void fill_uniform(RngState& rng, Matrix& m, Scalar lo, Scalar hi);
void fill_uniform(RngState& rng, Vector& v, Scalar lo, Scalar hi);

// ---------------------------------------------------------------------------
// Feature map: rows are hidden units, columns are time steps.
// ---------------------------------------------------------------------------

struct FeatureMap {
  Matrix values;  // m x n

  Index units() const { return values.rows(); }
  Index steps() const { return values.cols(); }
};

/// Formats "rows x cols" for error messages.
std::string shape_str(const Matrix& m);
std::string shape_str(const Vector& v);

}  // namespace ghostrnn
