// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/numeric.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace ghostrnn {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

std::string shape_str(const Vector& v) {
  return std::to_string(v.size());
}

Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw std::invalid_argument("matvec: shape mismatch, matrix " + shape_str(a) +
                                " vs vector " + shape_str(x));
  }
  return a * x;
}

Vector singular_values(const Matrix& a) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw std::invalid_argument("singular_values: empty matrix " + shape_str(a));
  }
  if (!a.allFinite()) {
    throw std::invalid_argument("singular_values: non-finite entries in " + shape_str(a) +
                                " input");
  }
  Eigen::JacobiSVD<Matrix> svd(a);  // values only, sorted descending
  return svd.singularValues();
}

Scalar cosine_similarity(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine_similarity: length mismatch " + shape_str(u) +
                                " vs " + shape_str(v));
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == 0.0 || nv == 0.0) {
    return 0.0;
  }
  return u.dot(v) / (nu * nv);
}

std::uint64_t mix_seed(std::uint64_t x) {
  return SplitMix64(x).next();
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngState::RngState(std::uint64_t seed) : seed_(seed) {
  SplitMix64 sm(seed);
  for (auto& w : s_) {
    w = sm.next();
  }
}

std::uint64_t RngState::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

Scalar RngState::next_unit() {
  return static_cast<Scalar>(next_u64() >> 11) * 0x1.0p-53;
}

Scalar RngState::uniform(Scalar lo, Scalar hi) {
  if (!(lo < hi)) {
    throw std::invalid_argument("uniform: require lo < hi, got [" + std::to_string(lo) +
                                ", " + std::to_string(hi) + ")");
  }
  Scalar v = lo + next_unit() * (hi - lo);
  if (v >= hi) {  // guard against round-up at the top of the interval
    v = std::nextafter(hi, lo);
  }
  return v;
}

std::uint64_t RngState::next_below(std::uint64_t n) {
  if (n == 0) {
    throw std::invalid_argument("next_below: n must be positive");
  }
  return next_u64() % n;
}

Scalar rng_uniform(RngState& state, Scalar lo, Scalar hi) {
  return state.uniform(lo, hi);
}

void fill_uniform(RngState& rng, Matrix& m, Scalar lo, Scalar hi) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rng.uniform(lo, hi);
    }
  }
}

void fill_uniform(RngState& rng, Vector& v, Scalar lo, Scalar hi) {
  for (Index i = 0; i < v.size(); ++i) {
    v(i) = rng.uniform(lo, hi);
  }
}

}  // namespace ghostrnn
