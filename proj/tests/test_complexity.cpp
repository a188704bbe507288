// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The GhostRNN Kit Authors
//
// Closed-form counts against worked examples, against the tensors actually
// allocated, and against a multiply-counting instrumented step. The MAC
// convention (one multiply-accumulate per weight element per step) is
// checked by literally counting the multiplies the scalar oracle performs.

#include "ghostrnn/complexity.hpp"

#include <doctest.h>

#include <cstdint>
#include <stdexcept>

#include "oracles.hpp"

using namespace ghostrnn;

namespace {

std::uint64_t tensor_element_count(const GruParams& p) {
  std::uint64_t total = 0;
  for (const auto& t : p.tensors()) total += static_cast<std::uint64_t>(t.size());
  return total;
}

std::uint64_t tensor_element_count(const GhostParams& p) {
  std::uint64_t total = 0;
  for (const auto& t : p.tensors()) total += static_cast<std::uint64_t>(t.size());
  return total;
}

std::uint64_t weight_element_count(const GhostParams& p) {
  std::uint64_t total = 0;
  for (const auto& t : p.tensors())
    if (t.is_weight()) total += static_cast<std::uint64_t>(t.size());
  return total;
}

}  // namespace

TEST_CASE("worked parameter-count examples") {
  CHECK(param_count_gru(10, 100) == 33000);
  CHECK(param_count_ghost(10, 100, 2) == 19000);
  CHECK(param_count_phi(128, 2) == 4096);
  CHECK(param_count_phi(100, 2) == 2500);
  CHECK(param_count_phi(64, 1) == 0);
}

TEST_CASE("ratio 1 collapses the ghost count to the GRU count") {
  for (Index f = 1; f <= 64; f += 7) {
    for (Index s = 1; s <= 64; ++s) {
      CHECK(param_count_ghost(f, s, 1) == param_count_gru(f, s));
      CHECK(param_count_phi(s, 1) == 0);
    }
  }
}

TEST_CASE("count formulas match the allocated tensors") {
  RngState rng(701);
  for (int rep = 0; rep < 20; ++rep) {
    Index f = static_cast<Index>(1 + rng.next_below(12));
    Index s = static_cast<Index>(1 + rng.next_below(12));
    GruParams gp = GruParams::zeros(f, s);
    CountReport gr = count_report(gp);
    CHECK(gr.weights_only == param_count_gru(f, s));
    CHECK(gr.with_biases == tensor_element_count(gp));
    CHECK(gr.macs_per_step == gr.weights_only);
    CHECK(gr.compression_vs_gru == 0.0);
    CHECK(count_report_gru(f, s).weights_only == gr.weights_only);
    CHECK(count_report_gru(f, s).with_biases == gr.with_biases);

    const Index ratios[] = {1, 2, 4};
    Index ratio = ratios[rng.next_below(3)];
    Index full = ratio * static_cast<Index>(1 + rng.next_below(8));
    GhostParams hp = GhostParams::zeros(f, full, ratio);
    CountReport hr = count_report(hp);
    CHECK(hr.weights_only == param_count_ghost(f, full, ratio));
    CHECK(hr.weights_only == weight_element_count(hp));
    CHECK(hr.with_biases == tensor_element_count(hp));
    CHECK(hr.macs_per_step == hr.weights_only);
    CHECK(count_report_ghost(f, full, ratio).weights_only == hr.weights_only);
  }
}

TEST_CASE("macs_per_step equals the multiplies an actual step performs") {
  RngState rng(702);
  for (int rep = 0; rep < 12; ++rep) {
    Index f = static_cast<Index>(1 + rng.next_below(6));
    Index s = static_cast<Index>(1 + rng.next_below(6));
    GruParams gp = GruParams::init(f, s, rng.next_u64());
    Vector x(f), h(s);
    fill_uniform(rng, x, -1.0, 1.0);
    fill_uniform(rng, h, -1.0, 1.0);
    oracle::MacCounter mc;
    oracle::gru_step_ref(gp, oracle::to_vec(x), oracle::to_vec(h), &mc);
    CHECK(static_cast<std::uint64_t>(mc.macs) == count_report(gp).macs_per_step);

    const Index ratios[] = {1, 2, 3};
    Index ratio = ratios[rng.next_below(3)];
    Index full = ratio * static_cast<Index>(1 + rng.next_below(5));
    GhostParams hp = GhostParams::init(f, full, ratio, rng.next_u64());
    CellState st = initial_state(hp);
    oracle::MacCounter gc;
    oracle::ghost_step_ref(hp, oracle::to_vec(x), oracle::to_vec(st.h),
                           oracle::to_vec(st.g), &gc);
    CHECK(static_cast<std::uint64_t>(gc.macs) == count_report(hp).macs_per_step);
  }
}

TEST_CASE("compression for the reference configuration lands in band") {
  CountReport r = count_report_ghost(40, 128, 2);
  CHECK(count_report_gru(40, 128).weights_only == 64512);
  CHECK(r.weights_only == 36352);
  CHECK(r.compression_vs_gru > 0.38);
  CHECK(r.compression_vs_gru < 0.46);
  CHECK(r.compression_vs_gru ==
        doctest::Approx(1.0 - 36352.0 / 64512.0).epsilon(1e-15));
}

TEST_CASE("compression grows with the ratio") {
  double prev = count_report_ghost(16, 96, 1).compression_vs_gru;
  CHECK(prev == 0.0);
  for (Index ratio : {2, 3, 4, 6, 8}) {
    double c = count_report_ghost(16, 96, ratio).compression_vs_gru;
    CHECK(c > prev);
    CHECK(c < 1.0);
    prev = c;
  }
}

TEST_CASE("indivisible dimensions are rejected") {
  CHECK_THROWS_AS(param_count_ghost(10, 100, 3), std::invalid_argument);
  CHECK_THROWS_AS(count_report_ghost(10, 100, 7), std::invalid_argument);
  CHECK_THROWS_AS(param_count_phi(10, 4), std::invalid_argument);
  CHECK_THROWS_AS(param_count_gru(0, 5), std::invalid_argument);
  CHECK_THROWS_AS(param_count_ghost(5, 8, 0), std::invalid_argument);
}
