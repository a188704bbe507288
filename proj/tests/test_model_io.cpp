// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The GhostRNN Kit Authors
//
// Checkpoint format checks: bitwise round trips, a hand-assembled byte
// fixture against the documented layout, one test per distinct error kind,
// and the CSV / JSONL writers' exact output.

#include "ghostrnn/model_io.hpp"

#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace ghostrnn;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  fs::path dir = fs::temp_directory_path() / "ghostrnn_io_tests";
  fs::create_directories(dir);
  return dir;
}

std::string tmp_file(const std::string& name) {
  return (tmp_dir() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  REQUIRE(f.good());
}

void push_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void push_f64(std::string& out, double v) {
  unsigned char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(reinterpret_cast<char*>(buf), 8);
}

bool models_bitwise_equal(const Model& a, const Model& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (a.kind != b.kind || ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || ta[i].size() != tb[i].size()) return false;
    if (ta[i].size() > 0 &&
        std::memcmp(ta[i].data(), tb[i].data(),
                    sizeof(double) * static_cast<std::size_t>(ta[i].size())) != 0)
      return false;
  }
  return true;
}

CheckpointErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected CheckpointError");
  return CheckpointErrorKind::Io;
}

}  // namespace

TEST_CASE("models round-trip bitwise and re-save byte-identically") {
  struct Case {
    CellKind kind;
    Index ratio;
    Activation act;
  };
  const Case cases[] = {
      {CellKind::Gru, 1, Activation::Tanh},
      {CellKind::Ghost, 1, Activation::Tanh},
      {CellKind::Ghost, 2, Activation::Sigmoid},
      {CellKind::Ghost, 4, Activation::Identity},
  };
  RngState rng(1101);
  int idx = 0;
  for (const Case& c : cases) {
    for (int rep = 0; rep < 6; ++rep, ++idx) {
      Index f = static_cast<Index>(1 + rng.next_below(5));
      Index s = c.ratio * static_cast<Index>(1 + rng.next_below(4));
      Index out = static_cast<Index>(1 + rng.next_below(4));
      Model m = Model::init(c.kind, f, s, c.ratio, out, rng.next_u64(), c.act);
      std::string path = tmp_file("roundtrip_" + std::to_string(idx) + ".grnn");
      save_model(m, path);
      Model back = load_model(path);
      CHECK(models_bitwise_equal(m, back));
      CHECK(back.kind == c.kind);
      CHECK(back.ratio() == c.ratio);
      if (c.kind == CellKind::Ghost && s > s / c.ratio)
        CHECK(back.ghost.phi.activation == c.act);

      std::string again = tmp_file("roundtrip_again.grnn");
      save_model(back, again);
      CHECK(slurp(path) == slurp(again));

      // Loaded model behaves identically.
      std::vector<Vector> xs;
      for (int t = 0; t < 4; ++t) {
        Vector x(f);
        fill_uniform(rng, x, -1.0, 1.0);
        xs.push_back(x);
      }
      RunResult ra = m.run(xs);
      RunResult rb = back.run(xs);
      CHECK(ra.states.back().h == rb.states.back().h);
      CHECK(m.readout(ra.states.back().full()) == back.readout(rb.states.back().full()));
    }
  }
}

TEST_CASE("raw checkpoints round-trip all ranks") {
  RawCheckpoint ckpt;
  ckpt.cell_kind = CellKind::Ghost;
  ckpt.feature_dim = 3;
  ckpt.state_dim = 4;
  ckpt.ratio = 2;
  RawTensor scalar;
  scalar.name = "s";
  scalar.values = {2.0};
  RawTensor vec;
  vec.name = "v";
  vec.dims = {3};
  vec.values = {1.5, -2.5, 0.25};
  RawTensor mat;
  mat.name = "m";
  mat.dims = {2, 2};
  mat.values = {1.0, 2.0, 3.0, 4.0};
  ckpt.tensors = {scalar, vec, mat};

  std::string path = tmp_file("raw_roundtrip.grnn");
  write_raw(ckpt, path);
  RawCheckpoint back = read_raw(path);
  CHECK(back.version == 1);
  CHECK(back.cell_kind == CellKind::Ghost);
  CHECK(back.feature_dim == 3);
  CHECK(back.state_dim == 4);
  CHECK(back.ratio == 2);
  REQUIRE(back.tensors.size() == 3);
  CHECK(back.tensors[0].name == "s");
  CHECK(back.tensors[0].dims.empty());
  CHECK(back.tensors[0].values == scalar.values);
  CHECK(back.tensors[1].dims == vec.dims);
  CHECK(back.tensors[1].values == vec.values);
  CHECK(back.tensors[2].dims == mat.dims);
  CHECK(back.tensors[2].values == mat.values);
}

TEST_CASE("hand-assembled bytes parse to the documented layout") {
  std::string bytes = "GRNN";
  push_u32(bytes, 1);  // version
  push_u32(bytes, 0);  // gru
  push_u32(bytes, 2);  // feature_dim
  push_u32(bytes, 2);  // state_dim
  push_u32(bytes, 1);  // ratio
  push_u32(bytes, 2);  // tensor_count
  push_u32(bytes, 5);
  bytes += "alpha";
  bytes.push_back(1);  // rank 1
  push_u32(bytes, 3);
  push_f64(bytes, 1.5);
  push_f64(bytes, -2.5);
  push_f64(bytes, 0.25);
  push_u32(bytes, 4);
  bytes += "beta";
  bytes.push_back(2);  // rank 2
  push_u32(bytes, 2);
  push_u32(bytes, 2);
  for (double v : {1.0, 2.0, 3.0, 4.0}) push_f64(bytes, v);

  std::string path = tmp_file("fixture.grnn");
  spit(path, bytes);
  RawCheckpoint ckpt = read_raw(path);
  CHECK(ckpt.cell_kind == CellKind::Gru);
  CHECK(ckpt.feature_dim == 2);
  REQUIRE(ckpt.tensors.size() == 2);
  CHECK(ckpt.tensors[0].name == "alpha");
  REQUIRE(ckpt.tensors[0].dims == std::vector<Index>{3});
  CHECK(ckpt.tensors[0].values == std::vector<Scalar>{1.5, -2.5, 0.25});
  CHECK(ckpt.tensors[1].name == "beta");
  REQUIRE((ckpt.tensors[1].dims == std::vector<Index>{2, 2}));
  CHECK(ckpt.tensors[1].values == std::vector<Scalar>({1.0, 2.0, 3.0, 4.0}));

  // And write_raw emits exactly these bytes for the same content.
  std::string again = tmp_file("fixture_rewrite.grnn");
  write_raw(ckpt, again);
  CHECK(slurp(again) == bytes);
}

TEST_CASE("each failure mode reports its own error kind") {
  Model m = Model::init(CellKind::Ghost, 2, 4, 2, 1, 9);
  std::string good = tmp_file("good.grnn");
  save_model(m, good);
  std::string bytes = slurp(good);

  CHECK(kind_of([&] { load_model(tmp_file("missing_file.grnn")); }) ==
        CheckpointErrorKind::Io);
  CHECK(kind_of([&] {
          write_raw(RawCheckpoint{}, (tmp_dir() / "no_dir" / "x.grnn").string());
        }) == CheckpointErrorKind::Io);

  std::string bad_magic = bytes;
  bad_magic[3] = 'X';
  spit(tmp_file("bad_magic.grnn"), bad_magic);
  CHECK(kind_of([&] { read_raw(tmp_file("bad_magic.grnn")); }) ==
        CheckpointErrorKind::BadMagic);

  std::string bad_version = bytes;
  bad_version[4] = 2;
  spit(tmp_file("bad_version.grnn"), bad_version);
  CHECK(kind_of([&] { read_raw(tmp_file("bad_version.grnn")); }) ==
        CheckpointErrorKind::BadVersion);

  spit(tmp_file("truncated.grnn"), bytes.substr(0, bytes.size() - 5));
  CHECK(kind_of([&] { read_raw(tmp_file("truncated.grnn")); }) ==
        CheckpointErrorKind::Truncated);
  spit(tmp_file("truncated2.grnn"), bytes.substr(0, 30));
  CHECK(kind_of([&] { read_raw(tmp_file("truncated2.grnn")); }) ==
        CheckpointErrorKind::Truncated);

  std::string trailing = bytes + "junk";
  spit(tmp_file("trailing.grnn"), trailing);
  CHECK(kind_of([&] { read_raw(tmp_file("trailing.grnn")); }) ==
        CheckpointErrorKind::ShapeMismatch);

  Model nan_model = m;
  nan_model.b_out[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK(kind_of([&] { save_model(nan_model, tmp_file("nan.grnn")); }) ==
        CheckpointErrorKind::NonFinite);
}

TEST_CASE("load_model rejects structural mismatches") {
  Model m = Model::init(CellKind::Gru, 2, 3, 1, 1, 4);
  std::string path = tmp_file("structural.grnn");
  save_model(m, path);
  RawCheckpoint ckpt = read_raw(path);

  SUBCASE("missing tensor") {
    ckpt.tensors.pop_back();
    write_raw(ckpt, path);
    CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
  }
  SUBCASE("unknown extra tensor") {
    RawTensor extra;
    extra.name = "W_mystery";
    extra.dims = {1};
    extra.values = {0.0};
    ckpt.tensors.push_back(extra);
    write_raw(ckpt, path);
    CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
  }
  SUBCASE("wrong tensor shape") {
    for (auto& t : ckpt.tensors) {
      if (t.name == "b_out") {
        t.dims = {2};
        t.values = {0.0, 0.0};
      }
    }
    write_raw(ckpt, path);
    CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
  }
  SUBCASE("gru checkpoint with a ratio") {
    ckpt.ratio = 2;
    write_raw(ckpt, path);
    CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
  }
  SUBCASE("phi.activation on a phi-less model") {
    RawTensor act;
    act.name = "phi.activation";
    act.values = {0.0};
    ckpt.tensors.push_back(act);
    write_raw(ckpt, path);
    CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
  }
}

TEST_CASE("bad phi.activation codes are rejected") {
  Model m = Model::init(CellKind::Ghost, 2, 4, 2, 1, 5);
  std::string path = tmp_file("phi_code.grnn");
  save_model(m, path);
  RawCheckpoint ckpt = read_raw(path);
  for (auto& t : ckpt.tensors) {
    if (t.name == "phi.activation") t.values = {9.0};
  }
  write_raw(ckpt, path);
  CHECK(kind_of([&] { load_model(path); }) == CheckpointErrorKind::ShapeMismatch);
}

TEST_CASE("write_raw validates the tensor table") {
  RawCheckpoint ckpt;
  RawTensor a;
  a.name = "t";
  a.dims = {2};
  a.values = {1.0, 2.0};
  ckpt.tensors = {a, a};  // duplicate name
  CHECK(kind_of([&] { write_raw(ckpt, tmp_file("dup.grnn")); }) ==
        CheckpointErrorKind::ShapeMismatch);

  ckpt.tensors = {a};
  ckpt.tensors[0].values = {1.0};  // count mismatch
  CHECK(kind_of([&] { write_raw(ckpt, tmp_file("count.grnn")); }) ==
        CheckpointErrorKind::ShapeMismatch);

  ckpt.tensors = {a};
  ckpt.tensors[0].dims = {1, 1, 2};  // rank 3
  CHECK(kind_of([&] { write_raw(ckpt, tmp_file("rank.grnn")); }) ==
        CheckpointErrorKind::ShapeMismatch);
}

TEST_CASE("ratio-1 ghost checkpoints carry no phi tensors and match the GRU") {
  Model ghost = Model::init(CellKind::Ghost, 3, 5, 1, 2, 31);
  Model gru = Model::init(CellKind::Gru, 3, 5, 1, 2, 31);
  std::string gpath = tmp_file("ghost_r1.grnn");
  save_model(ghost, gpath);

  RawCheckpoint raw = read_raw(gpath);
  bool saw_b_gc = false;
  for (const auto& t : raw.tensors) {
    CHECK(t.name.find("phi") == std::string::npos);
    CHECK(t.name != "W_gc");  // 5x0: nothing to store
    if (t.name == "b_gc") {
      saw_b_gc = true;  // the ghost-contribution bias exists at every ratio
      for (double v : t.values) CHECK(v == 0.0);
    }
  }
  CHECK(saw_b_gc);

  Model back = load_model(gpath);
  RngState rng(77);
  std::vector<Vector> xs;
  for (int t = 0; t < 5; ++t) {
    Vector x(3);
    fill_uniform(rng, x, -1.0, 1.0);
    xs.push_back(x);
  }
  Vector yg = gru.readout(gru.run(xs).states.back().full());
  Vector yb = back.readout(back.run(xs).states.back().full());
  CHECK(yg == yb);
}

TEST_CASE("csv_number formatting") {
  CHECK(csv_number(1.5) == "1.5");
  CHECK(csv_number(-2.0) == "-2");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333");
  CHECK(csv_number(1.0 / 3.0, 3) == "0.333");
  CHECK(csv_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(csv_number(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK_THROWS_AS(csv_number(std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
}

TEST_CASE("export_csv writes exact rows and 17-digit output round-trips") {
  Matrix m(2, 3);
  m << 1.0, 0.5, -2.0,
       1.0 / 3.0, 0.0, 100.0;
  std::string path = tmp_file("table.csv");
  export_csv(m, path);
  CHECK(slurp(path) == "1,0.5,-2\n0.333333333,0,100\n");

  Vector v(3);
  v << 1.5, std::numeric_limits<double>::infinity(), -0.25;
  export_csv(v, path);
  CHECK(slurp(path) == "1.5\ninf\n-0.25\n");

  Matrix nan_mat = Matrix::Zero(1, 1);
  nan_mat(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(export_csv(nan_mat, path), std::invalid_argument);

  RngState rng(1102);
  Matrix r(3, 4);
  fill_uniform(rng, r, -1.0, 1.0);
  export_csv(r, path, 17);
  std::string text = slurp(path);
  std::size_t pos = 0;
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 4; ++j) {
      std::size_t end = text.find_first_of(",\n", pos);
      REQUIRE(end != std::string::npos);
      double parsed = std::strtod(text.substr(pos, end - pos).c_str(), nullptr);
      CHECK(parsed == r(i, j));  // 17 significant digits reproduce doubles
      pos = end + 1;
    }
  }
}

TEST_CASE("epoch records serialize to one fixed-order JSON line") {
  EpochRecord rec;
  rec.epoch = 3;
  rec.iteration = 120;
  rec.train_loss = 0.5;
  rec.val_loss = 0.25;
  rec.val_metric = 0.75;
  rec.lr = 5e-4;
  rec.wall_time_s = 123.456;  // must not appear
  std::string line = epoch_record_json(rec);
  CHECK(line ==
        "{\"epoch\":3,\"iteration\":120,\"train_loss\":0.5,\"val_loss\":0.25,"
        "\"val_metric\":0.75,\"lr\":0.0005}");
  CHECK(line.find("wall") == std::string::npos);

  RunHistory hist;
  hist.epochs.push_back(rec);
  EpochRecord rec2 = rec;
  rec2.epoch = 4;
  rec2.wall_time_s = 999.0;  // different timing must not change the bytes
  hist.epochs.push_back(rec2);
  std::string path = tmp_file("metrics.jsonl");
  write_metrics_jsonl(hist, path);
  std::string expect = epoch_record_json(rec) + "\n" + epoch_record_json(rec2) + "\n";
  CHECK(slurp(path) == expect);

  std::string path2 = tmp_file("metrics2.jsonl");
  write_metrics_jsonl(hist, path2);
  CHECK(slurp(path) == slurp(path2));
}
