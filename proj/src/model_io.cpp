// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ghostrnn/model_io.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_map>

namespace ghostrnn {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'N', 'N'};

void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

void put_f64(std::string& out, Scalar v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

struct ByteReader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > bytes.size()) {
      throw CheckpointError(CheckpointErrorKind::Truncated,
                            std::string("checkpoint truncated while reading ") +
                                what);
    }
  }

  std::uint8_t take_u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }

  std::uint32_t take_u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos++]))
           << (8 * i);
    }
    return v;
  }

  Scalar take_f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[pos++]))
              << (8 * i);
    }
    return std::bit_cast<Scalar>(bits);
  }

  std::string take_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

Index raw_count(const RawTensor& t) {
  Index n = 1;
  for (Index d : t.dims) {
    n *= d;
  }
  return n;
}

}  // namespace

void write_raw(const RawCheckpoint& ckpt, const std::string& path) {
  std::set<std::string> names;
  for (const auto& t : ckpt.tensors) {
    if (!names.insert(t.name).second) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "write_raw: duplicate tensor name " + t.name);
    }
    if (t.dims.size() > 2) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "write_raw: rank > 2 in tensor " + t.name);
    }
    if (raw_count(t) != static_cast<Index>(t.values.size())) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "write_raw: dims/value count mismatch in tensor " +
                                t.name);
    }
  }
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, ckpt.version);
  put_u32(out, ckpt.cell_kind == CellKind::Gru ? 0u : 1u);
  put_u32(out, static_cast<std::uint32_t>(ckpt.feature_dim));
  put_u32(out, static_cast<std::uint32_t>(ckpt.state_dim));
  put_u32(out, static_cast<std::uint32_t>(ckpt.ratio));
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.append(t.name);
    put_u8(out, static_cast<std::uint8_t>(t.dims.size()));
    for (Index d : t.dims) {
      put_u32(out, static_cast<std::uint32_t>(d));
    }
    for (Scalar v : t.values) {
      put_f64(out, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw CheckpointError(CheckpointErrorKind::Io,
                          "write_raw: cannot open " + path);
  }
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) {
    throw CheckpointError(CheckpointErrorKind::Io,
                          "write_raw: short write to " + path);
  }
}

RawCheckpoint read_raw(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw CheckpointError(CheckpointErrorKind::Io,
                          "read_raw: cannot open " + path);
  }
  std::string bytes((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
  ByteReader r{bytes};

  const std::string magic = r.take_bytes(4, "magic");
  if (magic != std::string(kMagic, 4)) {
    throw CheckpointError(CheckpointErrorKind::BadMagic,
                          "read_raw: bad magic in " + path);
  }
  RawCheckpoint ckpt;
  ckpt.version = r.take_u32("version");
  if (ckpt.version != 1) {
    throw CheckpointError(CheckpointErrorKind::BadVersion,
                          "read_raw: unsupported format version " +
                              std::to_string(ckpt.version));
  }
  const std::uint32_t kind = r.take_u32("cell kind");
  if (kind > 1) {
    throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                          "read_raw: unknown cell kind tag " +
                              std::to_string(kind));
  }
  ckpt.cell_kind = kind == 0 ? CellKind::Gru : CellKind::Ghost;
  ckpt.feature_dim = static_cast<Index>(r.take_u32("feature_dim"));
  ckpt.state_dim = static_cast<Index>(r.take_u32("state_dim"));
  ckpt.ratio = static_cast<Index>(r.take_u32("ratio"));
  const std::uint32_t count = r.take_u32("tensor count");
  ckpt.tensors.resize(count);
  for (auto& t : ckpt.tensors) {
    const std::uint32_t name_len = r.take_u32("name length");
    t.name = r.take_bytes(name_len, "tensor name");
    const std::uint8_t rank = r.take_u8("rank");
    if (rank > 2) {
      throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                            "read_raw: rank > 2 in tensor " + t.name);
    }
    t.dims.resize(rank);
    for (auto& d : t.dims) {
      d = static_cast<Index>(r.take_u32("dim"));
    }
    const Index n = raw_count(t);
    r.need(static_cast<std::size_t>(n) * 8, "tensor values");
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& v : t.values) {
      v = r.take_f64("value");
    }
  }
  if (r.pos != bytes.size()) {
    throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                          "read_raw: trailing bytes after tensor table");
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Model binding
// ---------------------------------------------------------------------------

void save_model(const Model& m, const std::string& path) {
  RawCheckpoint ckpt;
  ckpt.cell_kind = m.kind;
  ckpt.feature_dim = m.feature_dim();
  ckpt.state_dim = m.full_state_dim();
  ckpt.ratio = m.ratio();
  for (const auto& ref : m.tensors()) {
    if (ref.size() == 0) {
      continue;  // ratio-1 bundles omit the empty ghost/phi tensors
    }
    RawTensor t;
    t.name = ref.name;
    if (ref.is_weight()) {
      const Matrix& w = *ref.mat;
      t.dims = {w.rows(), w.cols()};
      t.values.reserve(static_cast<std::size_t>(w.size()));
      for (Index i = 0; i < w.rows(); ++i) {
        for (Index j = 0; j < w.cols(); ++j) {
          const Scalar v = w(i, j);
          if (!std::isfinite(v)) {
            throw CheckpointError(CheckpointErrorKind::NonFinite,
                                  "save_model: non-finite value in " + t.name);
          }
          t.values.push_back(v);
        }
      }
    } else {
      const Vector& b = *ref.vec;
      t.dims = {b.size()};
      for (Index i = 0; i < b.size(); ++i) {
        if (!std::isfinite(b[i])) {
          throw CheckpointError(CheckpointErrorKind::NonFinite,
                                "save_model: non-finite value in " + t.name);
        }
        t.values.push_back(b[i]);
      }
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (m.kind == CellKind::Ghost && m.ghost.ghost_dim() > 0) {
    RawTensor act;
    act.name = "phi.activation";
    act.values = {static_cast<Scalar>(static_cast<int>(m.ghost.phi.activation))};
    ckpt.tensors.push_back(std::move(act));
  }
  write_raw(ckpt, path);
}

namespace {

[[noreturn]] void shape_error(const std::string& what) {
  throw CheckpointError(CheckpointErrorKind::ShapeMismatch,
                        "load_model: " + what);
}

const RawTensor& find_tensor(
    const std::unordered_map<std::string, const RawTensor*>& table,
    const std::string& name) {
  auto it = table.find(name);
  if (it == table.end()) {
    shape_error("missing tensor " + name);
  }
  return *it->second;
}

void bind_tensor(const RawTensor& raw, const TensorRef& ref) {
  if (ref.is_weight()) {
    Matrix& w = *ref.mat;
    if (raw.dims.size() != 2 || raw.dims[0] != w.rows() ||
        raw.dims[1] != w.cols()) {
      shape_error("tensor " + ref.name + " has the wrong shape");
    }
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) {
        w(i, j) = raw.values[static_cast<std::size_t>(i * w.cols() + j)];
      }
    }
  } else {
    Vector& b = *ref.vec;
    if (raw.dims.size() != 1 || raw.dims[0] != b.size()) {
      shape_error("tensor " + ref.name + " has the wrong shape");
    }
    for (Index i = 0; i < b.size(); ++i) {
      b[i] = raw.values[static_cast<std::size_t>(i)];
    }
  }
}

}  // namespace

Model load_model(const std::string& path) {
  const RawCheckpoint ckpt = read_raw(path);
  if (ckpt.feature_dim < 1 || ckpt.state_dim < 1 || ckpt.ratio < 1) {
    shape_error("non-positive dims in header");
  }
  std::unordered_map<std::string, const RawTensor*> table;
  for (const auto& t : ckpt.tensors) {
    if (!table.emplace(t.name, &t).second) {
      shape_error("duplicate tensor " + t.name);
    }
  }

  Model m;
  m.kind = ckpt.cell_kind;
  if (m.kind == CellKind::Gru) {
    if (ckpt.ratio != 1) {
      shape_error("gru checkpoint with ratio " + std::to_string(ckpt.ratio));
    }
    m.gru = GruParams::zeros(ckpt.feature_dim, ckpt.state_dim);
  } else {
    if (ckpt.state_dim % ckpt.ratio != 0) {
      shape_error("state_dim not divisible by ratio");
    }
    Activation act = Activation::Tanh;
    const Index ghost_dim = ckpt.state_dim - ckpt.state_dim / ckpt.ratio;
    if (ghost_dim > 0) {
      const RawTensor& raw_act = find_tensor(table, "phi.activation");
      if (!raw_act.dims.empty() || raw_act.values.size() != 1) {
        shape_error("phi.activation must be a scalar tensor");
      }
      const Scalar code = raw_act.values[0];
      if (code != 0.0 && code != 1.0 && code != 2.0) {
        shape_error("phi.activation code out of range");
      }
      act = static_cast<Activation>(static_cast<int>(code));
    }
    m.ghost = GhostParams::zeros(ckpt.feature_dim, ckpt.state_dim, ckpt.ratio, act);
  }

  const RawTensor& raw_w = find_tensor(table, "W_out");
  if (raw_w.dims.size() != 2 || raw_w.dims[0] < 1 ||
      raw_w.dims[1] != ckpt.state_dim) {
    shape_error("tensor W_out has the wrong shape");
  }
  m.W_out.resize(raw_w.dims[0], raw_w.dims[1]);
  m.b_out.resize(raw_w.dims[0]);

  std::set<std::string> consumed{"phi.activation"};
  for (const auto& ref : m.tensors()) {
    if (ref.size() == 0) {
      if (table.count(ref.name) != 0) {
        shape_error("unexpected empty-shape tensor " + ref.name);
      }
      continue;
    }
    bind_tensor(find_tensor(table, ref.name), ref);
    consumed.insert(ref.name);
  }
  for (const auto& t : ckpt.tensors) {
    if (consumed.count(t.name) == 0) {
      shape_error("unexpected tensor " + t.name);
    }
  }
  if (m.kind == CellKind::Gru || m.ghost.ghost_dim() == 0) {
    if (table.count("phi.activation") != 0) {
      shape_error("unexpected tensor phi.activation");
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// CSV / metrics export
// ---------------------------------------------------------------------------

std::string csv_number(Scalar v, int digits) {
  if (std::isnan(v)) {
    throw std::invalid_argument("csv_number: NaN entry");
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
  return buf;
}

namespace {

void write_text(const std::string& text, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open " + path);
  }
  f << text;
  if (!f) {
    throw std::runtime_error("short write to " + path);
  }
}

}  // namespace

void export_csv(const Matrix& m, const std::string& path, int digits) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) {
        out += ',';
      }
      out += csv_number(m(i, j), digits);
    }
    out += '\n';
  }
  write_text(out, path);
}

void export_csv(const Vector& v, const std::string& path, int digits) {
  std::string out;
  for (Index i = 0; i < v.size(); ++i) {
    out += csv_number(v[i], digits);
    out += '\n';
  }
  write_text(out, path);
}

std::string epoch_record_json(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["iteration"] = rec.iteration;
  j["train_loss"] = rec.train_loss;
  j["val_loss"] = rec.val_loss;
  j["val_metric"] = rec.val_metric;
  j["lr"] = rec.lr;
  return j.dump();
}

void write_metrics_jsonl(const RunHistory& history, const std::string& path) {
  std::string out;
  for (const auto& rec : history.epochs) {
    out += epoch_record_json(rec);
    out += '\n';
  }
  write_text(out, path);
}

}  // namespace ghostrnn
