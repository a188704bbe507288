// Copyright (c) 2026 The GhostRNN Kit Authors
// SPDX-License-Identifier: Apache-2.0
//
// ghostrnn: train | eval | analyze | count | gradcheck | export.
// Exit codes: 0 ok, 2 usage or invalid config, 3 divergence, 4 check failed.

#include <CLI11.hpp>
#include <json.hpp>

#include "ghostrnn/complexity.hpp"
#include "ghostrnn/model_io.hpp"
#include "ghostrnn/redundancy.hpp"
#include "ghostrnn/trainer.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace ghostrnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCheckFailed = 4;

tasks::TaskKind task_from_name(const std::string& name) {
  if (name == "adding") {
    return tasks::TaskKind::Adding;
  }
  if (name == "order") {
    return tasks::TaskKind::OrderClassify;
  }
  if (name == "denoise") {
    return tasks::TaskKind::Denoise;
  }
  throw std::invalid_argument("unknown task: " + name);
}

std::string task_name(tasks::TaskKind kind) {
  switch (kind) {
    case tasks::TaskKind::Adding: return "adding";
    case tasks::TaskKind::OrderClassify: return "order";
    case tasks::TaskKind::Denoise: return "denoise";
  }
  return "?";
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) {
    throw std::invalid_argument("--out-dir must not be empty");
  }
  fs::create_directories(dir);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open " + path);
  }
  f << text;
}

void append_f64_le(std::string& out, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainFlags {
  std::string cell = "gru";
  std::string task = "adding";
  std::string phi = "tanh";
  std::string config_path;
  std::string out_dir = "out";
  TrainConfig cfg;
  std::vector<std::int64_t> lr_steps = {10000, 20000};
  double lr_gamma = 0.1;
  int repeats = 1;
};

void apply_config_file(TrainFlags& tf, const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw std::invalid_argument("cannot open config file " + path);
  }
  ordered_json j = ordered_json::parse(f);
  for (const auto& [key, value] : j.items()) {
    if (key == "cell") {
      tf.cell = value.get<std::string>();
    } else if (key == "task") {
      tf.task = value.get<std::string>();
    } else if (key == "phi") {
      tf.phi = value.get<std::string>();
    } else if (key == "state_dim") {
      tf.cfg.state_dim = value.get<Index>();
    } else if (key == "ratio") {
      tf.cfg.ratio = value.get<Index>();
    } else if (key == "train_count") {
      tf.cfg.train_count = value.get<Index>();
    } else if (key == "val_count") {
      tf.cfg.val_count = value.get<Index>();
    } else if (key == "length") {
      tf.cfg.length = value.get<Index>();
    } else if (key == "n_classes") {
      tf.cfg.n_classes = value.get<Index>();
    } else if (key == "seed") {
      tf.cfg.seed = value.get<std::uint64_t>();
    } else if (key == "batch_size") {
      tf.cfg.batch_size = value.get<Index>();
    } else if (key == "epochs") {
      tf.cfg.max_epochs = value.get<Index>();
    } else if (key == "max_iterations") {
      tf.cfg.max_iterations = value.get<std::int64_t>();
    } else if (key == "lr") {
      tf.cfg.schedule.initial_lr = value.get<double>();
    } else if (key == "lr_steps") {
      tf.cfg.schedule.steps.clear();
      for (const auto& pair : value) {
        tf.cfg.schedule.steps.push_back(
            {pair.at(0).get<std::int64_t>(), pair.at(1).get<double>()});
      }
    } else if (key == "weight_decay") {
      tf.cfg.weight_decay = value.get<double>();
    } else if (key == "clip_norm") {
      tf.cfg.clip_norm = value.get<double>();
    } else if (key == "patience") {
      tf.cfg.early_stop_patience = value.get<Index>();
    } else if (key == "min_delta") {
      tf.cfg.early_stop_min_delta = value.get<double>();
    } else if (key == "threads") {
      tf.cfg.threads = value.get<int>();
    } else if (key == "repeats") {
      tf.repeats = value.get<int>();
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
}

ordered_json config_json(const TrainFlags& tf) {
  ordered_json j;
  j["cell"] = tf.cell;
  j["task"] = tf.task;
  j["phi"] = tf.phi;
  j["state_dim"] = tf.cfg.state_dim;
  j["ratio"] = tf.cfg.ratio;
  j["train_count"] = tf.cfg.train_count;
  j["val_count"] = tf.cfg.val_count;
  j["length"] = tf.cfg.length;
  j["n_classes"] = tf.cfg.n_classes;
  j["seed"] = tf.cfg.seed;
  j["batch_size"] = tf.cfg.batch_size;
  j["epochs"] = tf.cfg.max_epochs;
  j["max_iterations"] = tf.cfg.max_iterations;
  j["lr"] = tf.cfg.schedule.initial_lr;
  ordered_json steps = ordered_json::array();
  for (const auto& s : tf.cfg.schedule.steps) {
    steps.push_back({s.iteration, s.multiplier});
  }
  j["lr_steps"] = steps;
  j["weight_decay"] = tf.cfg.weight_decay;
  j["clip_norm"] = tf.cfg.clip_norm;
  j["patience"] = tf.cfg.early_stop_patience;
  j["min_delta"] = tf.cfg.early_stop_min_delta;
  j["threads"] = tf.cfg.threads;
  j["repeats"] = tf.repeats;
  return j;
}

std::uint64_t weights_only_count(const TrainConfig& cfg) {
  const Index f = task_feature_dim(cfg);
  return cfg.cell == CellKind::Gru
             ? count_report_gru(f, cfg.state_dim).weights_only
             : count_report_ghost(f, cfg.state_dim, cfg.ratio).weights_only;
}

int cmd_train(TrainFlags& tf) {
  tf.cfg.cell = cell_kind_from_name(tf.cell);
  tf.cfg.task = task_from_name(tf.task);
  tf.cfg.phi_activation = activation_from_name(tf.phi);
  if (tf.repeats < 1) {
    throw std::invalid_argument("--repeats must be >= 1");
  }
  // Dimension sanity before any files are touched.
  if (tf.cfg.cell == CellKind::Ghost) {
    GhostParams::zeros(1, tf.cfg.state_dim, tf.cfg.ratio);
  } else if (tf.cfg.state_dim < 1) {
    throw std::invalid_argument("state-dim must be positive");
  }
  ensure_dir(tf.out_dir);
  write_file(tf.out_dir + "/config.json", config_json(tf).dump(2) + "\n");

  ordered_json summary;
  summary["runs"] = ordered_json::array();
  bool any_diverged = false;
  double metric_sum = 0.0;
  double loss_sum = 0.0;
  std::string metric_name;
  for (int run = 1; run <= tf.repeats; ++run) {
    TrainConfig cfg = tf.cfg;
    cfg.seed = tf.cfg.seed + static_cast<std::uint64_t>(run - 1);
    const std::string suffix =
        tf.repeats == 1 ? "" : "_run" + std::to_string(run);
    const std::string metrics_path = tf.out_dir + "/metrics" + suffix + ".jsonl";
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) {
      throw std::runtime_error("cannot open " + metrics_path);
    }
    TrainResult res = train(cfg, [&metrics](const EpochRecord& rec) {
      metrics << epoch_record_json(rec) << "\n";
      metrics.flush();
    });
    metric_name = res.metric_name;
    save_model(res.best, tf.out_dir + "/checkpoint" + suffix + ".grnn");

    double best_metric = std::numeric_limits<double>::quiet_NaN();
    for (const auto& rec : res.history.epochs) {
      if (rec.epoch == res.best_epoch) {
        best_metric = rec.val_metric;
      }
    }
    ordered_json run_j;
    run_j["run"] = run;
    run_j["seed"] = cfg.seed;
    run_j["epochs_ran"] = res.history.epochs.size();
    run_j["iterations"] = res.iterations;
    run_j["best_epoch"] = res.best_epoch;
    run_j["best_val_loss"] = res.best_val_loss;
    run_j["best_val_metric"] = best_metric;
    run_j["diverged"] = res.diverged;
    summary["runs"].push_back(run_j);
    any_diverged = any_diverged || res.diverged;
    loss_sum += res.best_val_loss;
    metric_sum += best_metric;
  }
  summary["metric_name"] = metric_name;
  summary["weights_only"] = weights_only_count(tf.cfg);
  summary["mean_best_val_loss"] = loss_sum / tf.repeats;
  summary["mean_best_val_metric"] = metric_sum / tf.repeats;
  write_file(tf.out_dir + "/summary.json", summary.dump(2) + "\n");

  std::cout << "train: cell=" << tf.cell << " task=" << tf.task
            << " state_dim=" << tf.cfg.state_dim << " ratio=" << tf.cfg.ratio
            << " weights_only=" << weights_only_count(tf.cfg)
            << " runs=" << tf.repeats
            << " best_val_loss=" << summary["mean_best_val_loss"].dump()
            << " best_val_metric=" << summary["mean_best_val_metric"].dump()
            << " (" << metric_name << ")"
            << (any_diverged ? " DIVERGED" : "") << "\n";
  return any_diverged ? kExitDiverged : kExitOk;
}

// ---------------------------------------------------------------------------
// eval / analyze share dataset flags
// ---------------------------------------------------------------------------

struct DataFlags {
  std::string task = "adding";
  Index count = 100;
  Index length = 50;
  Index n_classes = 4;
  std::uint64_t seed = 1;
};

tasks::Dataset make_eval_set(const DataFlags& df) {
  TrainConfig cfg;
  cfg.task = task_from_name(df.task);
  cfg.val_count = df.count;
  cfg.length = df.length;
  cfg.n_classes = df.n_classes;
  cfg.seed = df.seed;
  return val_split(cfg);
}

int cmd_eval(const std::string& checkpoint, const DataFlags& df) {
  const Model m = load_model(checkpoint);
  const tasks::Dataset ds = make_eval_set(df);
  const EvalResult res = evaluate(m, ds);
  ordered_json j;
  j["checkpoint"] = checkpoint;
  j["task"] = df.task;
  j["count"] = df.count;
  j["loss"] = res.loss;
  j["metric_name"] = res.metric_name;
  j["metric"] = res.metric;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& checkpoint, const DataFlags& df,
                Index max_steps, double threshold, const std::string& out_dir) {
  const Model m = load_model(checkpoint);
  const tasks::Dataset ds = make_eval_set(df);
  std::vector<std::vector<Vector>> sequences;
  sequences.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    sequences.push_back(s.inputs);
  }
  const FeatureMap fm = m.kind == CellKind::Gru
                            ? collect_feature_map(m.gru, sequences, max_steps)
                            : collect_feature_map(m.ghost, sequences, max_steps);
  PcaOptions opts;
  opts.threshold = threshold;
  const PcaReport pca = pca_contribution(fm, opts);
  const SimilarityMatrix sim = similarity_matrix(fm);

  ensure_dir(out_dir);
  export_csv(pca.singular_values, out_dir + "/singular_values.csv");
  export_csv(pca.contribution, out_dir + "/contribution.csv");
  export_csv(sim.values, out_dir + "/similarity.csv");

  ordered_json j;
  j["units"] = fm.units();
  j["steps"] = fm.steps();
  j["threshold"] = pca.options.threshold;
  j["centered"] = pca.options.centered;
  j["squared"] = pca.options.squared;
  j["k_at_threshold"] = pca.k_at_threshold;
  j["degenerate"] = pca.degenerate;
  j["suggested_ratio"] = suggest_ratio(pca, fm.units());
  ordered_json sv = ordered_json::array();
  for (Index i = 0; i < pca.singular_values.size(); ++i) {
    sv.push_back(pca.singular_values[i]);
  }
  j["singular_values"] = sv;
  ordered_json contrib = ordered_json::array();
  for (Index i = 0; i < pca.contribution.size(); ++i) {
    contrib.push_back(pca.contribution[i]);
  }
  j["contribution"] = contrib;
  write_file(out_dir + "/pca_report.json", j.dump(2) + "\n");
  std::cout << "analyze: units=" << fm.units() << " steps=" << fm.steps()
            << " k_at_threshold=" << pca.k_at_threshold
            << " suggested_ratio=" << suggest_ratio(pca, fm.units()) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// count / gradcheck / export
// ---------------------------------------------------------------------------

int cmd_count(const std::string& cell, Index feature_dim, Index state_dim,
              Index ratio) {
  const CellKind kind = cell_kind_from_name(cell);
  CountReport report;
  if (kind == CellKind::Gru) {
    if (ratio != 1) {
      throw std::invalid_argument("count: --cell gru requires --ratio 1");
    }
    report = count_report_gru(feature_dim, state_dim);
  } else {
    report = count_report_ghost(feature_dim, state_dim, ratio);
  }
  ordered_json j;
  j["cell"] = cell;
  j["feature_dim"] = feature_dim;
  j["state_dim"] = state_dim;
  j["ratio"] = ratio;
  j["weights_only"] = report.weights_only;
  j["with_biases"] = report.with_biases;
  j["macs_per_step"] = report.macs_per_step;
  j["compression_vs_gru"] = report.compression_vs_gru;
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const std::string& cell, Index feature_dim, Index state_dim,
                  Index ratio, Index length, const std::string& loss_name,
                  double eps, double tol, std::uint64_t seed) {
  const CellKind kind = cell_kind_from_name(cell);
  if (length < 1) {
    throw std::invalid_argument("gradcheck: --length must be positive");
  }
  RngState data_rng(mix_seed(seed ^ 0x64617461ull));  // "data"
  std::vector<Vector> xs(static_cast<std::size_t>(length));
  for (auto& x : xs) {
    x.resize(feature_dim);
    fill_uniform(data_rng, x, -1.0, 1.0);
  }
  SequenceLoss loss;
  if (loss_name == "mse") {
    Vector target(state_dim);
    fill_uniform(data_rng, target, -1.0, 1.0);
    loss = final_state_mse(target);
  } else if (loss_name == "ce") {
    loss = final_state_cross_entropy(
        static_cast<Index>(data_rng.next_below(static_cast<std::uint64_t>(state_dim))));
  } else {
    throw std::invalid_argument("gradcheck: --loss must be mse or ce");
  }
  Scalar err = 0.0;
  if (kind == CellKind::Gru) {
    if (ratio != 1) {
      throw std::invalid_argument("gradcheck: --cell gru requires --ratio 1");
    }
    err = grad_check(GruParams::init(feature_dim, state_dim, seed), xs, loss, eps);
  } else {
    err = grad_check(GhostParams::init(feature_dim, state_dim, ratio, seed), xs,
                     loss, eps);
  }
  std::cout << "gradcheck: cell=" << cell << " state_dim=" << state_dim
            << " ratio=" << ratio << " length=" << length
            << " loss=" << loss_name << " eps=" << eps
            << " max_rel_error=" << csv_number(err, 9) << " tol=" << tol << " "
            << (err < tol ? "OK" : "FAILED") << "\n";
  return err < tol ? kExitOk : kExitCheckFailed;
}

int cmd_export(const DataFlags& df, const std::string& out_dir) {
  TrainConfig cfg;
  cfg.task = task_from_name(df.task);
  const tasks::Dataset ds = [&] {
    switch (cfg.task) {
      case tasks::TaskKind::Adding:
        return tasks::gen_adding({df.seed, df.count, df.length});
      case tasks::TaskKind::OrderClassify:
        return tasks::gen_order_classify(
            {df.seed, df.count, df.length, df.n_classes});
      case tasks::TaskKind::Denoise: {
        tasks::DenoiseConfig dc;
        dc.seed = df.seed;
        dc.count = df.count;
        dc.length = df.length;
        return tasks::gen_denoise(dc);
      }
    }
    throw std::logic_error("unreachable");
  }();

  std::string bin;
  Index targets_per_sample = 0;
  for (const auto& s : ds.samples) {
    for (const auto& x : s.inputs) {
      for (Index i = 0; i < x.size(); ++i) {
        append_f64_le(bin, x[i]);
      }
    }
    switch (ds.kind) {
      case tasks::TaskKind::Adding:
        append_f64_le(bin, s.scalar_target);
        targets_per_sample = 1;
        break;
      case tasks::TaskKind::OrderClassify:
        append_f64_le(bin, static_cast<double>(s.label));
        targets_per_sample = 1;
        break;
      case tasks::TaskKind::Denoise:
        for (Index i = 0; i < s.clean.size(); ++i) {
          append_f64_le(bin, s.clean[i]);
        }
        targets_per_sample = s.clean.size();
        break;
    }
  }
  ensure_dir(out_dir);
  {
    std::ofstream f(out_dir + "/dataset.bin", std::ios::binary | std::ios::trunc);
    if (!f) {
      throw std::runtime_error("cannot open " + out_dir + "/dataset.bin");
    }
    f.write(bin.data(), static_cast<std::streamsize>(bin.size()));
  }
  const Index steps = static_cast<Index>(ds.samples.front().inputs.size());
  ordered_json j;
  j["task"] = df.task;
  j["seed"] = df.seed;
  j["count"] = df.count;
  j["length"] = df.length;
  j["feature_dim"] = ds.feature_dim;
  j["steps_per_sample"] = steps;
  j["inputs_per_sample"] = steps * ds.feature_dim;
  j["targets_per_sample"] = targets_per_sample;
  j["dtype"] = "f64";
  j["byte_order"] = "little";
  j["layout"] = "per sample: inputs row-major [steps x feature_dim], then targets";
  write_file(out_dir + "/dataset.json", j.dump(2) + "\n");
  std::cout << "export: task=" << df.task << " count=" << df.count
            << " bytes=" << bin.size() << "\n";
  return kExitOk;
}

void add_data_flags(CLI::App* sub, DataFlags& df) {
  sub->add_option("--task", df.task, "Task: adding | order | denoise")
      ->capture_default_str();
  sub->add_option("--count", df.count, "Number of samples")
      ->capture_default_str();
  sub->add_option("--length", df.length, "Sequence length (time steps)")
      ->capture_default_str();
  sub->add_option("--n-classes", df.n_classes, "Classes for the order task")
      ->capture_default_str();
  sub->add_option("--seed", df.seed, "Dataset seed")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "GhostRNN sequence-modeling kit. Deterministic throughout; set "
      "GHOSTRNN_THREADS to parallelize per-sample gradient work (0 = "
      "sequential, the reference mode; results are identical either way)."};
  app.require_subcommand(1);
  std::function<int()> action;

  // --- train ---------------------------------------------------------------
  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Train a cell on a synthetic task");
  train_cmd->add_option("--config", tf.config_path,
                        "JSON config file; explicit flags override its values");
  train_cmd->add_option("--cell", tf.cell, "Cell: gru | ghost")->capture_default_str();
  train_cmd->add_option("--task", tf.task, "Task: adding | order | denoise")
      ->capture_default_str();
  train_cmd->add_option("--phi", tf.phi,
                        "Ghost activation: tanh | sigmoid | identity")
      ->capture_default_str();
  train_cmd->add_option("--state-dim", tf.cfg.state_dim, "Full state width")
      ->capture_default_str();
  train_cmd->add_option("--ratio", tf.cfg.ratio, "Compression ratio r")
      ->capture_default_str();
  train_cmd->add_option("--train-count", tf.cfg.train_count, "Training samples")
      ->capture_default_str();
  train_cmd->add_option("--val-count", tf.cfg.val_count, "Validation samples")
      ->capture_default_str();
  train_cmd->add_option("--length", tf.cfg.length, "Sequence length")
      ->capture_default_str();
  train_cmd->add_option("--n-classes", tf.cfg.n_classes, "Classes (order task)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tf.cfg.seed, "Master seed")->capture_default_str();
  train_cmd->add_option("--batch-size", tf.cfg.batch_size, "Batch size")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tf.cfg.max_epochs, "Epoch limit")
      ->capture_default_str();
  train_cmd->add_option("--max-iterations", tf.cfg.max_iterations,
                        "Optimizer-step limit; 0 = epochs only")
      ->capture_default_str();
  train_cmd->add_option("--lr", tf.cfg.schedule.initial_lr, "Initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--lr-steps", tf.lr_steps,
                        "Iterations where the rate steps down")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--lr-gamma", tf.lr_gamma, "Multiplier at each step")
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", tf.cfg.weight_decay,
                        "Decoupled weight decay")
      ->capture_default_str();
  train_cmd->add_option("--clip-norm", tf.cfg.clip_norm, "Global gradient-norm clip")
      ->capture_default_str();
  train_cmd->add_option("--patience", tf.cfg.early_stop_patience,
                        "Early-stop patience in epochs; 0 = off")
      ->capture_default_str();
  train_cmd->add_option("--min-delta", tf.cfg.early_stop_min_delta,
                        "Required validation-loss improvement")
      ->capture_default_str();
  train_cmd->add_option("--threads", tf.cfg.threads,
                        "Worker threads; -1 = GHOSTRNN_THREADS env")
      ->capture_default_str();
  train_cmd->add_option("--repeats", tf.repeats,
                        "Independent runs (seed, seed+1, ...); mean reported")
      ->capture_default_str();
  train_cmd->add_option("--out-dir", tf.out_dir, "Output directory")
      ->capture_default_str();
  train_cmd->callback([&] {
    action = [&]() -> int {
      if (!tf.config_path.empty()) {
        // Flags win over the file: re-apply every explicitly passed flag.
        TrainFlags flag_values = tf;
        apply_config_file(tf, tf.config_path);
        auto passed = [&](const std::string& name) {
          return train_cmd->count(name) > 0;
        };
        if (passed("--cell")) tf.cell = flag_values.cell;
        if (passed("--task")) tf.task = flag_values.task;
        if (passed("--phi")) tf.phi = flag_values.phi;
        if (passed("--state-dim")) tf.cfg.state_dim = flag_values.cfg.state_dim;
        if (passed("--ratio")) tf.cfg.ratio = flag_values.cfg.ratio;
        if (passed("--train-count")) tf.cfg.train_count = flag_values.cfg.train_count;
        if (passed("--val-count")) tf.cfg.val_count = flag_values.cfg.val_count;
        if (passed("--length")) tf.cfg.length = flag_values.cfg.length;
        if (passed("--n-classes")) tf.cfg.n_classes = flag_values.cfg.n_classes;
        if (passed("--seed")) tf.cfg.seed = flag_values.cfg.seed;
        if (passed("--batch-size")) tf.cfg.batch_size = flag_values.cfg.batch_size;
        if (passed("--epochs")) tf.cfg.max_epochs = flag_values.cfg.max_epochs;
        if (passed("--max-iterations"))
          tf.cfg.max_iterations = flag_values.cfg.max_iterations;
        if (passed("--lr"))
          tf.cfg.schedule.initial_lr = flag_values.cfg.schedule.initial_lr;
        if (passed("--weight-decay"))
          tf.cfg.weight_decay = flag_values.cfg.weight_decay;
        if (passed("--clip-norm")) tf.cfg.clip_norm = flag_values.cfg.clip_norm;
        if (passed("--patience"))
          tf.cfg.early_stop_patience = flag_values.cfg.early_stop_patience;
        if (passed("--min-delta"))
          tf.cfg.early_stop_min_delta = flag_values.cfg.early_stop_min_delta;
        if (passed("--threads")) tf.cfg.threads = flag_values.cfg.threads;
        if (passed("--repeats")) tf.repeats = flag_values.repeats;
        if (passed("--lr-steps") || passed("--lr-gamma")) {
          tf.cfg.schedule.steps.clear();
          for (std::int64_t it : flag_values.lr_steps) {
            tf.cfg.schedule.steps.push_back({it, flag_values.lr_gamma});
          }
        }
      } else if (train_cmd->count("--lr-steps") > 0 ||
                 train_cmd->count("--lr-gamma") > 0) {
        tf.cfg.schedule.steps.clear();
        for (std::int64_t it : tf.lr_steps) {
          tf.cfg.schedule.steps.push_back({it, tf.lr_gamma});
        }
      }
      return cmd_train(tf);
    };
  });

  // --- eval ----------------------------------------------------------------
  DataFlags eval_df;
  std::string eval_ckpt;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a task");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
  add_data_flags(eval_cmd, eval_df);
  eval_cmd->callback([&] {
    action = [&] { return cmd_eval(eval_ckpt, eval_df); };
  });

  // --- analyze -------------------------------------------------------------
  DataFlags an_df;
  an_df.count = 8;
  std::string an_ckpt, an_out = "analysis";
  Index an_max_steps = 4096;
  double an_threshold = 0.99;
  auto* an_cmd = app.add_subcommand(
      "analyze", "State-redundancy analysis of a checkpoint (SVD, PCA "
                 "contribution, cosine-similarity matrix)");
  an_cmd->add_option("--checkpoint", an_ckpt, "Checkpoint path")->required();
  add_data_flags(an_cmd, an_df);
  an_cmd->add_option("--max-steps", an_max_steps,
                     "Column cap on the collected feature map")
      ->capture_default_str();
  an_cmd->add_option("--threshold", an_threshold, "PCA contribution threshold")
      ->capture_default_str();
  an_cmd->add_option("--out-dir", an_out, "Output directory")->capture_default_str();
  an_cmd->callback([&] {
    action = [&] {
      return cmd_analyze(an_ckpt, an_df, an_max_steps, an_threshold, an_out);
    };
  });

  // --- count ---------------------------------------------------------------
  std::string count_cell = "gru";
  Index count_f = 10, count_s = 100, count_r = 1;
  auto* count_cmd =
      app.add_subcommand("count", "Parameter and MAC counts for a configuration");
  count_cmd->add_option("--cell", count_cell, "Cell: gru | ghost")
      ->capture_default_str();
  count_cmd->add_option("--feature-dim", count_f, "Input feature width")
      ->capture_default_str();
  count_cmd->add_option("--state-dim", count_s, "Full state width")
      ->capture_default_str();
  count_cmd->add_option("--ratio", count_r, "Compression ratio r")
      ->capture_default_str();
  count_cmd->callback([&] {
    action = [&] { return cmd_count(count_cell, count_f, count_s, count_r); };
  });

  // --- gradcheck -----------------------------------------------------------
  std::string gc_cell = "ghost", gc_loss = "mse";
  Index gc_f = 3, gc_s = 8, gc_r = 2, gc_len = 6;
  double gc_eps = 1e-5, gc_tol = 1e-5;
  std::uint64_t gc_seed = 1;
  auto* gc_cmd = app.add_subcommand(
      "gradcheck", "Central-difference check of the analytic gradients");
  gc_cmd->add_option("--cell", gc_cell, "Cell: gru | ghost")->capture_default_str();
  gc_cmd->add_option("--feature-dim", gc_f, "Input feature width")
      ->capture_default_str();
  gc_cmd->add_option("--state-dim", gc_s, "Full state width")->capture_default_str();
  gc_cmd->add_option("--ratio", gc_r, "Compression ratio r")->capture_default_str();
  gc_cmd->add_option("--length", gc_len, "Sequence length")->capture_default_str();
  gc_cmd->add_option("--loss", gc_loss, "Loss: mse | ce")->capture_default_str();
  gc_cmd->add_option("--eps", gc_eps, "Central-difference epsilon")
      ->capture_default_str();
  gc_cmd->add_option("--tol", gc_tol, "Max relative error accepted")
      ->capture_default_str();
  gc_cmd->add_option("--seed", gc_seed, "Seed for params and data")
      ->capture_default_str();
  gc_cmd->callback([&] {
    action = [&] {
      return cmd_gradcheck(gc_cell, gc_f, gc_s, gc_r, gc_len, gc_loss, gc_eps,
                           gc_tol, gc_seed);
    };
  });

  // --- export --------------------------------------------------------------
  DataFlags ex_df;
  std::string ex_out = "export";
  auto* ex_cmd = app.add_subcommand(
      "export", "Dump a generated dataset as flat f64 binary plus JSON sidecar");
  add_data_flags(ex_cmd, ex_df);
  ex_cmd->add_option("--out-dir", ex_out, "Output directory")->capture_default_str();
  ex_cmd->callback([&] {
    action = [&] { return cmd_export(ex_df, ex_out); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action();
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
