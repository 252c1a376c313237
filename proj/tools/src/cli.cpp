// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qvit/checkpoint.hpp"
#include "qvit/data.hpp"
#include "qvit/errors.hpp"
#include "qvit/model.hpp"
#include "qvit/parallel.hpp"
#include "qvit/trainer.hpp"

namespace qvit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kDefaultSyntheticEvents = 3000;

struct ModelFlags {
  std::string encoder = "classical";
  std::string variant = "cmx";
  bool positional = true;
  model::ModelConfig base;

  model::ModelConfig config() const {
    auto c = base;
    c.encoder = model::parse_encoder(encoder);
    c.variant = model::parse_variant(variant);
    c.positional = positional;
    c.validate();
    return c;
  }
};

void add_model_flags(CLI::App* app, ModelFlags& f) {
  app->add_option("--encoder", f.encoder, "classical or hybrid")->capture_default_str();
  app->add_option("--variant", f.variant, "cls (class token), cmx (column max) or cmn (column mean)")
      ->capture_default_str();
  app->add_flag("--pos,!--no-pos", f.positional, "add the sinusoidal positional table (default on)");
  app->add_option("--d-t", f.base.d_t, "token length")->capture_default_str();
  app->add_option("--n-h", f.base.n_h, "attention heads per layer")->capture_default_str();
  app->add_option("--d-ff", f.base.d_ff, "feed-forward width")->capture_default_str();
  app->add_option("--n-l", f.base.n_l, "encoder layers")->capture_default_str();
  app->add_option("--crop-rows", f.base.geometry.crop_rows, "rows of the central crop")->capture_default_str();
  app->add_option("--crop-cols", f.base.geometry.crop_cols, "columns of the central crop")->capture_default_str();
  app->add_option("--grid-rows", f.base.geometry.grid_rows, "patch rows")->capture_default_str();
  app->add_option("--grid-cols", f.base.geometry.grid_cols, "patch columns")->capture_default_str();
  app->add_option("--angle-scale", f.base.angle_scale, "multiplier on circuit input angles")->capture_default_str();
}

struct DataFlags {
  std::string path;
  std::string format = "portable";
  std::size_t synthetic = kDefaultSyntheticEvents;
  std::string fractions;
};

void add_data_flags(CLI::App* app, DataFlags& f) {
  app->add_option("--data", f.path, "dataset file; synthetic showers when omitted");
  app->add_option("--format", f.format, "portable or hdf5")->capture_default_str();
  app->add_option("--n", f.synthetic, "synthetic events when --data is omitted")->capture_default_str();
  app->add_option("--split", f.fractions,
                  "train,val,test fractions (default 0.8,0.1,0.1 for files, 4/6,1/6,1/6 for synthetic)");
}

data::SplitFractions parse_fractions(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> v;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("--split: '" + part + "' is not a number");
    }
  }
  if (v.size() != 3) throw ConfigError("--split needs three comma-separated fractions");
  return {v[0], v[1], v[2]};
}

struct LoadedData {
  std::vector<data::EventRecord> records;
  data::DatasetSplit split;
  json source;
};

LoadedData load_data(const DataFlags& f, std::uint64_t seed) {
  LoadedData d;
  data::SplitFractions fractions{4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
  if (f.path.empty()) {
    if (f.synthetic == 0) throw ConfigError("--n must be positive");
    d.records = data::synth_generate(f.synthetic, seed);
    d.source = {{"kind", "synthetic"}, {"events", f.synthetic}, {"seed", seed}};
  } else {
    const auto format = data::parse_format(f.format);
    data::DatasetReader reader(f.path, format);
    while (auto r = reader.next()) d.records.push_back(std::move(*r));
    d.source = {{"kind", "file"},
                {"path", fs::absolute(f.path).string()},
                {"format", f.format},
                {"content_hash", data::content_hash(f.path)},
                {"events", d.records.size()},
                {"rejected_empty", reader.rejected()}};
    fractions = {};
  }
  if (!f.fractions.empty()) fractions = parse_fractions(f.fractions);
  d.split = data::split(d.records, fractions, seed);
  return d;
}

json split_json(const data::DatasetSplit& s) {
  return {{"seed", s.seed},
          {"fractions", {s.fractions.train, s.fractions.validation, s.fractions.test}},
          {"sizes", {s.train.size(), s.validation.size(), s.test.size()}}};
}

json metrics_json(const train::MetricsReport& m) {
  return {{"split", m.split}, {"count", m.count}, {"accuracy", m.accuracy}, {"bce", m.bce}, {"auc", m.auc}};
}

attention::GradientMethod parse_gradient(const std::string& s) {
  if (s == "adjoint") return attention::GradientMethod::Adjoint;
  if (s == "shift" || s == "parameter-shift") return attention::GradientMethod::ParameterShift;
  throw ConfigError("unknown gradient method '" + s + "' (adjoint or shift)");
}

struct TrainFlags {
  train::TrainConfig config;
  std::string gradient = "adjoint";
  bool quiet = false;
};

void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--epochs", f.config.epochs, "training epochs")->capture_default_str();
  app->add_option("--batch", f.config.batch_size, "mini-batch size")->capture_default_str();
  app->add_option("--lr", f.config.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--threads", f.config.threads, "worker threads (0: QVIT_THREADS or all cores)");
  app->add_flag("--deterministic", f.config.deterministic, "order-independent gradient reduction");
  app->add_option("--gradient", f.gradient, "circuit gradients: adjoint or shift")->capture_default_str();
  app->add_flag("--quiet", f.quiet, "no per-epoch progress on stderr");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// --- subcommands -----------------------------------------------------------

int cmd_gen_data(std::size_t n, std::uint64_t seed, const std::string& out_path, const std::string& format,
                 bool indistinguishable, std::ostream& out) {
  if (n == 0) throw ConfigError("--n must be positive");
  if (out_path.empty()) throw ConfigError("gen-data needs --out");
  const auto params = indistinguishable ? data::SynthParams::indistinguishable() : data::SynthParams{};
  const auto records = data::synth_generate(n, seed, params);
  data::write_dataset(out_path, records, data::parse_format(format));
  out << out_path << " " << n << " events " << data::content_hash(out_path) << "\n";
  return kExitOk;
}

struct RunOutcome {
  model::Checkpoint best;
  train::TrainResult result;
  train::MetricsReport test;
  json manifest;
};

RunOutcome train_run(const model::ModelConfig& config, const LoadedData& d, train::TrainConfig tc,
                     const fs::path& out_dir) {
  const auto tr = data::subset(d.records, d.split.train);
  const auto va = data::subset(d.records, d.split.validation);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    tc.diagnostic_path = out_dir / "diverged.qvit";
  }
  RunOutcome o;
  o.result = train::train(config, tr, va, tc);
  o.best = o.result.best;
  o.best.extra["split"] = split_json(d.split);
  o.best.extra["data"] = d.source;
  const auto& test_idx = d.split.test.empty() ? d.split.validation : d.split.test;
  const auto te = data::subset(d.records, test_idx);
  o.test = train::evaluate(o.best, te, d.split.test.empty() ? "val" : "test", tc.threads);

  o.manifest = {{"tool", "qvit"},
                {"model", model::to_json(config)},
                {"train", train::to_json(tc)},
                {"data", d.source},
                {"split", split_json(d.split)},
                {"params", model::count_params(config)},
                {"best_epoch", o.best.epoch},
                {"steps", o.result.steps},
                {"best_metrics", o.best.metrics},
                {"evaluation", metrics_json(o.test)}};
  if (!out_dir.empty()) {
    model::save_checkpoint(out_dir / "checkpoint.qvit", o.best);
    train::export_curves(o.result.curves, out_dir / "curves.csv");
    o.manifest["outputs"] = {{"checkpoint", "checkpoint.qvit"}, {"curves", "curves.csv"}};
    std::ofstream mf(out_dir / "manifest.json");
    if (!mf) throw IoError("cannot write manifest in " + out_dir.string());
    mf << o.manifest.dump(2) << "\n";
  }
  return o;
}

int cmd_train(const ModelFlags& mf, const DataFlags& df, TrainFlags tf, std::uint64_t seed, const std::string& out,
              std::ostream& os, std::ostream& err) {
  const auto config = mf.config();
  tf.config.seed = seed;
  tf.config.gradient = parse_gradient(tf.gradient);
  tf.config.validate();
  if (out.empty()) throw ConfigError("train needs --out");
  const auto d = load_data(df, seed);
  if (!tf.quiet) {
    tf.config.on_epoch = [&err](const train::EpochRecord& t, const train::EpochRecord& v) {
      err << "epoch " << t.epoch << "  train loss " << fmt(t.loss) << " acc " << fmt(t.accuracy) << "  val loss "
          << fmt(v.loss) << " acc " << fmt(v.accuracy) << "\n";
    };
  }
  const auto o = train_run(config, d, tf.config, out);
  os << o.manifest["evaluation"].dump() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const DataFlags& df, const std::string& which,
             std::optional<std::uint64_t> seed_override, std::size_t threads, std::ostream& os) {
  if (checkpoint_path.empty()) throw ConfigError("eval needs --checkpoint");
  const auto ck = model::load_checkpoint(checkpoint_path);
  auto flags = df;
  std::uint64_t seed = seed_override.value_or(ck.seed);
  if (ck.extra.contains("split") && flags.fractions.empty()) {
    const auto& f = ck.extra["split"]["fractions"];
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", f[0].get<double>(), f[1].get<double>(), f[2].get<double>());
    flags.fractions = buf;
    if (!seed_override) seed = ck.extra["split"]["seed"].get<std::uint64_t>();
  }
  if (flags.path.empty() && ck.extra.contains("data") && ck.extra["data"].value("kind", "") == "synthetic") {
    flags.synthetic = ck.extra["data"]["events"].get<std::size_t>();
  }
  const auto d = load_data(flags, seed);
  std::vector<std::size_t> idx;
  if (which == "train") idx = d.split.train;
  else if (which == "val") idx = d.split.validation;
  else if (which == "test") idx = d.split.test;
  else if (which == "all") {
    idx.resize(d.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    throw ConfigError("--on must be train, val, test or all");
  }
  const auto records = data::subset(d.records, idx);
  os << metrics_json(train::evaluate(ck, records, which, threads)).dump() << "\n";
  return kExitOk;
}

int cmd_count_params(const ModelFlags& mf, bool audit, std::ostream& os) {
  const auto config = mf.config();
  if (!audit) {
    os << model::count_params(config) << "\n";
    return kExitOk;
  }
  const auto a = model::audit_param_count(config);
  json j = {{"allocated", a.allocated},
            {"closed_form_without_classifier", a.closed_form},
            {"classifier_constant", a.classifier_constant},
            {"consistent", a.consistent()},
            {"classical_minus_hybrid", model::classical_minus_hybrid(config)}};
  json tensors = json::array();
  for (const auto& s : model::parameter_layout(config)) tensors.push_back({{"name", s.name}, {"shape", s.shape}});
  j["tensors"] = tensors;
  os << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_export_curves(const std::string& from, const std::string& out_path, std::ostream& os) {
  if (from.empty() || out_path.empty()) throw ConfigError("export-curves needs --run and --out");
  fs::path src = from;
  if (fs::is_directory(src)) src /= "curves.csv";
  const auto curves = train::read_curves(src);
  if (fs::path(out_path).extension() == ".json") {
    json arr = json::array();
    for (const auto& c : curves)
      arr.push_back({{"epoch", c.epoch}, {"split", c.split}, {"loss", c.loss}, {"accuracy", c.accuracy}});
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path);
    f << arr.dump(2) << "\n";
  } else {
    train::export_curves(curves, out_path);
  }
  os << out_path << " " << curves.size() << " rows\n";
  return kExitOk;
}

// --- run-matrix --------------------------------------------------------------

struct Cell {
  std::string encoder, variant;
  bool positional = true;
};

std::vector<std::string> string_list(const json& j, const char* key, std::vector<std::string> fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<std::vector<std::string>>();
}

int cmd_run_matrix(const std::string& config_path, const std::string& out_path, bool parallel, bool quiet,
                   std::ostream& os, std::ostream& err) {
  if (config_path.empty() || out_path.empty()) throw ConfigError("run-matrix needs --config and --out");
  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open matrix config " + config_path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("matrix config: ") + e.what(), e.byte);
  }

  ModelFlags base;
  TrainFlags tf;
  DataFlags df;
  std::uint64_t seed = 0;
  try {
    const auto m = cfg.value("model", json::object());
    base.base.d_t = m.value("d_t", base.base.d_t);
    base.base.n_h = m.value("n_h", base.base.n_h);
    base.base.d_ff = m.value("d_ff", base.base.d_ff);
    base.base.n_l = m.value("n_l", base.base.n_l);
    base.base.angle_scale = m.value("angle_scale", base.base.angle_scale);
    const auto t = cfg.value("train", json::object());
    tf.config.epochs = t.value("epochs", tf.config.epochs);
    tf.config.batch_size = t.value("batch", tf.config.batch_size);
    tf.config.learning_rate = t.value("lr", tf.config.learning_rate);
    tf.config.deterministic = t.value("deterministic", tf.config.deterministic);
    seed = cfg.value("seed", seed);
    const auto d = cfg.value("data", json::object());
    df.path = d.value("path", df.path);
    df.format = d.value("format", df.format);
    df.synthetic = d.value("synthetic", df.synthetic);
    df.fractions = d.value("split", df.fractions);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("matrix config: ") + e.what());
  }
  tf.config.seed = seed;
  tf.config.validate();

  std::vector<Cell> cells;
  std::vector<bool> positional = {true, false};
  if (cfg.contains("positional")) positional = cfg["positional"].get<std::vector<bool>>();
  for (const auto& e : string_list(cfg, "encoders", {"classical", "hybrid"}))
    for (const auto& v : string_list(cfg, "variants", {"cls", "cmx", "cmn"}))
      for (bool p : positional) cells.push_back({e, v, p});

  const auto data = load_data(df, seed);

  std::vector<std::string> rows(cells.size());
  std::mutex log_mutex;
  auto run_cell = [&](std::size_t i, std::size_t threads) {
    const auto& c = cells[i];
    std::ostringstream row;
    row << c.encoder << "," << c.variant << "," << (c.positional ? "true" : "false") << ",";
    try {
      auto flags = base;
      flags.encoder = c.encoder;
      flags.variant = c.variant;
      flags.positional = c.positional;
      const auto config = flags.config();
      auto tc = tf.config;
      tc.threads = threads;
      const auto o = train_run(config, data, tc, {});
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%zu,ok", o.test.accuracy, o.test.bce, o.test.auc,
                    model::count_params(config));
      row << buf;
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      row << ",,,,error: " << msg;
    }
    rows[i] = row.str();
    if (!quiet) {
      std::lock_guard lock(log_mutex);
      err << "[" << i + 1 << "/" << cells.size() << "] " << rows[i] << "\n";
    }
  };

  if (parallel) {
    parallel_for(cells.size(), thread_budget(), [&](std::size_t b, std::size_t e, std::size_t) {
      for (std::size_t i = b; i < e; ++i) run_cell(i, 1);
    });
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i, 0);
  }

  std::ofstream csv(out_path);
  if (!csv) throw IoError("cannot write " + out_path);
  csv << "encoder,variant,positional,accuracy,bce,auc,params,status\n";
  for (const auto& r : rows) csv << r << "\n";
  os << out_path << " " << rows.size() << " cells\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"qvit: classical and hybrid quantum vision transformers for calorimeter images", "qvit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qvit 0.1.0");

  std::uint64_t seed = 0;
  std::string out_path;

  auto* gen = app.add_subcommand("gen-data", "write synthetic electron/photon showers");
  std::size_t gen_n = kDefaultSyntheticEvents;
  std::string gen_format = "portable";
  bool indistinguishable = false;
  gen->add_option("--n", gen_n, "number of events")->capture_default_str();
  gen->add_option("--seed", seed, "random seed")->capture_default_str();
  gen->add_option("--out", out_path, "output file")->required();
  gen->add_option("--format", gen_format, "portable or hdf5")->capture_default_str();
  gen->add_flag("--indistinguishable", indistinguishable, "draw both classes from the photon distribution");

  ModelFlags train_model;
  DataFlags train_data;
  TrainFlags train_flags;
  auto* tr = app.add_subcommand("train", "train one model and write checkpoint, curves and manifest");
  add_model_flags(tr, train_model);
  add_data_flags(tr, train_data);
  add_train_flags(tr, train_flags);
  tr->add_option("--seed", seed, "seed for data, split, initialization and shuffling")->capture_default_str();
  tr->add_option("--out", out_path, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  std::string ckpt_path, on_split = "test";
  DataFlags eval_data;
  std::optional<std::uint64_t> eval_seed;
  std::size_t eval_threads = 0;
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  add_data_flags(ev, eval_data);
  ev->add_option("--on", on_split, "train, val, test or all")->capture_default_str();
  ev->add_option("--seed", eval_seed, "split seed (default: the one stored in the checkpoint)");
  ev->add_option("--threads", eval_threads, "worker threads");

  ModelFlags count_model;
  bool audit = false;
  auto* cp = app.add_subcommand("count-params", "print the trainable parameter count");
  add_model_flags(cp, count_model);
  cp->add_flag("--audit", audit, "JSON breakdown with the closed-form reconciliation");

  std::string curves_from;
  auto* ec = app.add_subcommand("export-curves", "copy a run's curves to CSV or JSON");
  ec->add_option("--run", curves_from, "run directory or curves.csv")->required();
  ec->add_option("--out", out_path, "output file (.csv or .json)")->required();

  std::string matrix_config;
  bool matrix_parallel = false, matrix_quiet = false;
  auto* rm = app.add_subcommand("run-matrix", "train and evaluate every encoder x variant x positional cell");
  rm->add_option("--config", matrix_config, "JSON matrix description")->required();
  rm->add_option("--out", out_path, "summary CSV")->required();
  rm->add_flag("--parallel", matrix_parallel, "run cells concurrently");
  rm->add_flag("--quiet", matrix_quiet, "no per-cell progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  try {
    if (*gen) return cmd_gen_data(gen_n, seed, out_path, gen_format, indistinguishable, out);
    if (*tr) return cmd_train(train_model, train_data, train_flags, seed, out_path, out, err);
    if (*ev) return cmd_eval(ckpt_path, eval_data, on_split, eval_seed, eval_threads, out);
    if (*cp) return cmd_count_params(count_model, audit, out);
    if (*ec) return cmd_export_curves(curves_from, out_path, out);
    if (*rm) return cmd_run_matrix(matrix_config, out_path, matrix_parallel, matrix_quiet, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace qvit::cli
