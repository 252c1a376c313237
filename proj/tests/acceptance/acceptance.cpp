// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exits non-zero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "gen.hpp"
#include "oracles.hpp"
#include "qvit/attention.hpp"
#include "qvit/cli.hpp"
#include "qvit/data.hpp"
#include "qvit/metrics.hpp"
#include "qvit/model.hpp"
#include "qvit/qsim.hpp"
#include "qvit/trainer.hpp"
#include "scratch.hpp"

namespace fs = std::filesystem;
using namespace qvit;
using qvit::testing::Gen;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Verdict check(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qvit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = qvit::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "qvit %s: %s\n", args[1].c_str(), err.str().c_str());
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<double> flat(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// --- 1 ---------------------------------------------------------------------

Verdict parameter_counts() {
  using model::EncoderKind;
  using model::Variant;
  struct Golden {
    EncoderKind e;
    Variant v;
    std::size_t count;
  };
  const Golden goldens[] = {
      {EncoderKind::Classical, Variant::ClassToken, 4801}, {EncoderKind::Hybrid, Variant::ClassToken, 4601},
      {EncoderKind::Classical, Variant::ColumnMax, 4785},  {EncoderKind::Hybrid, Variant::ColumnMax, 4585},
      {EncoderKind::Classical, Variant::ColumnMean, 4785}, {EncoderKind::Hybrid, Variant::ColumnMean, 4585},
  };
  std::string bad;
  for (const auto& g : goldens) {
    model::ModelConfig c;
    c.encoder = g.e;
    c.variant = g.v;
    const auto got = model::count_params(c);
    if (c.d_i() != 32 || got != g.count) bad += " " + std::string(to_string(g.e)) + "/" + std::string(to_string(g.v)) + "=" + std::to_string(got);
    model::ModelConfig other = c;
    other.encoder = g.e == EncoderKind::Classical ? EncoderKind::Hybrid : EncoderKind::Classical;
    const auto diff = static_cast<std::int64_t>(g.e == EncoderKind::Classical ? got : model::count_params(other)) -
                      static_cast<std::int64_t>(g.e == EncoderKind::Classical ? model::count_params(other) : got);
    if (diff != 200 || model::classical_minus_hybrid(c) != 200) bad += " difference=" + std::to_string(diff);
  }
  return check(bad.empty(), bad.empty() ? "4801/4601/4785/4585/4785/4585, difference 200" : "mismatch:" + bad);
}

// --- 2 ---------------------------------------------------------------------

Verdict simulator_oracle() {
  Gen g(1001);
  double worst_amp = 0, worst_norm = 0;
  bool bounded = true;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (auto role : {qsim::Role::Key, qsim::Role::Query, qsim::Role::Value}) {
      const auto circuit = qsim::Circuit::for_role(role, n);
      for (int draw = 0; draw < 100; ++draw) {
        const auto x = g.angles(n), theta = g.angles(qsim::param_count(role, n));
        const auto s = qsim::run(circuit, x, theta);
        const auto ref = oracle::role_state(role, x, theta);
        for (std::size_t i = 0; i < ref.size(); ++i) worst_amp = std::max(worst_amp, std::abs(s.amplitudes()[i] - ref[i]));
        worst_norm = std::max(worst_norm, std::abs(s.norm() - 1.0));
        for (double z : qsim::expect_z_all(s)) bounded = bounded && z >= -1.0 && z <= 1.0;
      }
    }
  }
  return check(worst_amp <= 1e-10 && worst_norm <= 1e-10 && bounded,
               "max amplitude error " + num(worst_amp) + ", norm drift " + num(worst_norm) +
                   (bounded ? "" : ", <Z> out of range"));
}

// --- 3 ---------------------------------------------------------------------

Verdict shift_vs_differences() {
  Gen g(1002);
  double worst = 0;
  std::size_t checked = 0;
  for (auto role : {qsim::Role::Key, qsim::Role::Query, qsim::Role::Value}) {
    const auto circuit = qsim::Circuit::for_role(role, 4);
    for (int draw = 0; draw < 10; ++draw) {
      const auto x = g.angles(4), theta = g.angles(qsim::param_count(role, 4));
      for (std::size_t q = 0; q < 4; ++q) {
        const auto grad = qsim::grad_expectation(circuit, theta, x, q);
        auto f = [&](std::span<const double> t) { return qsim::expect_z(qsim::run(circuit, x, t), q); };
        for (std::size_t p = 0; p < theta.size(); ++p) {
          worst = std::max(worst, std::abs(grad.d_theta[p] - oracle::central_difference(f, theta, p, 1e-5)));
          ++checked;
        }
      }
    }
  }
  return check(worst <= 1e-7, std::to_string(checked) + " angle derivatives, max abs error " + num(worst));
}

// Smallest gap between the largest and second-largest entry of any column.
double min_column_margin(const Tensor& m) {
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m.cols(); ++c) {
    std::vector<double> col(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) col[r] = m(r, c);
    std::sort(col.rbegin(), col.rend());
    if (col.size() > 1) margin = std::min(margin, col[0] - col[1]);
  }
  return margin;
}

Verdict model_gradients() {
  Gen g(1003);
  double worst_rel = 0;
  std::size_t checked = 0;
  for (auto v : {model::Variant::ClassToken, model::Variant::ColumnMax, model::Variant::ColumnMean}) {
    model::ModelConfig c;
    c.encoder = model::EncoderKind::Hybrid;
    c.variant = v;
    c.geometry.grid_rows = 2;
    c.geometry.grid_cols = 2;
    c.d_t = 8;
    c.n_h = 2;
    c.d_ff = 8;
    c.n_l = 2;
    model::ParameterSet params;
    Tensor image;
    // Column max is piecewise smooth: draw points whose pooled columns have
    // no near-tie that a 1e-3 step could flip.
    do {
      params = model::ParameterSet::initialize(c, g.next());
      if (v == model::Variant::ClassToken)
        for (double& x : params.find("class_token")) x = g.uniform(-0.5, 0.5);
      image = Tensor::matrix(data::kGridSide, data::kGridSide, g.uniform_vector(data::kGridCells, 0, 1));
    } while (v == model::Variant::ColumnMax &&
             min_column_margin(model::encode(model::ModelTensors::bind(c, params, false), c, image)) < 0.05);
    const auto label = Tensor::vector({static_cast<double>(g.coin())});

    const auto tensors = model::ModelTensors::bind(c, params, true);
    backward(bce_loss(model::forward(tensors, c, image), label));
    std::vector<double> grad(params.size(), 0.0);
    tensors.accumulate_grads(grad);

    auto loss_at = [&](std::span<const double> values) {
      auto p = params;
      std::copy(values.begin(), values.end(), p.values().begin());
      return bce_loss(model::forward(model::ModelTensors::bind(c, p, false), c, image), label).item();
    };
    const std::vector<double> base(params.values().begin(), params.values().end());
    for (std::size_t i = 0; i < base.size(); ++i) {
      const double fd = oracle::central_difference(loss_at, base, i, 1e-3);
      const double scale = std::max(std::abs(fd), std::abs(grad[i]));
      // Exactly-zero derivatives (dead rotation layers) compare absolutely.
      const double err = scale > 1e-9 ? std::abs(grad[i] - fd) / scale : std::abs(grad[i] - fd);
      worst_rel = std::max(worst_rel, err);
      ++checked;
    }
  }
  return check(worst_rel <= 1e-4, std::to_string(checked) + " parameters over three variants, max rel error " + num(worst_rel));
}

// --- 4 ---------------------------------------------------------------------

Tensor random_matrix(Gen& g, std::size_t r, std::size_t c) {
  return Tensor::matrix(r, c, g.uniform_vector(r * c, -3, 3));
}

attention::HybridHeadParams random_head(Gen& g, std::size_t d_h) {
  return {Tensor::vector(g.angles(qsim::param_count(qsim::Role::Key, d_h))),
          Tensor::vector(g.angles(qsim::param_count(qsim::Role::Query, d_h))),
          Tensor::vector(g.angles(qsim::param_count(qsim::Role::Value, d_h)))};
}

Verdict head_invariants() {
  Gen g(1004);
  bool scores_ok = true, swap_ok = true;
  double worst_row = 0, worst_uniform = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d_h = 1 + g.index(4), tokens = 1 + g.index(8);
    const auto x = random_matrix(g, tokens, d_h);
    const auto p = random_head(g, d_h);
    const auto t = attention::hybrid_head_trace(x, p);
    for (std::size_t i = 0; i < t.scores.numel(); ++i) scores_ok = scores_ok && t.scores[i] <= 0.0 && t.scores[i] >= -4.0;
    for (std::size_t r = 0; r < tokens; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < tokens; ++c) total += t.weights(r, c);
      worst_row = std::max(worst_row, std::abs(total - 1.0));
    }
    const auto swapped = attention::hybrid_head_trace(x, {p.theta_q, p.theta_k, p.theta_v});
    for (std::size_t i = 0; i < tokens; ++i)
      for (std::size_t j = 0; j < tokens; ++j) swap_ok = swap_ok && t.scores(i, j) == swapped.scores(j, i);

    const attention::HybridHeadParams zero{Tensor::zeros({qsim::param_count(qsim::Role::Key, d_h)}),
                                           Tensor::zeros({qsim::param_count(qsim::Role::Query, d_h)}),
                                           Tensor::zeros({qsim::param_count(qsim::Role::Value, d_h)})};
    const auto z = attention::hybrid_head_trace(x, zero);
    for (std::size_t c = 0; c < d_h; ++c) {
      double mean = 0;
      for (std::size_t r = 0; r < tokens; ++r) mean += z.values(r, c) / static_cast<double>(tokens);
      for (std::size_t r = 0; r < tokens; ++r) {
        worst_uniform = std::max(worst_uniform, std::abs(z.output(r, c) - mean));
        worst_uniform = std::max(worst_uniform, std::abs(z.weights(r, r) - 1.0 / static_cast<double>(tokens)));
      }
    }
  }
  return check(scores_ok && swap_ok && worst_row <= 1e-12 && worst_uniform <= 1e-10,
               std::string(scores_ok ? "scores in [-4,0]" : "scores out of range") + ", row-sum error " +
                   num(worst_row) + (swap_ok ? ", swap transposes exactly" : ", swap mismatch") +
                   ", zero-angle error " + num(worst_uniform));
}

// --- 5 ---------------------------------------------------------------------

Verdict collapsed_signature() {
  std::vector<double> constant(1000, 0.5);
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  const auto m = train::compute_metrics(constant, labels, "test");
  bool ok = std::abs(m.accuracy - 0.5) <= 1e-4 && std::abs(m.bce - 0.6931) <= 1e-4 && std::abs(m.auc - 0.5) <= 1e-4;

  // The untrained class-token hybrid is such a constant predictor.
  model::ModelConfig c;
  c.encoder = model::EncoderKind::Hybrid;
  c.variant = model::Variant::ClassToken;
  const auto events = data::synth_generate(200, 7);
  const auto probs = train::predict_all(c, model::ParameterSet::initialize(c, 7), events);
  const auto [lo, hi] = std::minmax_element(probs.begin(), probs.end());
  ok = ok && *hi - *lo <= 1e-12;
  return check(ok, "constant 0.5: acc " + num(m.accuracy) + ", bce " + num(m.bce) + ", auc " + num(m.auc) +
                       "; untrained hybrid class-token prediction spread " + num(*hi - *lo));
}

// --- 6 ---------------------------------------------------------------------

struct CurveSummary {
  double best_val = 0;
  bool first_five_decreasing = false;
  std::vector<double> losses;
};

CurveSummary summarize(const fs::path& csv) {
  CurveSummary s;
  for (const auto& r : train::read_curves(csv)) {
    if (r.split == "val") s.best_val = std::max(s.best_val, r.accuracy);
    if (r.split == "train" && r.epoch <= 5) s.losses.push_back(r.loss);
  }
  s.first_five_decreasing = s.losses.size() == 5;
  for (std::size_t i = 1; i < s.losses.size(); ++i) s.first_five_decreasing = s.first_five_decreasing && s.losses[i] < s.losses[i - 1];
  return s;
}

Verdict desk_training(const fs::path& scratch) {
  std::string detail;
  bool ok = true;
  for (const auto& [encoder, target] : {std::pair<std::string, double>{"classical", 0.95}, {"hybrid", 0.85}}) {
    const auto dir = scratch / ("train_" + encoder);
    if (cli({"train", "--encoder", encoder, "--variant", "cmx", "--epochs", "40", "--seed", "0", "--quiet", "--out",
             dir.string()}) != 0)
      return fail(encoder + " training failed");
    const auto s = summarize(dir / "curves.csv");
    ok = ok && s.best_val >= target && s.first_five_decreasing;
    detail += (detail.empty() ? "" : "; ") + encoder + " cmx best val acc " + num(s.best_val) +
              (s.first_five_decreasing ? ", first 5 losses decreasing" : ", first 5 losses NOT decreasing");
  }
  return check(ok, detail);
}

// --- 7 ---------------------------------------------------------------------

Verdict real_data(const fs::path& scratch) {
  const char* env = std::getenv("QVIT_CERN_DATA");
  if (env == nullptr || *env == '\0') return {Outcome::Skip, "QVIT_CERN_DATA not set"};
  std::vector<fs::path> files;
  std::stringstream ss(env);
  for (std::string part; std::getline(ss, part, ':');)
    if (!part.empty()) files.push_back(part);
  for (const auto& f : files)
    if (!fs::exists(f)) return {Outcome::Skip, f.string() + " not found"};
  if (!data::hdf5_available()) return {Outcome::Skip, "built without HDF5"};

  // Equal share of a 20k-event subset from each file.
  std::vector<data::EventRecord> subset;
  const std::size_t per_file = 20000 / files.size();
  for (const auto& f : files) {
    data::DatasetReader reader(f, data::Format::Hdf5);
    for (std::size_t i = 0; i < per_file; ++i) {
      auto r = reader.next();
      if (!r) break;
      subset.push_back(std::move(*r));
    }
  }
  const auto path = scratch / "cern_subset.qvd";
  data::write_dataset(path, subset, data::Format::Portable);
  const auto dir = scratch / "train_cern";
  if (cli({"train", "--data", path.string(), "--encoder", "classical", "--variant", "cmx", "--epochs", "10",
           "--quiet", "--out", dir.string()}) != 0)
    return fail("training on the CERN subset failed");
  std::ifstream mf(dir / "manifest.json");
  const auto manifest = nlohmann::json::parse(mf);
  const double auc = manifest["evaluation"]["auc"].get<double>();
  return check(auc >= 0.70, std::to_string(subset.size()) + " events, test auc " + num(auc));
}

// --- 8 ---------------------------------------------------------------------

Verdict determinism(const fs::path& scratch) {
  std::vector<fs::path> dirs;
  for (const char* name : {"det_a", "det_b"}) {
    dirs.push_back(scratch / name);
    if (cli({"train", "--encoder", "hybrid", "--variant", "cmx", "--n", "600", "--epochs", "3", "--batch", "64",
             "--deterministic", "--seed", "11", "--quiet", "--out", dirs.back().string()}) != 0)
      return fail("training failed");
  }
  const bool same_ckpt = slurp(dirs[0] / "checkpoint.qvit") == slurp(dirs[1] / "checkpoint.qvit");
  const bool same_csv = slurp(dirs[0] / "curves.csv") == slurp(dirs[1] / "curves.csv");
  return check(same_ckpt && same_csv, std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") +
                                          ", curves " + (same_csv ? "identical" : "differ"));
}

// --- 9 ---------------------------------------------------------------------

Verdict auc_correctness() {
  Gen g(1009);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + g.index(200);
    const double levels = 1.0 + static_cast<double>(g.index(30));
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(g.unit() * levels) / levels;
      y[i] = g.coin() ? 1 : 0;
    }
    // Both classes present.
    y[0] = 0;
    y[1] = 1;
    if (train::auc(s, y) != oracle::pairwise_auc(s, y)) ++mismatches;
  }
  return check(mismatches == 0, "1000 tied score sets, " + std::to_string(mismatches) + " mismatches");
}

}  // namespace

int main() {
  const fs::path scratch = qvit::testing::scratch_dir("acceptance");
  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "parameter-count goldens", parameter_counts},
      {2, "simulator vs dense unitary oracle", simulator_oracle},
      {3, "gradient soundness",
       [] {
         const auto a = shift_vs_differences();
         const auto b = model_gradients();
         return Verdict{a.outcome == Outcome::Pass && b.outcome == Outcome::Pass ? Outcome::Pass : Outcome::Fail,
                        "circuits: " + a.detail + "; model: " + b.detail};
       }},
      {4, "hybrid head invariants", head_invariants},
      {5, "collapsed-predictor signature", collapsed_signature},
      {6, "desk-scale training", [&] { return desk_training(scratch); }},
      {7, "real-data smoke", [&] { return real_data(scratch); }},
      {8, "deterministic training", [&] { return determinism(scratch); }},
      {9, "AUC vs pairwise oracle", auc_correctness},
  };

  // QVIT_ACCEPTANCE_ONLY="3,5" runs a subset.
  std::vector<int> only;
  if (const char* env = std::getenv("QVIT_ACCEPTANCE_ONLY")) {
    std::stringstream ss(env);
    for (std::string part; std::getline(ss, part, ',');)
      if (!part.empty()) only.push_back(std::stoi(part));
  }

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const char* label = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    if (v.outcome == Outcome::Fail) ++failures;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", label, c.id, c.name, v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
