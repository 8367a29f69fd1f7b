/*
 * Copyright 2026 The ccagnn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccagnn/ccagnn.hpp"
#include "ccagnn/gradcheck_suites.hpp"

namespace ccagnn::cli {

/// Bad flags, values or config entries; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Flags shared by train and ablate.
struct TrainFlags {
  std::string data;
  std::string test_data;
  std::string out;
  std::size_t epochs = 20;
  double lr = 1e-3;
  std::size_t folds = 5;
  double val_fraction = 0.2;
  std::size_t patience = 5;
  std::size_t steps_per_epoch = 1;
  std::size_t jobs = 1;
  std::string variant = "full";
  bool baseline = false;
  std::string average = "macro";
  LossWeights weights;
  AugmentationConfig augmentation;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t layers = 2;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Reads `key=value` lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

/// Fills options that were not given on the command line from the config file.
inline void apply_config(CLI::App& app, const std::string& path) {
  if (path.empty()) return;
  for (const auto& [key, value] : read_config(path)) {
    if (key == "config") throw UsageError("config files cannot include other config files");
    CLI::Option* opt = app.get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError("unknown config key '" + key + "' in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

/// CCAGNN_SEED, when set, replaces the --seed value.
inline std::uint64_t effective_seed(std::uint64_t flag_seed) {
  const char* env = std::getenv("CCAGNN_SEED");
  if (env == nullptr || *env == '\0') return flag_seed;
  std::uint64_t v = 0;
  const std::string s = env;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw UsageError("CCAGNN_SEED must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

inline void add_seed(CLI::App* app, std::uint64_t& seed) {
  app->add_option("--seed", seed, "Random seed (CCAGNN_SEED overrides)")->capture_default_str();
}

inline void add_config(CLI::App* app, std::string& path) {
  app->add_option("--config", path, "key=value file; command-line flags take precedence");
}

inline void add_train_flags(CLI::App* app, TrainFlags& f) {
  app->add_option("--data", f.data, "GraphBundle directory used for training")->required();
  app->add_option("--test-data", f.test_data, "GraphBundle scored on the test folds (default: --data)");
  app->add_option("--epochs", f.epochs, "Maximum epochs per fold")->capture_default_str();
  app->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--folds", f.folds, "Cross-validation folds")->capture_default_str();
  app->add_option("--val-fraction", f.val_fraction, "Validation share of each fold's non-test nodes")
      ->capture_default_str();
  app->add_option("--patience", f.patience, "Early-stopping patience in epochs")->capture_default_str();
  app->add_option("--steps-per-epoch", f.steps_per_epoch, "Optimizer steps per epoch")->capture_default_str();
  app->add_option("--jobs", f.jobs, "Worker threads for folds and variants")->capture_default_str();
  app->add_option("--average", f.average, "F1 averaging: macro, micro or weighted")->capture_default_str();
  app->add_option("--heads", f.heads, "Attention heads per layer")->capture_default_str();
  app->add_option("--head-dim", f.head_dim, "Width of each attention head")->capture_default_str();
  app->add_option("--layers", f.layers, "Shared encoder layers")->capture_default_str();
  auto& w = f.weights;
  app->add_option("--w-ce-causal", w.ce_causal, "Weight of the causal-branch cross-entropy")->capture_default_str();
  app->add_option("--w-ce-fusion", w.ce_fusion, "Weight of the fusion-branch cross-entropy")->capture_default_str();
  app->add_option("--w-ce-intervention", w.ce_intervention, "Weight of the intervention cross-entropy")
      ->capture_default_str();
  app->add_option("--w-ce-noncausal", w.ce_noncausal, "Weight of the non-causal uniformity term")
      ->capture_default_str();
  app->add_option("--w-mi", w.mi, "Weight of the pathway MI term")->capture_default_str();
  app->add_option("--w-cond-mi", w.cond_mi, "Weight of the class-conditional MI term")->capture_default_str();
  app->add_option("--w-pred-mi", w.pred_mi, "Weight of the prediction MI term")->capture_default_str();
  app->add_option("--w-inv-mi", w.inv_mi, "Weight of the invariance MI term")->capture_default_str();
  app->add_option("--w-orth", w.orth, "Weight of the orthogonality term")->capture_default_str();
  app->add_option("--w-contrastive", w.contrastive, "Weight of the supervised contrastive term")
      ->capture_default_str();
  app->add_option("--w-center", w.center, "Weight of the center term")->capture_default_str();
  app->add_option("--w-adaptive", w.adaptive, "Depth of the epoch ramp on intervention and MI weights")
      ->capture_default_str();
  app->add_option("--w-gate-conf", w.gate_conf, "Weight of the gate confidence term")->capture_default_str();
  auto& a = f.augmentation;
  app->add_option("--noise-scale", a.noise_scale, "Attention-scaled embedding noise")->capture_default_str();
  app->add_option("--mask-rate", a.mask_rate, "Feature masking rate")->capture_default_str();
  app->add_option("--edge-drop-rate", a.edge_drop_rate, "Share of edges dropped per step")->capture_default_str();
  app->add_option("--edge-add-rate", a.edge_add_rate, "Share of random edges added per step")
      ->capture_default_str();
}

inline TrainConfig to_train_config(const TrainFlags& f, std::uint64_t seed, Variant variant) {
  TrainConfig cfg;
  cfg.epochs = f.epochs;
  cfg.patience = f.patience;
  cfg.steps_per_epoch = f.steps_per_epoch;
  cfg.adam.lr = f.lr;
  cfg.weights = f.weights;
  cfg.augmentation = f.augmentation;
  cfg.model.heads = f.heads;
  cfg.model.head_dim = f.head_dim;
  cfg.model.encoder_layers = f.layers;
  cfg.seed = seed;
  try {
    cfg.average = parse_average(f.average);
    cfg = cfg.with_variant(variant);
    if (f.baseline) cfg = cfg.as_baseline();
    cfg.validate();
    if (f.heads == 0 || f.head_dim == 0 || f.layers == 0) throw std::invalid_argument("model sizes must be positive");
    if (f.jobs == 0) throw std::invalid_argument("jobs must be positive");
    if (f.folds < 2) throw std::invalid_argument("folds must be at least 2");
    if (!(f.val_fraction >= 0.0 && f.val_fraction < 1.0)) throw std::invalid_argument("val-fraction must lie in [0, 1)");
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline Variant variant_flag(const std::string& name) {
  try {
    return parse_variant(name);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

struct Data {
  Graph train;
  Graph test;
  bool separate_test = false;
};

inline Data load_data(const TrainFlags& f) {
  Data d;
  d.train = add_self_loops(load_bundle(f.data));
  if (!f.test_data.empty()) {
    d.test = add_self_loops(load_bundle(f.test_data));
    d.separate_test = true;
    if (d.test.num_nodes() != d.train.num_nodes() || d.test.num_features() != d.train.num_features() ||
        d.test.num_classes() != d.train.num_classes()) {
      throw DimensionError("test bundle " + f.test_data + " has " + std::to_string(d.test.num_nodes()) + " nodes, " +
                           std::to_string(d.test.num_features()) + " features, " +
                           std::to_string(d.test.num_classes()) + " classes; training bundle has " +
                           std::to_string(d.train.num_nodes()) + ", " + std::to_string(d.train.num_features()) +
                           ", " + std::to_string(d.train.num_classes()));
    }
  }
  return d;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

struct Commands {
  std::uint64_t seed = 0;
  std::string config;
  TrainFlags train;

  // eval
  std::string checkpoint, eval_data, eval_out = "predictions.csv", split = "test";
  int fold = -1;

  // gradcheck
  std::string suite = "all";
  double tolerance = 1e-4, step = 1e-4;

  // synth
  SyntheticSpec synth;
  std::string synth_out;

  // ablate
  std::string variants = "full,basic_mi,no_learned_gate,no_custom_loss,gatv1";

  // plot
  std::vector<std::string> metrics, columns;
  std::string plot_out, title;
};

inline int cmd_train(Commands& c, std::ostream& out) {
  const auto seed = detail::effective_seed(c.seed);
  const TrainConfig cfg = detail::to_train_config(c.train, seed, detail::variant_flag(c.train.variant));
  if (c.train.out.empty()) throw UsageError("--out is required");
  const auto data = detail::load_data(c.train);
  const FoldPlan plan = make_folds(data.train, c.train.folds, c.train.val_fraction, seed);
  const CVResult cv =
      cross_validate(data.train, plan, cfg, data.separate_test ? &data.test : nullptr, c.train.jobs);
  const std::filesystem::path dir = c.train.out;
  write_text(dir / "metrics.csv", metrics_csv(cv.folds));
  write_text(dir / "summary.csv", summary_csv(cv));
  write_text(dir / "telemetry.csv", telemetry_csv(cv.folds));
  for (const auto& f : cv.folds) {
    nlohmann::json extra;
    extra["fold"] = f.fold;
    extra["folds"] = plan.k;
    extra["val_fraction"] = plan.val_fraction;
    extra["split_seed"] = plan.seed;
    extra["seed"] = seed;
    extra["best_epoch"] = f.best_epoch;
    extra["test_f1"] = f.test_f1;
    extra["variant"] = c.train.baseline ? "baseline" : c.train.variant;
    save_checkpoint(*f.model, cfg.weights, dir / "checkpoints" / ("fold_" + std::to_string(f.fold)), extra);
    out << "fold " << f.fold << ": test_f1 " << detail::fixed(f.test_f1) << ", best epoch " << f.best_epoch << " of "
        << f.epochs.size() << " (" << detail::fixed(f.seconds, 1) << "s)\n";
  }
  out << "test " << c.train.average << " F1: " << detail::fixed(cv.mean) << " +/- " << detail::fixed(cv.stddev)
      << "\n";
  return kExitOk;
}

inline int cmd_eval(Commands& c, std::ostream& out) {
  if (c.split != "train" && c.split != "val" && c.split != "test" && c.split != "all") {
    throw UsageError("--split must be train, val, test or all");
  }
  Checkpoint ck = load_checkpoint(c.checkpoint);
  const Graph g = add_self_loops(load_bundle(c.eval_data));
  const ModelConfig& mc = ck.model.config();
  if (g.num_features() != mc.in_dim || g.num_classes() != mc.num_classes) {
    throw DimensionError("checkpoint expects " + std::to_string(mc.in_dim) + " features and " +
                         std::to_string(mc.num_classes) + " classes, bundle " + c.eval_data + " has " +
                         std::to_string(g.num_features()) + " features and " + std::to_string(g.num_classes()) +
                         " classes");
  }
  std::vector<std::size_t> nodes;
  if (c.split == "all") {
    nodes.resize(g.num_nodes());
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = i;
  } else {
    const auto& m = ck.meta;
    if (!m.contains("folds") || !m.contains("split_seed") || !m.contains("fold")) {
      throw UsageError("checkpoint has no fold record; use --split all");
    }
    const std::size_t fold = c.fold >= 0 ? static_cast<std::size_t>(c.fold) : m.at("fold").get<std::size_t>();
    const FoldPlan plan = make_folds(g, m.at("folds").get<std::size_t>(), m.value("val_fraction", 0.2),
                                     m.at("split_seed").get<std::uint64_t>());
    if (fold >= plan.folds.size()) throw UsageError("--fold " + std::to_string(fold) + " is out of range");
    const Fold& f = plan.folds[fold];
    nodes = c.split == "train" ? f.train : c.split == "val" ? f.val : f.test;
  }
  Tensor logits;
  {
    Tape::NoGrad ng;
    logits = ck.model.predict(g).fusion_logits;
  }
  const std::size_t k = g.num_classes();
  const auto lv = logits.values();
  std::vector<std::size_t> truth, pred;
  std::string csv = "node,true,pred,confidence\n";
  for (std::size_t i : nodes) {
    const auto row = lv.subspan(i * k, k);
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    double z = 0.0;
    for (double v : row) z += std::exp(v - row[best]);
    truth.push_back(g.labels()[i]);
    pred.push_back(best);
    csv += std::to_string(i) + "," + std::to_string(g.labels()[i]) + "," + std::to_string(best) + "," +
           format_double(1.0 / z) + "\n";
  }
  write_text(c.eval_out, csv);
  out << "split " << c.split << ": " << nodes.size() << " nodes\n";
  out << "macro_f1 " << format_double(macro_f1(pred, truth, k)) << "\n";
  const auto per = per_class_f1(pred, truth, k);
  for (std::size_t j = 0; j < k; ++j) out << "class " << j << " f1 " << format_double(per[j]) << "\n";
  return kExitOk;
}

inline int cmd_gradcheck(Commands& c, std::ostream& out, std::ostream& err) {
  if (!(c.tolerance >= 0.0)) throw UsageError("--tolerance must be non-negative");
  if (!(c.step > 0.0)) throw UsageError("--step must be positive");
  std::vector<std::string> suites;
  if (c.suite == "all") {
    suites = gradcheck_suite_names();
  } else {
    bool known = false;
    for (const auto& s : gradcheck_suite_names()) known = known || s == c.suite;
    if (!known) throw UsageError("unknown suite '" + c.suite + "' (expected primitives, layers, model or all)");
    suites = {c.suite};
  }
  const auto seed = detail::effective_seed(c.seed);
  bool ok = true;
  for (const auto& name : suites) {
    const SuiteResult r = run_gradcheck_suite(name, c.step, c.tolerance, seed);
    out << "suite " << name << ": " << r.cases.size() << " cases, worst relative error "
        << format_double(r.max_rel_error) << " at " << r.worst << (r.passed ? " PASS" : " FAIL") << "\n";
    if (!r.passed) {
      ok = false;
      for (const auto& cs : r.cases) {
        if (cs.report.passed) continue;
        for (const auto& e : cs.report.entries) {
          if (e.max_rel_error < c.tolerance) continue;
          err << "gradcheck: " << name << "/" << cs.name << "/" << e.name << " element " << e.worst_index
              << ": analytic " << format_double(e.analytic) << ", numeric " << format_double(e.numeric)
              << ", relative error " << format_double(e.max_rel_error) << "\n";
        }
      }
    }
  }
  return ok ? kExitOk : kExitFailure;
}

inline int cmd_synth(Commands& c, std::ostream& out) {
  if (c.synth_out.empty()) throw UsageError("--out is required");
  SyntheticSpec spec = c.synth;
  spec.seed = detail::effective_seed(c.seed);
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const SyntheticData data = synth_confounded(spec);
  const std::filesystem::path dir = c.synth_out;
  save_bundle(data.train.graph, dir / "train");
  save_bundle(data.test.graph, dir / "test");
  nlohmann::json gt;
  gt["causal_features"] = data.causal_features;
  gt["spurious_features"] = data.spurious_features;
  gt["confounder_train"] = data.train.confounder;
  gt["confounder_test"] = data.test.confounder;
  gt["spec"] = {{"num_nodes", spec.num_nodes},     {"causal_dims", spec.causal_dims},
                {"spurious_dims", spec.spurious_dims}, {"num_classes", spec.num_classes},
                {"rho_train", spec.rho_train},     {"rho_test", spec.rho_test},
                {"p_in", spec.p_in},               {"p_out", spec.p_out},
                {"causal_shift", spec.causal_shift}, {"spurious_shift", spec.spurious_shift},
                {"seed", spec.seed}};
  write_text(dir / "groundtruth.json", gt.dump(2) + "\n");
  out << "wrote " << (dir / "train").string() << " (" << data.train.graph.num_edges() << " edges) and "
      << (dir / "test").string() << " (" << data.test.graph.num_edges() << " edges)\n";
  return kExitOk;
}

inline int cmd_ablate(Commands& c, std::ostream& out) {
  const auto seed = detail::effective_seed(c.seed);
  if (c.train.out.empty()) throw UsageError("--out is required");
  std::vector<Variant> variants;
  std::stringstream ss(c.variants);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) variants.push_back(detail::variant_flag(item));
  }
  if (variants.empty()) throw UsageError("--variants selects no variant");
  if (c.train.baseline) throw UsageError("--baseline does not apply to ablate");
  TrainFlags flags = c.train;
  flags.variant = "full";
  const TrainConfig cfg = detail::to_train_config(flags, seed, Variant::full);
  const auto data = detail::load_data(c.train);
  const FoldPlan plan = make_folds(data.train, c.train.folds, c.train.val_fraction, seed);
  const auto results =
      run_ablation(data.train, plan, cfg, variants, data.separate_test ? &data.test : nullptr, c.train.jobs);
  std::string csv = "variant,mean_f1,std_f1\n";
  std::vector<std::string> labels;
  std::vector<double> means, stds;
  for (const auto& r : results) {
    csv += std::string(variant_name(r.variant)) + "," + format_double(r.cv.mean) + "," + format_double(r.cv.stddev) +
           "\n";
    labels.emplace_back(variant_name(r.variant));
    means.push_back(r.cv.mean);
    stds.push_back(r.cv.stddev);
    out << variant_name(r.variant) << ": " << detail::fixed(r.cv.mean) << " +/- " << detail::fixed(r.cv.stddev) << "\n";
  }
  const std::filesystem::path dir = c.train.out;
  write_text(dir / "ablation.csv", csv);
  write_text(dir / "ablation.svg", svg::bar_chart("Test F1 by variant", labels, means, stds));
  return kExitOk;
}

inline int cmd_plot(Commands& c, std::ostream& out) {
  if (c.metrics.empty()) throw UsageError("at least one --metrics file is required");
  if (c.plot_out.empty()) throw UsageError("--out is required");
  std::vector<std::string> columns = c.columns.empty() ? std::vector<std::string>{"mi"} : c.columns;
  std::vector<svg::Series> series;
  std::vector<std::size_t> boundaries;
  for (std::size_t m = 0; m < c.metrics.size(); ++m) {
    const CsvTable t = read_csv(c.metrics[m]);
    if (t.rows.empty()) throw std::runtime_error(c.metrics[m] + " has a header but no rows");
    if (m == 0) {
      const std::size_t fc = t.column("fold");
      for (std::size_t r = 1; r < t.rows.size(); ++r)
        if (t.rows[r][fc] != t.rows[r - 1][fc]) boundaries.push_back(r);
    }
    for (const auto& col : columns) {
      const std::size_t k = t.column(col);
      svg::Series s;
      s.name = c.metrics.size() > 1 ? std::filesystem::path(c.metrics[m]).parent_path().filename().string() + ":" + col
                                    : col;
      for (const auto& row : t.rows) s.values.push_back(parse_double(row[k]));
      series.push_back(std::move(s));
    }
  }
  const std::string title = c.title.empty() ? "Training curves" : c.title;
  write_text(c.plot_out, svg::line_chart(title, series, boundaries, "epoch (folds concatenated)"));
  out << "wrote " << c.plot_out << " with " << series.size() << " series and " << boundaries.size()
      << " fold boundaries\n";
  return kExitOk;
}

/// Parses args (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on runtime or verification failure, 2 on usage errors.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Commands c;
  CLI::App app("Confounder-aware graph attention networks: training, evaluation and verification", "ccagnn");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  auto* train = app.add_subcommand("train", "Cross-validated training; writes metrics, summary and checkpoints");
  detail::add_train_flags(train, c.train);
  train->add_option("--out", c.train.out, "Output directory")->required();
  train->add_option("--variant", c.train.variant, "full, basic_mi, no_learned_gate, no_custom_loss or gatv1")
      ->capture_default_str();
  train->add_flag("--baseline", c.train.baseline, "Train the plain attention baseline instead");
  detail::add_seed(train, c.seed);
  detail::add_config(train, c.config);

  auto* eval = app.add_subcommand("eval", "Scores a checkpoint on a bundle and writes predictions.csv");
  eval->add_option("--checkpoint", c.checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", c.eval_data, "GraphBundle directory")->required();
  eval->add_option("--split", c.split, "Nodes to score: train, val, test or all")->capture_default_str();
  eval->add_option("--fold", c.fold, "Fold index (default: the checkpoint's own fold)");
  eval->add_option("--out", c.eval_out, "Predictions file")->capture_default_str();
  detail::add_config(eval, c.config);

  auto* gradcheck = app.add_subcommand("gradcheck", "Checks gradients against central finite differences");
  gradcheck->add_option("--suite", c.suite, "primitives, layers, model or all")->capture_default_str();
  gradcheck->add_option("--tolerance", c.tolerance, "Maximum relative error")->capture_default_str();
  gradcheck->add_option("--step", c.step, "Finite-difference step")->capture_default_str();
  detail::add_seed(gradcheck, c.seed);
  detail::add_config(gradcheck, c.config);

  auto* synth = app.add_subcommand("synth", "Writes a confounded benchmark as train and test bundles");
  synth->add_option("--out", c.synth_out, "Output directory")->required();
  synth->add_option("--nodes", c.synth.num_nodes, "Node count")->capture_default_str();
  synth->add_option("--causal-dims", c.synth.causal_dims, "Causal feature columns")->capture_default_str();
  synth->add_option("--spurious-dims", c.synth.spurious_dims, "Spurious feature columns")->capture_default_str();
  synth->add_option("--classes", c.synth.num_classes, "Class count")->capture_default_str();
  synth->add_option("--rho-train", c.synth.rho_train, "Confounder-label agreement in the train view")
      ->capture_default_str();
  synth->add_option("--rho-test", c.synth.rho_test, "Confounder-label agreement in the test view")
      ->capture_default_str();
  synth->add_option("--p-in", c.synth.p_in, "Within-class edge probability")->capture_default_str();
  synth->add_option("--p-out", c.synth.p_out, "Cross-class edge probability")->capture_default_str();
  synth->add_option("--causal-shift", c.synth.causal_shift, "Class mean offset on causal columns")
      ->capture_default_str();
  synth->add_option("--spurious-shift", c.synth.spurious_shift, "Confounder mean offset on spurious columns")
      ->capture_default_str();
  detail::add_seed(synth, c.seed);
  detail::add_config(synth, c.config);

  auto* ablate = app.add_subcommand("ablate", "Cross-validates each variant; writes ablation.csv and a bar chart");
  detail::add_train_flags(ablate, c.train);
  ablate->add_option("--out", c.train.out, "Output directory")->required();
  ablate->add_option("--variants", c.variants, "Comma-separated variants")->capture_default_str();
  detail::add_seed(ablate, c.seed);
  detail::add_config(ablate, c.config);

  auto* plot = app.add_subcommand("plot", "Line chart of metrics.csv columns with fold boundaries");
  plot->add_option("--metrics", c.metrics, "metrics.csv file (repeatable)")->required();
  plot->add_option("--column", c.columns, "Column to draw (repeatable; default mi)");
  plot->add_option("--out", c.plot_out, "SVG output file")->required();
  plot->add_option("--title", c.title, "Chart title");
  detail::add_config(plot, c.config);

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size());
  for (auto it = args.rbegin(); it != args.rend(); ++it) argv_store.push_back(*it);
  try {
    app.parse(argv_store);
    CLI::App* sub = app.get_subcommands().front();
    detail::apply_config(*sub, c.config);
    if (sub == train) return cmd_train(c, out);
    if (sub == eval) return cmd_eval(c, out);
    if (sub == gradcheck) return cmd_gradcheck(c, out, err);
    if (sub == synth) return cmd_synth(c, out);
    if (sub == ablate) return cmd_ablate(c, out);
    return cmd_plot(c, out);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace ccagnn::cli
