// detkit command-line interface: validate datasets, evaluate predictions,
// audit losses, run bipartite matching, benchmark adapters, and emit
// efficiency reports in json/csv/markdown.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "detkit/bench.hpp"
#include "detkit/dataset.hpp"
#include "detkit/errors.hpp"
#include "detkit/losses.hpp"
#include "detkit/matching.hpp"
#include "detkit/metrics.hpp"
#include "detkit/render.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw detkit::ValidationError("cannot open file: " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw detkit::ValidationError(path.string() + ": invalid JSON: " +
                                  e.what());
  }
}

detkit::BBox parse_box(const json& value, const std::string& what) {
  if (!value.is_array() || value.size() != 4) {
    throw detkit::ValidationError(what +
                                  " must be an array [cx, cy, w, h]");
  }
  for (const auto& v : value) {
    if (!v.is_number()) {
      throw detkit::ValidationError(what + " must contain numbers only");
    }
  }
  return detkit::BBox::validated(value[0].get<double>(),
                                 value[1].get<double>(),
                                 value[2].get<double>(),
                                 value[3].get<double>());
}

detkit::CostMatrix parse_cost_matrix(const json& root) {
  const json& m =
      root.is_object() && root.contains("cost") ? root.at("cost") : root;
  if (!m.is_array() || m.empty() || !m[0].is_array() || m[0].empty()) {
    throw detkit::ValidationError("cost matrix must be a non-empty 2D array");
  }
  const std::size_t rows = m.size();
  const std::size_t cols = m[0].size();
  detkit::CostMatrix cost(static_cast<Eigen::Index>(rows),
                          static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!m[r].is_array() || m[r].size() != cols) {
      throw detkit::ValidationError("cost matrix row " + std::to_string(r) +
                                    " has inconsistent width");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!m[r][c].is_number()) {
        throw detkit::ValidationError("cost matrix entry (" +
                                      std::to_string(r) + ", " +
                                      std::to_string(c) + ") is not a number");
      }
      cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m[r][c].get<double>();
    }
  }
  return cost;
}

Eigen::VectorXd parse_probs(const json& value, const std::string& what) {
  if (!value.is_array() || value.empty()) {
    throw detkit::ValidationError(what + " must be a non-empty array");
  }
  Eigen::VectorXd probs(static_cast<Eigen::Index>(value.size()));
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw detkit::ValidationError(what + " must contain numbers only");
    }
    probs[static_cast<Eigen::Index>(i)] = value[i].get<double>();
  }
  return probs;
}

struct MatchInputs {
  std::vector<detkit::QueryPrediction> predictions;
  std::vector<detkit::GroundTruth> ground_truths;
};

MatchInputs parse_match_pairs(const json& root) {
  if (!root.is_object() || !root.contains("predictions") ||
      !root.contains("ground_truths")) {
    throw detkit::ValidationError(
        "pair file needs 'predictions' and 'ground_truths' arrays");
  }
  MatchInputs inputs;
  for (const json& p : root.at("predictions")) {
    detkit::QueryPrediction pred;
    pred.class_probs = parse_probs(p.at("probs"), "prediction probs");
    pred.box = parse_box(p.at("box"), "prediction box");
    inputs.predictions.push_back(std::move(pred));
  }
  for (const json& g : root.at("ground_truths")) {
    detkit::GroundTruth gt;
    gt.class_id = g.at("class").get<int>();
    gt.box = parse_box(g.at("box"), "ground-truth box");
    inputs.ground_truths.push_back(std::move(gt));
  }
  return inputs;
}

// File-loaded probabilities are clamped away from 0/1 so rounded values
// do not crash the logarithms.
std::vector<detkit::MatchedPair> parse_matched_pairs(const json& root,
                                                     double clamp_width) {
  if (!root.is_object() || !root.contains("pairs") ||
      !root.at("pairs").is_array()) {
    throw detkit::ValidationError("pair file needs a 'pairs' array");
  }
  std::vector<detkit::MatchedPair> pairs;
  for (const json& p : root.at("pairs")) {
    detkit::MatchedPair pair;
    pair.pred_box = parse_box(p.at("pred_box"), "pred_box");
    pair.gt_box = parse_box(p.at("gt_box"), "gt_box");
    pair.pred_probs = parse_probs(p.at("probs"), "probs");
    for (Eigen::Index i = 0; i < pair.pred_probs.size(); ++i) {
      pair.pred_probs[i] =
          detkit::clamp_probability(pair.pred_probs[i], clamp_width);
    }
    pair.gt_class = p.at("gt_class").get<int>();
    if (p.contains("q")) {
      pair.q = p.at("q").get<double>();
    } else {
      pair.q = detkit::iou(pair.pred_box, pair.gt_box);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

std::vector<detkit::ModelMeta> parse_models(const json& root) {
  const json& list =
      root.is_object() && root.contains("models") ? root.at("models") : root;
  if (!list.is_array() || list.empty()) {
    throw detkit::UsageError("models file must contain a non-empty array");
  }
  std::vector<detkit::ModelMeta> models;
  for (const json& m : list) {
    detkit::ModelMeta meta;
    meta.name = m.at("name").get<std::string>();
    meta.params_m = m.at("params_m").get<double>();
    meta.gflops = m.at("gflops").get<double>();
    meta.latency_ms = m.at("latency_ms").get<double>();
    models.push_back(std::move(meta));
  }
  return models;
}

std::vector<std::string> collect_bench_inputs(const fs::path& path) {
  std::vector<std::string> inputs;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file()) inputs.push_back(entry.path().string());
    }
    std::sort(inputs.begin(), inputs.end());
  } else {
    std::ifstream in(path);
    if (!in) {
      throw detkit::ValidationError("cannot open inputs file: " +
                                    path.string());
    }
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) inputs.push_back(line);
    }
  }
  if (inputs.empty()) {
    throw detkit::UsageError("no benchmark inputs under " + path.string());
  }
  return inputs;
}

void require_open_unit(double value, const std::string& flag) {
  if (!(value > 0.0 && value < 1.0)) {
    throw detkit::UsageError(flag + " must lie strictly inside (0,1), got " +
                             std::to_string(value));
  }
}

void print_explain(const ordered_json& config, bool enabled) {
  if (enabled) {
    std::cerr << "resolved configuration: " << config.dump(2) << "\n";
  }
}

void add_weight_options(CLI::App* cmd, detkit::LossWeights& weights) {
  cmd->add_option("--alpha", weights.alpha, "focal balance factor")
      ->capture_default_str();
  cmd->add_option("--gamma", weights.gamma, "focal exponent")
      ->capture_default_str();
  cmd->add_option("--lambda-cls", weights.lambda_cls,
                  "classification term weight")
      ->capture_default_str();
  cmd->add_option("--lambda-bbox", weights.lambda_bbox, "L1 box term weight")
      ->capture_default_str();
  cmd->add_option("--lambda-giou", weights.lambda_giou, "GIoU term weight")
      ->capture_default_str();
}

ordered_json weights_json(const detkit::LossWeights& w) {
  return ordered_json{{"alpha", w.alpha},
                      {"gamma", w.gamma},
                      {"lambda_cls", w.lambda_cls},
                      {"lambda_bbox", w.lambda_bbox},
                      {"lambda_giou", w.lambda_giou}};
}

int run(int argc, char** argv) {
  CLI::App app{
      "detkit - detection evaluation and set-prediction loss toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "configuration file; command-line flags win");
  app.allow_config_extras(false);

  // validate ---------------------------------------------------------------
  auto* validate = app.add_subcommand(
      "validate", "parse and validate a YOLO-format label directory");
  std::string v_labels;
  std::string v_classes;
  std::string v_manifest;
  std::string v_format = "markdown";
  bool v_explain = false;
  validate->add_option("labels", v_labels, "label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  validate->add_option("--classes", v_classes,
                       "class list: file path or comma-separated names")
      ->required();
  validate->add_option("--manifest", v_manifest, "image stem manifest")
      ->check(CLI::ExistingFile);
  validate->add_option("--format", v_format, "json|csv|markdown")
      ->capture_default_str();
  validate->add_flag("--explain", v_explain,
                     "print the resolved configuration to stderr");
  validate->callback([&] {
    const auto format = detkit::parse_format(v_format);
    const auto classes = detkit::ClassList::from_spec(v_classes);
    const auto manifest = v_manifest.empty()
                              ? std::nullopt
                              : std::optional<fs::path>(v_manifest);
    print_explain(ordered_json{{"command", "validate"},
                               {"labels", v_labels},
                               {"classes", classes.names()},
                               {"manifest", v_manifest},
                               {"format", v_format}},
                  v_explain);
    const auto split = detkit::load_labels(v_labels, classes, manifest);
    const auto summary = detkit::summarize(split, classes);
    std::cout << detkit::render_dataset_summary(summary, classes, format);
  });

  // evaluate ---------------------------------------------------------------
  auto* evaluate = app.add_subcommand(
      "evaluate", "COCO-style evaluation of predictions against labels");
  std::string e_gt;
  std::string e_pred;
  std::string e_classes;
  std::string e_manifest;
  std::string e_format = "markdown";
  std::string e_interp = "coco101";
  std::string e_dump_pr;
  int e_workers = 1;
  bool e_explain = false;
  evaluate->add_option("--gt", e_gt, "ground-truth label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--pred", e_pred, "prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--classes", e_classes, "class list")->required();
  evaluate->add_option("--manifest", e_manifest, "image stem manifest")
      ->check(CLI::ExistingFile);
  evaluate->add_option("--format", e_format, "json|csv|markdown")
      ->capture_default_str();
  evaluate->add_option("--interp", e_interp, "coco101|continuous")
      ->capture_default_str();
  evaluate->add_option("--workers", e_workers, "per-image parallelism")
      ->capture_default_str();
  evaluate->add_option("--dump-pr", e_dump_pr,
                       "directory for per-class PR-curve CSV files");
  evaluate->add_flag("--explain", e_explain,
                     "print the resolved configuration to stderr");
  evaluate->callback([&] {
    const auto format = detkit::parse_format(e_format);
    const auto interp = detkit::parse_interpolation(e_interp);
    if (e_workers < 1) {
      throw detkit::UsageError("--workers must be >= 1");
    }
    const auto classes = detkit::ClassList::from_spec(e_classes);
    const auto manifest = e_manifest.empty()
                              ? std::nullopt
                              : std::optional<fs::path>(e_manifest);
    print_explain(ordered_json{{"command", "evaluate"},
                               {"gt", e_gt},
                               {"pred", e_pred},
                               {"classes", classes.names()},
                               {"manifest", e_manifest},
                               {"format", e_format},
                               {"interp", e_interp},
                               {"workers", e_workers}},
                  e_explain);
    const auto split = detkit::load_labels(e_gt, classes, manifest);
    const auto pred_images =
        detkit::load_predictions(e_pred, classes, manifest);
    const auto gts = detkit::all_ground_truths(split);
    const auto dets = detkit::all_detections(pred_images);
    if (gts.empty()) {
      throw detkit::UsageError("nothing to evaluate: the ground-truth set "
                               "under " + e_gt + " is empty");
    }
    detkit::EvalOptions options;
    options.interpolation = interp;
    options.workers = e_workers;
    const auto report = detkit::evaluate(dets, gts, classes, options);
    std::cout << detkit::render_eval_report(report, classes, format);
    if (!e_dump_pr.empty()) {
      fs::create_directories(e_dump_pr);
      for (int c : report.evaluated_classes) {
        const auto points = detkit::pr_curve(dets, gts, c, 0.5);
        std::ofstream out(fs::path(e_dump_pr) /
                          (classes.name(c) + "_pr.csv"));
        out << detkit::render_pr_curve_csv(points);
      }
    }
  });

  // confusion --------------------------------------------------------------
  auto* confusion = app.add_subcommand(
      "confusion", "cross-class confusion matrix with a background label");
  std::string c_gt;
  std::string c_pred;
  std::string c_classes;
  std::string c_manifest;
  std::string c_format = "markdown";
  double c_conf = 0.25;
  double c_iou = 0.45;
  bool c_explain = false;
  confusion->add_option("--gt", c_gt, "ground-truth label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  confusion->add_option("--pred", c_pred, "prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  confusion->add_option("--classes", c_classes, "class list")->required();
  confusion->add_option("--manifest", c_manifest, "image stem manifest")
      ->check(CLI::ExistingFile);
  confusion->add_option("--conf", c_conf, "confidence threshold")
      ->capture_default_str();
  confusion->add_option("--iou", c_iou, "IoU threshold")
      ->capture_default_str();
  confusion->add_option("--format", c_format, "json|csv|markdown")
      ->capture_default_str();
  confusion->add_flag("--explain", c_explain,
                      "print the resolved configuration to stderr");
  confusion->callback([&] {
    const auto format = detkit::parse_format(c_format);
    require_open_unit(c_conf, "--conf");
    require_open_unit(c_iou, "--iou");
    const auto classes = detkit::ClassList::from_spec(c_classes);
    const auto manifest = c_manifest.empty()
                              ? std::nullopt
                              : std::optional<fs::path>(c_manifest);
    print_explain(ordered_json{{"command", "confusion"},
                               {"gt", c_gt},
                               {"pred", c_pred},
                               {"classes", classes.names()},
                               {"conf", c_conf},
                               {"iou", c_iou},
                               {"format", c_format}},
                  c_explain);
    const auto split = detkit::load_labels(c_gt, classes, manifest);
    const auto pred_images =
        detkit::load_predictions(c_pred, classes, manifest);
    const auto gts = detkit::all_ground_truths(split);
    const auto dets = detkit::all_detections(pred_images);
    const auto matrix =
        detkit::confusion_matrix(dets, gts, classes.size(), c_conf, c_iou);
    std::cout << detkit::render_confusion(matrix, classes, {c_conf, c_iou},
                                          format);
  });

  // loss-audit ---------------------------------------------------------------
  auto* loss_audit = app.add_subcommand(
      "loss-audit", "total-loss breakdown for a matched-pair file");
  std::string l_pairs;
  std::string l_mode;
  std::string l_format = "markdown";
  double l_clamp = detkit::kDefaultProbClamp;
  detkit::LossWeights l_weights;
  bool l_explain = false;
  loss_audit->add_option("--pairs", l_pairs, "matched pairs JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  loss_audit
      ->add_option("--loss-mode", l_mode,
                   "verbatim|corrected (default: both)")
      ->capture_default_str();
  loss_audit->add_option("--format", l_format, "json|csv|markdown")
      ->capture_default_str();
  loss_audit->add_option("--clamp", l_clamp, "probability clamp width")
      ->capture_default_str();
  add_weight_options(loss_audit, l_weights);
  loss_audit->add_flag("--explain", l_explain,
                       "print the resolved configuration to stderr");
  loss_audit->callback([&] {
    const auto format = detkit::parse_format(l_format);
    const auto pairs = parse_matched_pairs(load_json_file(l_pairs), l_clamp);
    print_explain(ordered_json{{"command", "loss-audit"},
                               {"pairs", l_pairs},
                               {"loss_mode", l_mode.empty() ? "both" : l_mode},
                               {"clamp", l_clamp},
                               {"weights", weights_json(l_weights)},
                               {"format", l_format}},
                  l_explain);
    std::vector<std::pair<detkit::LossMode, detkit::LossBreakdown>> results;
    if (l_mode.empty()) {
      for (const auto mode :
           {detkit::LossMode::kVerbatim, detkit::LossMode::kCorrected}) {
        results.emplace_back(
            mode, detkit::total_loss(pairs, l_weights, mode, l_clamp));
      }
    } else {
      const auto mode = detkit::parse_loss_mode(l_mode);
      results.emplace_back(
          mode, detkit::total_loss(pairs, l_weights, mode, l_clamp));
    }
    std::cout << detkit::render_loss_audit(results, l_weights, pairs.size(),
                                           format);
  });

  // match --------------------------------------------------------------------
  auto* match = app.add_subcommand(
      "match", "minimum-cost assignment of predictions to ground truths");
  std::string m_cost;
  std::string m_pairs;
  detkit::LossWeights m_weights;
  bool m_explain = false;
  auto* cost_opt = match->add_option("--cost", m_cost, "cost matrix JSON file")
                       ->check(CLI::ExistingFile);
  match->add_option("--pairs", m_pairs, "prediction/ground-truth JSON file")
      ->check(CLI::ExistingFile)
      ->excludes(cost_opt);
  add_weight_options(match, m_weights);
  match->add_flag("--explain", m_explain,
                  "print the resolved configuration to stderr");
  match->callback([&] {
    if (m_cost.empty() == m_pairs.empty()) {
      throw detkit::UsageError("pass exactly one of --cost or --pairs");
    }
    print_explain(ordered_json{{"command", "match"},
                               {"cost", m_cost},
                               {"pairs", m_pairs},
                               {"weights", weights_json(m_weights)}},
                  m_explain);
    detkit::CostMatrix cost;
    if (!m_cost.empty()) {
      cost = parse_cost_matrix(load_json_file(m_cost));
    } else {
      const auto inputs = parse_match_pairs(load_json_file(m_pairs));
      cost = detkit::build_cost_matrix(inputs.predictions,
                                       inputs.ground_truths, m_weights);
    }
    std::cout << detkit::render_assignment_json(detkit::hungarian(cost));
  });

  // bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand(
      "bench", "latency benchmark of a detector adapter command");
  std::string b_adapter;
  std::string b_inputs;
  std::string b_format = "markdown";
  int b_warmup = 3;
  int b_iters = 20;
  bool b_explain = false;
  bench->add_option("--adapter", b_adapter,
                    "adapter command (reads input paths on stdin, writes "
                    "prediction paths on stdout)")
      ->required();
  bench->add_option("--inputs", b_inputs, "input list file or directory")
      ->required()
      ->check(CLI::ExistingPath);
  bench->add_option("--warmup", b_warmup, "untimed warmup calls")
      ->capture_default_str();
  bench->add_option("--iters", b_iters, "timed iterations")
      ->capture_default_str();
  bench->add_option("--format", b_format, "json|csv|markdown")
      ->capture_default_str();
  bench->add_flag("--explain", b_explain,
                  "print the resolved configuration to stderr");
  bench->callback([&] {
    const auto format = detkit::parse_format(b_format);
    const auto inputs = collect_bench_inputs(b_inputs);
    print_explain(ordered_json{{"command", "bench"},
                               {"adapter", b_adapter},
                               {"inputs", b_inputs},
                               {"warmup", b_warmup},
                               {"iters", b_iters},
                               {"format", b_format}},
                  b_explain);
    detkit::SubprocessDetector detector(b_adapter);
    const auto stats = detkit::benchmark(
        [&detector](const std::string& input) { return detector(input); },
        inputs, b_warmup, b_iters);
    std::cout << detkit::render_latency(stats, format);
  });

  // report -------------------------------------------------------------------
  auto* report = app.add_subcommand(
      "report", "model efficiency comparison from declared metadata");
  std::string r_models;
  std::string r_format = "markdown";
  bool r_explain = false;
  report->add_option("--models", r_models, "models JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--format", r_format, "json|csv|markdown")
      ->capture_default_str();
  report->add_flag("--explain", r_explain,
                   "print the resolved configuration to stderr");
  report->callback([&] {
    const auto format = detkit::parse_format(r_format);
    const auto models = parse_models(load_json_file(r_models));
    print_explain(ordered_json{{"command", "report"},
                               {"models", r_models},
                               {"format", r_format}},
                  r_explain);
    const auto rows = detkit::efficiency_report(models);
    std::cout << detkit::render_efficiency(rows, format);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? detkit::kExitOk : detkit::kExitUsage;
  }
  return detkit::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGPIPE, SIG_IGN);
  try {
    return run(argc, argv);
  } catch (const detkit::DetectorFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.partial()) {
      std::cerr << "partial report over " << e.completed_samples()
                << " completed samples:\n"
                << detkit::render_latency(*e.partial(),
                                          detkit::Format::kMarkdown);
    }
    return detkit::kExitRuntime;
  } catch (const detkit::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return detkit::kExitUsage;
  } catch (const detkit::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return detkit::kExitValidation;
  } catch (const detkit::DomainError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return detkit::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return detkit::kExitRuntime;
  }
}
