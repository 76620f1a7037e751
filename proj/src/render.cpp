#include "detkit/render.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"

namespace detkit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kMetricDigitsMd = 3;   // matches the table convention
constexpr int kMetricDigits = 4;     // machine formats
constexpr int kRatioDigits = 2;
constexpr int kLatencyDigitsMd = 1;
constexpr int kLatencyDigits = 3;
constexpr int kFpsDigits = 2;
constexpr int kLossDigits = 6;

std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const std::string& cell : cells) {
    out += " " + cell + " |";
  }
  out += "\n";
  return out;
}

std::string md_separator(std::size_t columns) {
  std::string out = "|";
  for (std::size_t i = 0; i < columns; ++i) out += " --- |";
  out += "\n";
  return out;
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out += ",";
    out += cells[i];
  }
  out += "\n";
  return out;
}

std::string join_names(const std::vector<int>& ids, const ClassList& classes) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += ", ";
    out += classes.name(ids[i]);
  }
  return out;
}

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "json") return Format::kJson;
  if (name == "csv") return Format::kCsv;
  if (name == "markdown" || name == "md") return Format::kMarkdown;
  throw UsageError("unknown format '" + std::string(name) +
                   "' (expected 'json', 'csv', or 'markdown')");
}

std::string_view format_name(Format format) {
  switch (format) {
    case Format::kJson: return "json";
    case Format::kCsv: return "csv";
    default: return "markdown";
  }
}

double round_to(double value, int digits) {
  const double scale = std::pow(10.0, digits);
  return std::round(value * scale) / scale + 0.0;
}

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value + 0.0);
  return buf;
}

std::string render_eval_report(const EvalReport& report,
                               const ClassList& classes, Format format) {
  if (format == Format::kJson) {
    ordered_json j;
    j["interpolation"] = std::string(interpolation_name(report.interpolation));
    j["operating_point"] = "max-f1@iou0.5";
    j["aggregate"] = {
        {"precision", round_to(report.precision, kMetricDigits)},
        {"recall", round_to(report.recall, kMetricDigits)},
        {"map50", round_to(report.map50, kMetricDigits)},
        {"map50_95", round_to(report.map50_95, kMetricDigits)},
    };
    j["per_class"] = ordered_json::array();
    for (const auto& [class_id, m] : report.per_class) {
      ordered_json row;
      row["class"] = classes.name(class_id);
      row["instances"] = m.instances;
      row["precision"] = round_to(m.precision, kMetricDigits);
      row["recall"] = round_to(m.recall, kMetricDigits);
      row["ap50"] = round_to(m.ap50, kMetricDigits);
      row["ap50_95"] = round_to(m.ap50_95, kMetricDigits);
      if (m.f1_confidence) {
        row["f1_confidence"] = round_to(*m.f1_confidence, kMetricDigits);
      } else {
        row["f1_confidence"] = nullptr;
      }
      j["per_class"].push_back(std::move(row));
    }
    j["evaluated_classes"] = ordered_json::array();
    for (int c : report.evaluated_classes) {
      j["evaluated_classes"].push_back(classes.name(c));
    }
    j["skipped_classes"] = ordered_json::array();
    for (int c : report.skipped_classes) {
      j["skipped_classes"].push_back(classes.name(c));
    }
    return j.dump(2) + "\n";
  }

  if (format == Format::kCsv) {
    std::string out = csv_row({"class", "instances", "precision", "recall",
                               "map50", "map50_95", "f1_confidence"});
    for (const auto& [class_id, m] : report.per_class) {
      out += csv_row({classes.name(class_id), std::to_string(m.instances),
                      fixed(m.precision, kMetricDigits),
                      fixed(m.recall, kMetricDigits),
                      fixed(m.ap50, kMetricDigits),
                      fixed(m.ap50_95, kMetricDigits),
                      m.f1_confidence ? fixed(*m.f1_confidence, kMetricDigits)
                                      : ""});
    }
    for (int c : report.skipped_classes) {
      out += csv_row({classes.name(c), "0", "", "", "", "", ""});
    }
    int total_instances = 0;
    for (const auto& [class_id, m] : report.per_class) {
      total_instances += m.instances;
    }
    out += csv_row({"all", std::to_string(total_instances),
                    fixed(report.precision, kMetricDigits),
                    fixed(report.recall, kMetricDigits),
                    fixed(report.map50, kMetricDigits),
                    fixed(report.map50_95, kMetricDigits), ""});
    return out;
  }

  std::string out = "# detection evaluation\n\n";
  out += "- interpolation: " +
         std::string(interpolation_name(report.interpolation)) + "\n";
  out += "- operating point: max-F1 confidence on the IoU-0.5 curve\n";
  std::string conf_line;
  for (const auto& [class_id, m] : report.per_class) {
    if (!m.f1_confidence) continue;
    if (!conf_line.empty()) conf_line += ", ";
    conf_line += classes.name(class_id) + "=" +
                 fixed(*m.f1_confidence, kMetricDigitsMd);
  }
  if (!conf_line.empty()) {
    out += "- operating confidence: " + conf_line + "\n";
  }
  out += "\n## aggregate\n\n";
  out += md_row({"Precision", "Recall", "mAP@50", "mAP@50-95"});
  out += md_separator(4);
  out += md_row({fixed(report.precision, kMetricDigitsMd),
                 fixed(report.recall, kMetricDigitsMd),
                 fixed(report.map50, kMetricDigitsMd),
                 fixed(report.map50_95, kMetricDigitsMd)});
  out += "\n## per class\n\n";
  out += md_row(
      {"Class", "Instances", "Precision", "Recall", "mAP@50", "mAP@50-95"});
  out += md_separator(6);
  for (const auto& [class_id, m] : report.per_class) {
    out += md_row({classes.name(class_id), std::to_string(m.instances),
                   fixed(m.precision, kMetricDigitsMd),
                   fixed(m.recall, kMetricDigitsMd),
                   fixed(m.ap50, kMetricDigitsMd),
                   fixed(m.ap50_95, kMetricDigitsMd)});
  }
  if (!report.skipped_classes.empty()) {
    out += "\nskipped (zero ground-truth instances): " +
           join_names(report.skipped_classes, classes) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> confusion_labels(const ClassList& classes) {
  std::vector<std::string> labels = classes.names();
  labels.push_back("background");
  return labels;
}

}  // namespace

std::string render_confusion(const ConfusionMatrix& matrix,
                             const ClassList& classes,
                             const ConfusionThresholds& thresholds,
                             Format format) {
  const std::vector<std::string> labels = confusion_labels(classes);
  const Eigen::MatrixXd normalized = matrix.normalized();
  const Eigen::Index n = matrix.counts.rows();

  if (format == Format::kJson) {
    ordered_json j;
    j["confidence_threshold"] = thresholds.confidence;
    j["iou_threshold"] = thresholds.iou;
    j["labels"] = labels;
    j["counts"] = ordered_json::array();
    j["normalized"] = ordered_json::array();
    for (Eigen::Index r = 0; r < n; ++r) {
      ordered_json counts_row = ordered_json::array();
      ordered_json norm_row = ordered_json::array();
      for (Eigen::Index c = 0; c < n; ++c) {
        counts_row.push_back(matrix.counts(r, c));
        norm_row.push_back(round_to(normalized(r, c), kMetricDigits));
      }
      j["counts"].push_back(std::move(counts_row));
      j["normalized"].push_back(std::move(norm_row));
    }
    return j.dump(2) + "\n";
  }

  if (format == Format::kCsv) {
    std::vector<std::string> header = {"matrix", "actual"};
    header.insert(header.end(), labels.begin(), labels.end());
    std::string out = csv_row(header);
    for (Eigen::Index r = 0; r < n; ++r) {
      std::vector<std::string> cells = {"counts", labels[r]};
      for (Eigen::Index c = 0; c < n; ++c) {
        cells.push_back(std::to_string(matrix.counts(r, c)));
      }
      out += csv_row(cells);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
      std::vector<std::string> cells = {"normalized", labels[r]};
      for (Eigen::Index c = 0; c < n; ++c) {
        cells.push_back(fixed(normalized(r, c), kMetricDigits));
      }
      out += csv_row(cells);
    }
    return out;
  }

  std::string out = "# confusion matrix\n\n";
  out += "- confidence threshold: " + fixed(thresholds.confidence, 2) + "\n";
  out += "- iou threshold: " + fixed(thresholds.iou, 2) + "\n";
  out += "\n## counts\n\n";
  std::vector<std::string> header = {"actual \\ predicted"};
  header.insert(header.end(), labels.begin(), labels.end());
  out += md_row(header);
  out += md_separator(header.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    std::vector<std::string> cells = {labels[r]};
    for (Eigen::Index c = 0; c < n; ++c) {
      cells.push_back(std::to_string(matrix.counts(r, c)));
    }
    out += md_row(cells);
  }
  out += "\n## row-normalized\n\n";
  out += md_row(header);
  out += md_separator(header.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    std::vector<std::string> cells = {labels[r]};
    for (Eigen::Index c = 0; c < n; ++c) {
      cells.push_back(fixed(normalized(r, c), kMetricDigitsMd));
    }
    out += md_row(cells);
  }
  return out;
}

std::string render_latency(const LatencyStats& stats, Format format) {
  if (format == Format::kJson) {
    ordered_json j;
    j["samples"] = stats.samples;
    j["mean_ms"] = round_to(stats.mean_ms, kLatencyDigits);
    j["median_ms"] = round_to(stats.median_ms, kLatencyDigits);
    j["p95_ms"] = round_to(stats.p95_ms, kLatencyDigits);
    j["fps"] = round_to(stats.fps, kFpsDigits);
    j["timing"] = "end-to-end adapter wall-clock per input, warmup excluded";
    return j.dump(2) + "\n";
  }
  if (format == Format::kCsv) {
    std::string out =
        csv_row({"samples", "mean_ms", "median_ms", "p95_ms", "fps"});
    out += csv_row({std::to_string(stats.samples),
                    fixed(stats.mean_ms, kLatencyDigits),
                    fixed(stats.median_ms, kLatencyDigits),
                    fixed(stats.p95_ms, kLatencyDigits),
                    fixed(stats.fps, kFpsDigits)});
    return out;
  }
  std::string out = "# latency\n\n";
  out += md_row({"Samples", "Mean (ms)", "Median (ms)", "P95 (ms)", "FPS"});
  out += md_separator(5);
  out += md_row({std::to_string(stats.samples),
                 fixed(stats.mean_ms, kLatencyDigitsMd),
                 fixed(stats.median_ms, kLatencyDigitsMd),
                 fixed(stats.p95_ms, kLatencyDigitsMd),
                 fixed(stats.fps, kFpsDigits)});
  out += "\ntiming: end-to-end adapter wall-clock per input, warmup "
         "excluded\n";
  return out;
}

std::string render_efficiency(std::span<const EfficiencyRow> rows,
                              Format format) {
  if (format == Format::kJson) {
    ordered_json j = ordered_json::array();
    for (const EfficiencyRow& row : rows) {
      ordered_json r;
      r["model"] = row.model.name;
      r["params_m"] = row.model.params_m;
      r["gflops"] = row.model.gflops;
      r["latency_ms"] = row.model.latency_ms;
      r["fps"] = round_to(row.fps, kFpsDigits);
      r["param_ratio"] = round_to(row.param_ratio, kRatioDigits);
      r["gflops_ratio"] = round_to(row.gflops_ratio, kRatioDigits);
      r["latency_increase_pct"] = round_to(row.latency_increase_pct, 1);
      j.push_back(std::move(r));
    }
    return j.dump(2) + "\n";
  }
  if (format == Format::kCsv) {
    std::string out =
        csv_row({"model", "params_m", "gflops", "latency_ms", "fps",
                 "param_ratio", "gflops_ratio", "latency_increase_pct"});
    for (const EfficiencyRow& row : rows) {
      out += csv_row({row.model.name, fixed(row.model.params_m, 1),
                      fixed(row.model.gflops, 1),
                      fixed(row.model.latency_ms, kLatencyDigitsMd),
                      fixed(row.fps, kFpsDigits),
                      fixed(row.param_ratio, kRatioDigits),
                      fixed(row.gflops_ratio, kRatioDigits),
                      fixed(row.latency_increase_pct, 1)});
    }
    return out;
  }
  std::string out = "# model efficiency\n\n";
  out += md_row({"Model", "Parameters (M)", "GFLOPs", "Inference Time (ms)",
                 "FPS", "Param Ratio", "GFLOPs Ratio", "Latency vs Base"});
  out += md_separator(8);
  for (const EfficiencyRow& row : rows) {
    out += md_row({row.model.name, fixed(row.model.params_m, 1),
                   fixed(row.model.gflops, 1),
                   fixed(row.model.latency_ms, kLatencyDigitsMd),
                   fixed(row.fps, kFpsDigits),
                   fixed(row.param_ratio, kRatioDigits) + "x",
                   fixed(row.gflops_ratio, kRatioDigits) + "x",
                   (row.latency_increase_pct >= 0 ? "+" : "") +
                       fixed(row.latency_increase_pct, 1) + "%"});
  }
  return out;
}

DatasetSummary summarize(const DatasetSplit& split, const ClassList& classes) {
  DatasetSummary summary;
  summary.images = static_cast<std::int64_t>(split.images.size());
  summary.per_class = class_histogram(split, classes);
  for (std::size_t c = 0; c < summary.per_class.size(); ++c) {
    summary.instances += summary.per_class[c];
    if (summary.per_class[c] == 0) {
      summary.zero_instance_classes.push_back(static_cast<int>(c));
    }
  }
  return summary;
}

std::string render_dataset_summary(const DatasetSummary& summary,
                                   const ClassList& classes, Format format) {
  if (format == Format::kJson) {
    ordered_json j;
    j["images"] = summary.images;
    j["instances"] = summary.instances;
    j["per_class"] = ordered_json::object();
    for (std::size_t c = 0; c < summary.per_class.size(); ++c) {
      j["per_class"][classes.name(static_cast<int>(c))] = summary.per_class[c];
    }
    j["zero_instance_classes"] = ordered_json::array();
    for (int c : summary.zero_instance_classes) {
      j["zero_instance_classes"].push_back(classes.name(c));
    }
    return j.dump(2) + "\n";
  }
  if (format == Format::kCsv) {
    std::string out = csv_row({"class", "instances"});
    for (std::size_t c = 0; c < summary.per_class.size(); ++c) {
      out += csv_row({classes.name(static_cast<int>(c)),
                      std::to_string(summary.per_class[c])});
    }
    return out;
  }
  std::string out = "# dataset validation\n\n";
  out += "- images: " + std::to_string(summary.images) + "\n";
  out += "- instances: " + std::to_string(summary.instances) + "\n";
  out += "\n| Class | Instances |\n";
  out += md_separator(2);
  for (std::size_t c = 0; c < summary.per_class.size(); ++c) {
    out += md_row({classes.name(static_cast<int>(c)),
                   std::to_string(summary.per_class[c])});
  }
  if (!summary.zero_instance_classes.empty()) {
    out += "\nzero-instance classes: " +
           join_names(summary.zero_instance_classes, classes) + "\n";
  }
  return out;
}

std::string render_loss_audit(
    std::span<const std::pair<LossMode, LossBreakdown>> results,
    const LossWeights& weights, std::size_t pair_count, Format format) {
  if (format == Format::kJson) {
    ordered_json j;
    j["pairs"] = pair_count;
    j["weights"] = {
        {"alpha", weights.alpha},         {"gamma", weights.gamma},
        {"lambda_cls", weights.lambda_cls}, {"lambda_bbox", weights.lambda_bbox},
        {"lambda_giou", weights.lambda_giou},
    };
    j["modes"] = ordered_json::array();
    for (const auto& [mode, breakdown] : results) {
      ordered_json row;
      row["mode"] = std::string(loss_mode_name(mode));
      row["giou_term"] = round_to(breakdown.giou_term, kLossDigits);
      row["l1_term"] = round_to(breakdown.l1_term, kLossDigits);
      row["cls_term"] = round_to(breakdown.cls_term, kLossDigits);
      row["total"] = round_to(breakdown.total, kLossDigits);
      j["modes"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
  }
  if (format == Format::kCsv) {
    std::string out =
        csv_row({"mode", "giou_term", "l1_term", "cls_term", "total"});
    for (const auto& [mode, breakdown] : results) {
      out += csv_row({std::string(loss_mode_name(mode)),
                      fixed(breakdown.giou_term, kLossDigits),
                      fixed(breakdown.l1_term, kLossDigits),
                      fixed(breakdown.cls_term, kLossDigits),
                      fixed(breakdown.total, kLossDigits)});
    }
    return out;
  }
  std::string out = "# loss audit\n\n";
  out += "- pairs: " + std::to_string(pair_count) + "\n";
  out += "- weights: alpha=" + fixed(weights.alpha, 2) +
         " gamma=" + fixed(weights.gamma, 2) +
         " lambda_cls=" + fixed(weights.lambda_cls, 2) +
         " lambda_bbox=" + fixed(weights.lambda_bbox, 2) +
         " lambda_giou=" + fixed(weights.lambda_giou, 2) + "\n";
  out += "\n";
  out += md_row({"Mode", "GIoU term", "L1 term", "Cls term", "Total"});
  out += md_separator(5);
  for (const auto& [mode, breakdown] : results) {
    out += md_row({std::string(loss_mode_name(mode)),
                   fixed(breakdown.giou_term, kLossDigits),
                   fixed(breakdown.l1_term, kLossDigits),
                   fixed(breakdown.cls_term, kLossDigits),
                   fixed(breakdown.total, kLossDigits)});
  }
  return out;
}

std::string render_assignment_json(const Assignment& assignment) {
  ordered_json j;
  j["pairs"] = ordered_json::array();
  for (const auto& [pred, gt] : assignment.pairs) {
    j["pairs"].push_back(ordered_json::array({pred, gt}));
  }
  j["total_cost"] = assignment.total_cost;
  return j.dump(2) + "\n";
}

std::string render_pr_curve_csv(std::span<const PrCurvePoint> points) {
  std::string out = csv_row({"confidence", "precision", "recall"});
  for (const PrCurvePoint& point : points) {
    out += csv_row({fixed(point.confidence, kLossDigits),
                    fixed(point.precision, kLossDigits),
                    fixed(point.recall, kLossDigits)});
  }
  return out;
}

}  // namespace detkit
