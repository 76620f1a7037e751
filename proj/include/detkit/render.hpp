#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "detkit/bench.hpp"
#include "detkit/dataset.hpp"
#include "detkit/losses.hpp"
#include "detkit/matching.hpp"
#include "detkit/metrics.hpp"

namespace detkit {

enum class Format { kJson, kCsv, kMarkdown };

Format parse_format(std::string_view name);  // throws UsageError
std::string_view format_name(Format format);

/// Rounds half away from zero at `digits` decimals; -0 collapses to +0.
double round_to(double value, int digits);

/// Fixed-point rendering, e.g. fixed(0.81, 3) == "0.810".
std::string fixed(double value, int digits);

// Detection metrics are carried at 4 decimals in machine formats and
// displayed at 3 in markdown (the table convention); ratios at 2, latency at
// 1 decimal ms in markdown.

std::string render_eval_report(const EvalReport& report,
                               const ClassList& classes, Format format);

struct ConfusionThresholds {
  double confidence = 0.25;
  double iou = 0.45;
};

std::string render_confusion(const ConfusionMatrix& matrix,
                             const ClassList& classes,
                             const ConfusionThresholds& thresholds,
                             Format format);

std::string render_latency(const LatencyStats& stats, Format format);

std::string render_efficiency(std::span<const EfficiencyRow> rows,
                              Format format);

struct DatasetSummary {
  std::int64_t images = 0;
  std::int64_t instances = 0;
  std::vector<std::int64_t> per_class;
  std::vector<int> zero_instance_classes;
};

DatasetSummary summarize(const DatasetSplit& split, const ClassList& classes);

std::string render_dataset_summary(const DatasetSummary& summary,
                                   const ClassList& classes, Format format);

std::string render_loss_audit(
    std::span<const std::pair<LossMode, LossBreakdown>> results,
    const LossWeights& weights, std::size_t pair_count, Format format);

std::string render_assignment_json(const Assignment& assignment);

std::string render_pr_curve_csv(std::span<const PrCurvePoint> points);

}  // namespace detkit
