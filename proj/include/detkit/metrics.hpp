#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "detkit/dataset.hpp"
#include "detkit/types.hpp"

namespace detkit {

/// The ten IoU thresholds of the 0.50:0.05:0.95 protocol; index 0 is 0.50.
inline constexpr int kNumIouThresholds = 10;
std::array<double, kNumIouThresholds> iou_thresholds();

/// Within one image and one class: detections sorted by descending
/// confidence greedily claim the unclaimed ground truth with the highest
/// IoU >= threshold. Each ground truth is claimed at most once.
struct ClassMatchResult {
  std::vector<std::pair<double, bool>> scored;  // (confidence, is TP)
  int unmatched_gt = 0;
};

ClassMatchResult match_detections(std::span<const Detection> dets,
                                  std::span<const GroundTruth> gts,
                                  int class_id, double iou_threshold);

enum class ApInterpolation {
  kCoco101,     // 101-point grid, recall 0.00 to 1.00 step 0.01
  kContinuous,  // all-point (exact area under the envelope)
};

ApInterpolation parse_interpolation(std::string_view name);
std::string_view interpolation_name(ApInterpolation interp);

/// Average precision from TP/FP flags already sorted by descending
/// confidence. Builds the cumulative PR curve, applies the monotone
/// precision envelope, then integrates. Throws ValidationError when
/// total_gt < 1 (such classes must be skipped upstream).
double average_precision(std::span<const bool> tp_flags, int total_gt,
                         ApInterpolation interp = ApInterpolation::kCoco101);

struct ClassMetrics {
  int instances = 0;
  double precision = 0.0;
  double recall = 0.0;
  double ap50 = 0.0;
  double ap50_95 = 0.0;
  /// Confidence of the maximum-F1 point on the IoU-0.5 PR curve; empty when
  /// the class attracted no detections.
  std::optional<double> f1_confidence;
};

struct EvalReport {
  std::map<int, ClassMetrics> per_class;
  std::vector<int> evaluated_classes;  // classes with at least one instance
  std::vector<int> skipped_classes;    // classes with zero instances
  // Aggregates are arithmetic means over evaluated classes only.
  double precision = 0.0;
  double recall = 0.0;
  double map50 = 0.0;
  double map50_95 = 0.0;
  ApInterpolation interpolation = ApInterpolation::kCoco101;
};

struct EvalOptions {
  ApInterpolation interpolation = ApInterpolation::kCoco101;
  int workers = 1;  // per-image matching parallelism; results identical
};

/// Full evaluation: per class with at least one instance, AP at 0.5 and the
/// 0.50-0.95 mean, precision/recall at the maximum-F1 operating point.
/// Detections are ranked by (confidence desc, image id, input order), a
/// stable key that keeps results independent of image enumeration order.
/// Throws ValidationError when there are no ground truths at all or a class
/// id falls outside the class list.
EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const GroundTruth> gts, const ClassList& classes,
                    const EvalOptions& options = {});

/// Confusion counts with a synthetic background label as the final row and
/// column. Rows are actual classes, columns predicted classes; unmatched
/// ground truths fall in (class, background), unmatched detections in
/// (background, class).
struct ConfusionMatrix {
  int num_classes = 0;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  int background() const { return num_classes; }
  std::int64_t total() const { return counts.sum(); }

  /// Row-normalized view; rows with zero count stay zero.
  Eigen::MatrixXd normalized() const;
};

/// Detections below confidence_threshold are discarded; the survivors match
/// ground truths by IoU alone, irrespective of class.
ConfusionMatrix confusion_matrix(std::span<const Detection> dets,
                                 std::span<const GroundTruth> gts,
                                 int num_classes, double confidence_threshold,
                                 double iou_threshold);

/// One point of the cumulative precision-recall curve.
struct PrCurvePoint {
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Cumulative PR curve for one class at the given IoU threshold, ordered by
/// descending confidence. Throws ValidationError when the class has no
/// ground-truth instances.
std::vector<PrCurvePoint> pr_curve(std::span<const Detection> dets,
                                   std::span<const GroundTruth> gts,
                                   int class_id, double iou_threshold);

}  // namespace detkit
