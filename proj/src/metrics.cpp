#include "detkit/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

void check_unit_interval(double value, const char* name) {
  if (!(value > 0.0 && value < 1.0)) {
    throw ValidationError(std::string(name) +
                          " must lie strictly inside (0,1), got " +
                          std::to_string(value));
  }
}

void parallel_for(int count, int workers,
                  const std::function<void(int)>& body) {
  workers = std::max(1, std::min(workers, count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          break;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::array<double, kNumIouThresholds> iou_thresholds() {
  std::array<double, kNumIouThresholds> out{};
  for (int k = 0; k < kNumIouThresholds; ++k) {
    out[static_cast<std::size_t>(k)] = 0.50 + 0.05 * k;
  }
  return out;
}

ClassMatchResult match_detections(std::span<const Detection> dets,
                                  std::span<const GroundTruth> gts,
                                  int class_id, double iou_threshold) {
  check_unit_interval(iou_threshold, "iou_threshold");

  std::vector<const Detection*> candidates;
  for (const Detection& det : dets) {
    if (det.class_id == class_id) candidates.push_back(&det);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Detection* a, const Detection* b) {
                     return a->confidence > b->confidence;
                   });

  std::vector<CornerBox> gt_boxes;
  for (const GroundTruth& gt : gts) {
    if (gt.class_id == class_id) gt_boxes.push_back(to_corners(gt.box));
  }

  ClassMatchResult result;
  std::vector<char> claimed(gt_boxes.size(), 0);
  int matched = 0;
  for (const Detection* det : candidates) {
    const CornerBox det_box = to_corners(det->box);
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < gt_boxes.size(); ++j) {
      if (claimed[j]) continue;
      const double overlap = iou(det_box, gt_boxes[j]);
      if (overlap >= iou_threshold && overlap > best_iou) {
        best_iou = overlap;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      claimed[static_cast<std::size_t>(best)] = 1;
      ++matched;
      result.scored.emplace_back(det->confidence, true);
    } else {
      result.scored.emplace_back(det->confidence, false);
    }
  }
  result.unmatched_gt = static_cast<int>(gt_boxes.size()) - matched;
  return result;
}

ApInterpolation parse_interpolation(std::string_view name) {
  if (name == "coco101") return ApInterpolation::kCoco101;
  if (name == "continuous") return ApInterpolation::kContinuous;
  throw UsageError("unknown interpolation '" + std::string(name) +
                   "' (expected 'coco101' or 'continuous')");
}

std::string_view interpolation_name(ApInterpolation interp) {
  return interp == ApInterpolation::kCoco101 ? "coco101" : "continuous";
}

double average_precision(std::span<const bool> tp_flags, int total_gt,
                         ApInterpolation interp) {
  if (total_gt < 1) {
    throw ValidationError(
        "average precision needs at least one ground-truth instance");
  }
  const std::size_t n = tp_flags.size();
  if (n == 0) return 0.0;

  std::vector<double> precision(n);
  std::vector<double> recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp_flags[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
  }

  // Monotone envelope: precision at recall r = max precision at recall >= r.
  std::vector<double> envelope(n);
  double best = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    best = std::max(best, precision[i]);
    envelope[i] = best;
  }

  if (interp == ApInterpolation::kCoco101) {
    double sum = 0.0;
    for (int t = 0; t <= 100; ++t) {
      const double r = static_cast<double>(t) / 100.0;
      const auto it = std::lower_bound(recall.begin(), recall.end(), r);
      if (it != recall.end()) {
        sum += envelope[static_cast<std::size_t>(it - recall.begin())];
      }
    }
    return sum / 101.0;
  }

  double ap = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev) {
      ap += (recall[i] - prev) * envelope[i];
      prev = recall[i];
    }
  }
  return ap;
}

namespace {

struct ImageSlot {
  std::vector<Detection> dets;  // input order preserved
  std::vector<GroundTruth> gts;
};

struct Record {
  double confidence;
  int image_ord;
  int rank;  // position within the per-image match result
  bool tp;
};

// Stable ranking independent of image enumeration order.
bool record_before(const Record& a, const Record& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.image_ord != b.image_ord) return a.image_ord < b.image_ord;
  return a.rank < b.rank;
}

struct CurvePoint {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double confidence = 0.0;
};

// Maximum-F1 operating point on a (confidence desc) TP/FP sequence.
std::optional<CurvePoint> max_f1_point(const std::vector<Record>& records,
                                       int total_gt) {
  if (records.empty()) return std::nullopt;
  CurvePoint best;
  bool found = false;
  int tp = 0;
  int fp = 0;
  for (const Record& record : records) {
    record.tp ? ++tp : ++fp;
    CurvePoint point;
    point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    point.recall = static_cast<double>(tp) / static_cast<double>(total_gt);
    point.f1 = point.precision + point.recall > 0.0
                   ? 2.0 * point.precision * point.recall /
                         (point.precision + point.recall)
                   : 0.0;
    point.confidence = record.confidence;
    if (!found || point.f1 > best.f1) {
      best = point;
      found = true;
    }
  }
  return best;
}

}  // namespace

EvalReport evaluate(std::span<const Detection> dets,
                    std::span<const GroundTruth> gts, const ClassList& classes,
                    const EvalOptions& options) {
  if (classes.size() == 0) {
    throw ValidationError("class list is empty");
  }
  if (gts.empty()) {
    throw ValidationError("no ground-truth instances to evaluate");
  }
  const int num_classes = classes.size();
  std::vector<int> gt_count(static_cast<std::size_t>(num_classes), 0);

  std::map<std::string, ImageSlot> by_image;
  for (const GroundTruth& gt : gts) {
    if (!classes.contains(gt.class_id)) {
      throw ValidationError("ground truth class id " +
                            std::to_string(gt.class_id) +
                            " outside class list");
    }
    ++gt_count[static_cast<std::size_t>(gt.class_id)];
    by_image[gt.image_id].gts.push_back(gt);
  }
  for (const Detection& det : dets) {
    if (!classes.contains(det.class_id)) {
      throw ValidationError("detection class id " +
                            std::to_string(det.class_id) +
                            " outside class list");
    }
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
      throw ValidationError("detection confidence " +
                            std::to_string(det.confidence) +
                            " outside [0,1]");
    }
    by_image[det.image_id].dets.push_back(det);
  }

  std::vector<const ImageSlot*> images;
  images.reserve(by_image.size());
  for (const auto& [id, slot] : by_image) images.push_back(&slot);

  const auto thresholds = iou_thresholds();
  using PerClass = std::vector<std::array<ClassMatchResult, kNumIouThresholds>>;
  std::vector<PerClass> image_results(images.size());

  parallel_for(static_cast<int>(images.size()), options.workers, [&](int i) {
    const ImageSlot& slot = *images[static_cast<std::size_t>(i)];
    PerClass& out = image_results[static_cast<std::size_t>(i)];
    out.resize(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
      for (int t = 0; t < kNumIouThresholds; ++t) {
        out[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)] =
            match_detections(slot.dets, slot.gts, c,
                             thresholds[static_cast<std::size_t>(t)]);
      }
    }
  });

  // Deterministic ordered reduction, identical for any worker count.
  EvalReport report;
  report.interpolation = options.interpolation;
  for (int c = 0; c < num_classes; ++c) {
    if (gt_count[static_cast<std::size_t>(c)] == 0) {
      report.skipped_classes.push_back(c);
      continue;
    }
    report.evaluated_classes.push_back(c);
    const int total_gt = gt_count[static_cast<std::size_t>(c)];

    double ap_sum = 0.0;
    double ap50 = 0.0;
    std::optional<CurvePoint> operating;
    for (int t = 0; t < kNumIouThresholds; ++t) {
      std::vector<Record> records;
      for (std::size_t i = 0; i < image_results.size(); ++i) {
        const ClassMatchResult& result =
            image_results[i][static_cast<std::size_t>(c)]
                         [static_cast<std::size_t>(t)];
        for (std::size_t k = 0; k < result.scored.size(); ++k) {
          records.push_back(Record{result.scored[k].first,
                                   static_cast<int>(i), static_cast<int>(k),
                                   result.scored[k].second});
        }
      }
      std::sort(records.begin(), records.end(), record_before);
      const auto flags = std::make_unique<bool[]>(records.size());
      for (std::size_t k = 0; k < records.size(); ++k) flags[k] = records[k].tp;
      const double ap = average_precision(
          std::span<const bool>(flags.get(), records.size()), total_gt,
          options.interpolation);
      ap_sum += ap;
      if (t == 0) {
        ap50 = ap;
        operating = max_f1_point(records, total_gt);
      }
    }

    ClassMetrics metrics;
    metrics.instances = total_gt;
    metrics.ap50 = ap50;
    metrics.ap50_95 = ap_sum / kNumIouThresholds;
    if (operating) {
      metrics.precision = operating->precision;
      metrics.recall = operating->recall;
      metrics.f1_confidence = operating->confidence;
    }
    report.per_class[c] = metrics;
  }

  const auto mean_over = [&](auto field) {
    double sum = 0.0;
    for (int c : report.evaluated_classes) sum += field(report.per_class[c]);
    return report.evaluated_classes.empty()
               ? 0.0
               : sum / static_cast<double>(report.evaluated_classes.size());
  };
  report.precision =
      mean_over([](const ClassMetrics& m) { return m.precision; });
  report.recall = mean_over([](const ClassMetrics& m) { return m.recall; });
  report.map50 = mean_over([](const ClassMetrics& m) { return m.ap50; });
  report.map50_95 =
      mean_over([](const ClassMetrics& m) { return m.ap50_95; });
  return report;
}

Eigen::MatrixXd ConfusionMatrix::normalized() const {
  Eigen::MatrixXd out = counts.cast<double>();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double row_sum = out.row(r).sum();
    if (row_sum > 0.0) out.row(r) /= row_sum;
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const Detection> dets,
                                 std::span<const GroundTruth> gts,
                                 int num_classes, double confidence_threshold,
                                 double iou_threshold) {
  check_unit_interval(confidence_threshold, "confidence_threshold");
  check_unit_interval(iou_threshold, "iou_threshold");
  if (num_classes < 1) {
    throw ValidationError("confusion matrix needs at least one class");
  }

  ConfusionMatrix cm;
  cm.num_classes = num_classes;
  cm.counts.setZero(num_classes + 1, num_classes + 1);

  std::map<std::string, ImageSlot> by_image;
  for (const GroundTruth& gt : gts) {
    if (gt.class_id < 0 || gt.class_id >= num_classes) {
      throw ValidationError("ground truth class id " +
                            std::to_string(gt.class_id) +
                            " outside class list");
    }
    by_image[gt.image_id].gts.push_back(gt);
  }
  for (const Detection& det : dets) {
    if (det.class_id < 0 || det.class_id >= num_classes) {
      throw ValidationError("detection class id " +
                            std::to_string(det.class_id) +
                            " outside class list");
    }
    by_image[det.image_id].dets.push_back(det);
  }

  for (const auto& [id, slot] : by_image) {
    std::vector<const Detection*> survivors;
    for (const Detection& det : slot.dets) {
      if (det.confidence >= confidence_threshold) survivors.push_back(&det);
    }
    std::stable_sort(survivors.begin(), survivors.end(),
                     [](const Detection* a, const Detection* b) {
                       return a->confidence > b->confidence;
                     });

    std::vector<char> claimed(slot.gts.size(), 0);
    for (const Detection* det : survivors) {
      const CornerBox det_box = to_corners(det->box);
      int best = -1;
      double best_iou = 0.0;
      for (std::size_t j = 0; j < slot.gts.size(); ++j) {
        if (claimed[j]) continue;
        const double overlap = iou(det_box, to_corners(slot.gts[j].box));
        if (overlap >= iou_threshold && overlap > best_iou) {
          best_iou = overlap;
          best = static_cast<int>(j);
        }
      }
      if (best >= 0) {
        claimed[static_cast<std::size_t>(best)] = 1;
        cm.counts(slot.gts[static_cast<std::size_t>(best)].class_id,
                  det->class_id) += 1;
      } else {
        cm.counts(cm.background(), det->class_id) += 1;
      }
    }
    for (std::size_t j = 0; j < slot.gts.size(); ++j) {
      if (!claimed[j]) {
        cm.counts(slot.gts[j].class_id, cm.background()) += 1;
      }
    }
  }
  return cm;
}

std::vector<PrCurvePoint> pr_curve(std::span<const Detection> dets,
                                   std::span<const GroundTruth> gts,
                                   int class_id, double iou_threshold) {
  std::map<std::string, ImageSlot> by_image;
  int total_gt = 0;
  for (const GroundTruth& gt : gts) {
    if (gt.class_id == class_id) ++total_gt;
    by_image[gt.image_id].gts.push_back(gt);
  }
  if (total_gt == 0) {
    throw ValidationError("class " + std::to_string(class_id) +
                          " has no ground-truth instances");
  }
  for (const Detection& det : dets) {
    by_image[det.image_id].dets.push_back(det);
  }

  std::vector<Record> records;
  int image_ord = 0;
  for (const auto& [id, slot] : by_image) {
    const ClassMatchResult result =
        match_detections(slot.dets, slot.gts, class_id, iou_threshold);
    for (std::size_t k = 0; k < result.scored.size(); ++k) {
      records.push_back(Record{result.scored[k].first, image_ord,
                               static_cast<int>(k), result.scored[k].second});
    }
    ++image_ord;
  }
  std::sort(records.begin(), records.end(), record_before);

  std::vector<PrCurvePoint> points;
  points.reserve(records.size());
  int tp = 0;
  int fp = 0;
  for (const Record& record : records) {
    record.tp ? ++tp : ++fp;
    PrCurvePoint point;
    point.confidence = record.confidence;
    point.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    point.recall = static_cast<double>(tp) / static_cast<double>(total_gt);
    points.push_back(point);
  }
  return points;
}

}  // namespace detkit
