#include "detkit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detkit/errors.hpp"

namespace detkit {

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("alpha must lie in [0,1], got " +
                          std::to_string(alpha));
  }
  if (!(gamma >= 0.0)) {
    throw ValidationError("gamma must be >= 0, got " + std::to_string(gamma));
  }
  if (!(lambda_cls >= 0.0 && lambda_bbox >= 0.0 && lambda_giou >= 0.0)) {
    throw ValidationError("term weights must be >= 0");
  }
}

double clamp_probability(double p, double width) {
  return std::clamp(p, width, 1.0 - width);
}

double focal_cls_loss(double p_hat, const LossWeights& w, double clamp_width) {
  w.validate();
  if (!(p_hat > 0.0 && p_hat < 1.0)) {
    throw DomainError("probability must lie strictly inside (0,1), got " +
                      std::to_string(p_hat));
  }
  const double p = clamp_probability(p_hat, clamp_width);
  return w.alpha * std::pow(1.0 - p, w.gamma) * (-std::log(p)) -
         (1.0 - w.alpha) * std::pow(p, w.gamma) * (-std::log(1.0 - p));
}

double l1_box_distance(const BBox& a, const BBox& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) +
         std::abs(a.h - b.h);
}

double l1_box_loss(std::span<const BBox> pred_boxes,
                   std::span<const BBox> gt_boxes) {
  if (pred_boxes.size() != gt_boxes.size()) {
    throw ValidationError(
        "box list length mismatch: " + std::to_string(pred_boxes.size()) +
        " predictions vs " + std::to_string(gt_boxes.size()) +
        " ground truths");
  }
  if (pred_boxes.empty()) {
    throw ValidationError("box lists are empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
    total += l1_box_distance(pred_boxes[i], gt_boxes[i]);
  }
  return total;
}

double giou_loss(const BBox& pred_box, const BBox& gt_box) {
  return 1.0 - giou(pred_box, gt_box);
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "verbatim") return LossMode::kVerbatim;
  if (name == "corrected") return LossMode::kCorrected;
  throw UsageError("unknown loss mode '" + std::string(name) +
                   "' (expected 'verbatim' or 'corrected')");
}

std::string_view loss_mode_name(LossMode mode) {
  return mode == LossMode::kVerbatim ? "verbatim" : "corrected";
}

LossBreakdown total_loss(std::span<const MatchedPair> pairs,
                         const LossWeights& w, LossMode mode,
                         double clamp_width) {
  w.validate();
  if (pairs.empty()) {
    throw ValidationError("matched pair list is empty");
  }

  double giou_sum = 0.0;
  double l1_sum = 0.0;
  double cls_sum = 0.0;
  for (const MatchedPair& pair : pairs) {
    if (!(pair.q >= 0.0 && pair.q <= 1.0)) {
      throw ValidationError("pair quality q outside [0,1]: " +
                            std::to_string(pair.q));
    }
    if (pair.gt_class < 0 || pair.gt_class >= pair.pred_probs.size()) {
      throw ValidationError(
          "gt_class " + std::to_string(pair.gt_class) +
          " outside probability vector of size " +
          std::to_string(static_cast<long>(pair.pred_probs.size())));
    }

    const double g = giou(pair.pred_box, pair.gt_box);
    giou_sum += mode == LossMode::kVerbatim ? g : 1.0 - g;
    l1_sum += l1_box_distance(pair.pred_box, pair.gt_box);

    for (Eigen::Index c = 0; c < pair.pred_probs.size(); ++c) {
      const double raw = pair.pred_probs[c];
      if (!(raw > 0.0 && raw < 1.0)) {
        throw DomainError("class probability must lie strictly inside (0,1), "
                          "got " +
                          std::to_string(raw));
      }
      const double p = clamp_probability(raw, clamp_width);
      const double q = c == pair.gt_class ? pair.q : 0.0;
      const double bce = q * std::log(p) + (1.0 - q) * std::log(1.0 - p);
      const double weight = w.alpha * std::pow(p, w.gamma) * (1.0 - p) + q * p;
      cls_sum += mode == LossMode::kVerbatim ? bce * weight : -bce * weight;
    }
  }

  const double n = static_cast<double>(pairs.size());
  LossBreakdown out;
  out.giou_term = w.lambda_giou / n * giou_sum;
  out.l1_term = w.lambda_bbox / n * l1_sum;
  out.cls_term = w.lambda_cls / n * cls_sum;
  out.total = out.giou_term + out.l1_term + out.cls_term;
  return out;
}

}  // namespace detkit
