#pragma once

#include <Eigen/Dense>
#include <span>
#include <string_view>

#include "detkit/geometry.hpp"

namespace detkit {

/// Focal/term weights for the matching cost and the training loss.
/// Defaults are the published hyperparameters.
struct LossWeights {
  double alpha = 0.25;
  double gamma = 2.0;
  double lambda_cls = 1.0;
  double lambda_bbox = 5.0;  // the L1 term weight (lambda_l1)
  double lambda_giou = 2.0;

  /// Throws ValidationError unless alpha in [0,1], gamma >= 0, lambdas >= 0.
  void validate() const;
};

/// Width of the default probability clamp applied before logarithms.
inline constexpr double kDefaultProbClamp = 1e-12;

/// Clamps p into [width, 1-width].
double clamp_probability(double p, double width = kDefaultProbClamp);

/// Focal classification loss, evaluated exactly as printed:
///   alpha*(1-p)^gamma*(-log p) - (1-alpha)*p^gamma*(-log(1-p)).
/// Note the subtraction: the result can be negative. Throws DomainError when
/// p_hat is not strictly inside (0,1).
double focal_cls_loss(double p_hat, const LossWeights& w,
                      double clamp_width = kDefaultProbClamp);

/// L1 distance across the four normalized coordinates (cx, cy, w, h).
double l1_box_distance(const BBox& a, const BBox& b);

/// Sum of l1_box_distance over paired lists. Throws ValidationError on
/// length mismatch or empty input.
double l1_box_loss(std::span<const BBox> pred_boxes,
                   std::span<const BBox> gt_boxes);

/// 1 - GIoU(pred, gt); in [0, 2).
double giou_loss(const BBox& pred_box, const BBox& gt_box);

/// The total training loss comes in two flavors. `kVerbatim` evaluates the
/// printed equation exactly: the GIoU term rewards overlap (no 1-GIoU) and
/// the classification term keeps its printed sign. `kCorrected` substitutes
/// 1-GIoU in the first term and standard IoU-aware binary-cross-entropy sign
/// conventions in the third, making the result usable as an actual loss.
enum class LossMode {
  kVerbatim,
  kCorrected,
};

/// Parses "verbatim" / "corrected"; throws UsageError otherwise.
LossMode parse_loss_mode(std::string_view name);
std::string_view loss_mode_name(LossMode mode);

/// One matched prediction/ground-truth pair for the total loss.
struct MatchedPair {
  BBox pred_box;
  BBox gt_box;
  Eigen::VectorXd pred_probs;  // per-class probabilities, each in (0,1)
  int gt_class = 0;
  double q = 0.0;  // IoU of the pair (target quality), in [0,1]
};

struct LossBreakdown {
  double giou_term = 0.0;
  double l1_term = 0.0;
  double cls_term = 0.0;
  double total = 0.0;
};

/// Weighted per-pair mean of the three loss terms over the matched pairs.
/// The quality target q applies only at the matched class channel; every
/// other channel uses q = 0. Throws ValidationError on empty input or q
/// outside [0,1], DomainError on probabilities at 0 or 1.
LossBreakdown total_loss(std::span<const MatchedPair> pairs,
                         const LossWeights& w, LossMode mode,
                         double clamp_width = kDefaultProbClamp);

}  // namespace detkit
