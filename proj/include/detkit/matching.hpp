#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>
#include <vector>

#include "detkit/losses.hpp"
#include "detkit/types.hpp"

namespace detkit {

/// Pairwise matching costs: one row per prediction, one column per ground
/// truth. Entries must be finite; negative costs are legal.
using CostMatrix = Eigen::MatrixXd;

/// A one-to-one pairing of predictions to ground truths. Exactly
/// min(rows, cols) pairs, listed in ascending prediction index.
struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (prediction, ground truth)
  double total_cost = 0.0;
};

/// Minimum-cost assignment via the O(n^3) augmenting-path Hungarian method.
/// Rectangular matrices are padded internally to square with a cost strictly
/// above any real entry; padded pairs never appear in the result. Rows are
/// augmented in ascending index order, so ties resolve deterministically.
/// Throws ValidationError on an empty matrix or a non-finite entry
/// (identifying its row and column).
Assignment hungarian(const CostMatrix& cost);

/// One decoder query output: a class probability vector plus a box.
struct QueryPrediction {
  Eigen::VectorXd class_probs;
  BBox box;
};

/// Matching cost of one prediction/ground-truth pair:
///   lambda_cls * focal(p) + lambda_bbox * L1(boxes) + lambda_giou * (1-GIoU).
/// `pred_prob` is the probability the prediction assigns to the ground
/// truth's class. Throws DomainError when pred_prob is not in (0,1).
double pair_cost(double pred_prob, const BBox& pred_box, const BBox& gt_box,
                 const LossWeights& weights);

/// Full cost matrix: entry (i, j) = pair_cost of prediction i against ground
/// truth j, using prediction i's probability for ground truth j's class.
/// Throws ValidationError when either side is empty or a ground-truth class
/// id falls outside a prediction's probability vector.
CostMatrix build_cost_matrix(std::span<const QueryPrediction> preds,
                             std::span<const GroundTruth> gts,
                             const LossWeights& weights);

}  // namespace detkit
