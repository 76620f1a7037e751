#include "detkit/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detkit/errors.hpp"

namespace detkit {

Assignment hungarian(const CostMatrix& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows < 1 || cols < 1) {
    throw ValidationError("cost matrix needs at least one row and one column");
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!std::isfinite(cost(r, c))) {
        throw ValidationError("non-finite cost entry at row " +
                              std::to_string(r) + ", column " +
                              std::to_string(c));
      }
    }
  }

  // Pad to square; padded entries cost strictly more than any real entry so
  // the optimum never prefers them over a real pairing.
  const int n = std::max(rows, cols);
  const double pad = cost.maxCoeff() + 1.0;
  const auto entry = [&](int r, int c) {
    return r < rows && c < cols ? cost(r, c) : pad;
  };

  // Shortest augmenting paths with dual potentials, one row at a time in
  // ascending index order (1-based; index 0 is the virtual free column).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(n + 1, 0.0);
  std::vector<double> minv(n + 1, 0.0);
  std::vector<int> way(n + 1, 0);
  std::vector<int> col_owner(n + 1, 0);  // row matched to each column; 0 = free

  for (int i = 1; i <= n; ++i) {
    col_owner[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = col_owner[j0];
      int j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[col_owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const int j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  // Strip padded rows/columns; total is re-summed from the original matrix in
  // ascending row order so it is reproducible bit for bit.
  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= n; ++j) {
    const int r = col_owner[j] - 1;
    if (r >= 0 && r < rows && j - 1 < cols) {
      row_to_col[r] = j - 1;
    }
  }
  Assignment out;
  for (int r = 0; r < rows; ++r) {
    if (row_to_col[r] >= 0) {
      out.pairs.emplace_back(r, row_to_col[r]);
      out.total_cost += cost(r, row_to_col[r]);
    }
  }
  return out;
}

double pair_cost(double pred_prob, const BBox& pred_box, const BBox& gt_box,
                 const LossWeights& weights) {
  weights.validate();
  const double cls = focal_cls_loss(pred_prob, weights);
  const double box = l1_box_distance(pred_box, gt_box);
  const double overlap = giou_loss(pred_box, gt_box);
  return weights.lambda_cls * cls + weights.lambda_bbox * box +
         weights.lambda_giou * overlap;
}

CostMatrix build_cost_matrix(std::span<const QueryPrediction> preds,
                             std::span<const GroundTruth> gts,
                             const LossWeights& weights) {
  if (preds.empty() || gts.empty()) {
    throw ValidationError(
        "cost matrix needs at least one prediction and one ground truth");
  }
  CostMatrix cost(static_cast<Eigen::Index>(preds.size()),
                  static_cast<Eigen::Index>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const QueryPrediction& pred = preds[i];
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const GroundTruth& gt = gts[j];
      if (gt.class_id < 0 || gt.class_id >= pred.class_probs.size()) {
        throw ValidationError(
            "ground truth " + std::to_string(j) + " has class id " +
            std::to_string(gt.class_id) +
            " outside the probability vector of prediction " +
            std::to_string(i) + " (size " +
            std::to_string(static_cast<long>(pred.class_probs.size())) + ")");
      }
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          pair_cost(pred.class_probs[gt.class_id], pred.box, gt.box, weights);
    }
  }
  return cost;
}

}  // namespace detkit
