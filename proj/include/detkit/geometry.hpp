#pragma once

namespace detkit {

/// Axis-aligned box in corner form, x1 <= x2 and y1 <= y2. Coordinates may be
/// normalized or absolute; intersection arithmetic does not care.
struct CornerBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double area() const { return (x2 - x1) * (y2 - y1); }
};

/// Normalized center-format box: center (cx, cy), width w, height h, all as
/// fractions of the image dimensions.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  /// Extents may overflow [0,1] by at most this much before construction
  /// fails; smaller overflow (annotation rounding noise) is clamped away.
  static constexpr double kBoundaryTolerance = 1e-6;

  /// Checked constructor. Throws ValidationError on non-finite values,
  /// negative sizes, or extents outside [0,1] beyond `tolerance`.
  static BBox validated(double cx, double cy, double w, double h,
                        double tolerance = kBoundaryTolerance);
};

CornerBox to_corners(const BBox& b);

/// Intersection over union, in [0,1]. Returns 0 when the union has zero area.
double iou(const CornerBox& a, const CornerBox& b);

/// Generalized IoU: iou minus the fraction of the smallest enclosing box not
/// covered by the union. In (-1, 1], never above iou. Falls back to iou when
/// the enclosing box is degenerate.
double giou(const CornerBox& a, const CornerBox& b);

double iou(const BBox& a, const BBox& b);
double giou(const BBox& a, const BBox& b);

}  // namespace detkit
