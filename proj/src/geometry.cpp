#include "detkit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detkit/errors.hpp"

namespace detkit {

namespace {

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw ValidationError(std::string("non-finite box coordinate: ") + name);
  }
}

}  // namespace

BBox BBox::validated(double cx, double cy, double w, double h,
                     double tolerance) {
  require_finite(cx, "cx");
  require_finite(cy, "cy");
  require_finite(w, "w");
  require_finite(h, "h");
  if (w < -tolerance || h < -tolerance) {
    throw ValidationError("negative box size (w=" + std::to_string(w) +
                          ", h=" + std::to_string(h) + ")");
  }
  w = std::max(w, 0.0);
  h = std::max(h, 0.0);

  double x1 = cx - w / 2.0;
  double x2 = cx + w / 2.0;
  double y1 = cy - h / 2.0;
  double y2 = cy + h / 2.0;
  if (x1 < -tolerance || y1 < -tolerance || x2 > 1.0 + tolerance ||
      y2 > 1.0 + tolerance) {
    throw ValidationError(
        "box extents [" + std::to_string(x1) + ", " + std::to_string(y1) +
        ", " + std::to_string(x2) + ", " + std::to_string(y2) +
        "] exceed [0,1] beyond tolerance " + std::to_string(tolerance));
  }

  x1 = std::clamp(x1, 0.0, 1.0);
  y1 = std::clamp(y1, 0.0, 1.0);
  x2 = std::clamp(x2, 0.0, 1.0);
  y2 = std::clamp(y2, 0.0, 1.0);
  return BBox{(x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1};
}

CornerBox to_corners(const BBox& b) {
  return CornerBox{b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0,
                   b.cy + b.h / 2.0};
}

double iou(const CornerBox& a, const CornerBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const CornerBox& a, const CornerBox& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double overlap = uni > 0.0 ? inter / uni : 0.0;

  const double ew = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double eh = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double enclosure = ew * eh;
  if (enclosure <= 0.0) {
    return overlap;
  }
  return overlap - (enclosure - uni) / enclosure;
}

double iou(const BBox& a, const BBox& b) {
  return iou(to_corners(a), to_corners(b));
}

double giou(const BBox& a, const BBox& b) {
  return giou(to_corners(a), to_corners(b));
}

}  // namespace detkit
