#pragma once

#include <string>

#include "detkit/geometry.hpp"

namespace detkit {

/// One model prediction: where, what, and how sure.
struct Detection {
  std::string image_id;
  int class_id = 0;
  BBox box;
  double confidence = 0.0;
};

/// One annotated instance.
struct GroundTruth {
  std::string image_id;
  int class_id = 0;
  BBox box;
};

}  // namespace detkit
